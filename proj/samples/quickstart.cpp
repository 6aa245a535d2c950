// Generates a small artifact-laden corpus, trains a standard and a PoE model
// on it, and compares how often each agrees with the hypothesis-only model.
#include <cstdio>

#include "debias_lab/behavioral.hpp"
#include "debias_lab/data.hpp"
#include "debias_lab/metrics.hpp"
#include "debias_lab/poe.hpp"

using namespace debias;

int main() {
  SynthConfig data;
  data.n_train = 3000;
  data.n_val = 500;
  data.n_test = 1000;
  const SyntheticCorpus corpus = generate_synthetic(data);
  const Vocabulary vocab = build_vocab(corpus.train);

  TrainConfig cfg;
  cfg.epochs = 3;
  cfg.grad_accum = 1;
  cfg.d_embed = 32;
  cfg.d_hidden = 64;

  const auto test = encode_dataset(corpus.test, vocab);
  const auto gold = gold_labels(corpus.test);
  for (TrainMode mode : {TrainMode::standard, TrainMode::poe}) {
    cfg.mode = mode;
    const TrainResult r = train(corpus.train, corpus.validation, vocab, cfg);
    const auto pred = argmax_all(predict_all(test, r.main.params));
    const auto bias = argmax_all(predict_all(test, r.bias.params));
    const std::vector<BehavioralSuite> neg = {gen_behavioral_suite(Category::negation_sensitivity, 200, 1)};
    std::printf("%-8s accuracy %.3f  bias agreement %.3f  hypothesis-only %.3f  negation suite %.3f\n",
                std::string(mode_name(mode)).c_str(), accuracy(pred, gold), bias_agreement(pred, bias),
                accuracy(bias, gold), run_behavioral(r.main.params, vocab, neg)[0].accuracy);
  }
}
