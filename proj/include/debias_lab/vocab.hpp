#pragma once

#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "debias_lab/data.hpp"
#include "debias_lab/error.hpp"
#include "debias_lab/hash.hpp"
#include "debias_lab/tokenize.hpp"

namespace debias {

using TokenId = std::int32_t;

inline constexpr TokenId kPad = 0;
inline constexpr TokenId kUnk = 1;
inline constexpr TokenId kNumSpecials = 2;

class Vocabulary {
 public:
  Vocabulary() : id_to_token_{"<pad>", "<unk>"} {}

  // Tokens in id order (ids start after the specials).
  static Vocabulary from_tokens(const std::vector<std::string>& tokens, std::size_t min_count = 1) {
    Vocabulary v;
    v.min_count_ = min_count;
    for (const auto& t : tokens) {
      if (v.token_to_id_.count(t)) throw Error("duplicate vocabulary token: " + t);
      v.token_to_id_.emplace(t, static_cast<TokenId>(v.id_to_token_.size()));
      v.id_to_token_.push_back(t);
    }
    return v;
  }

  std::size_t size() const { return id_to_token_.size(); }
  std::size_t min_count() const { return min_count_; }

  TokenId id(const std::string& token) const {
    auto it = token_to_id_.find(token);
    return it == token_to_id_.end() ? kUnk : it->second;
  }

  bool contains(const std::string& token) const { return token_to_id_.count(token) != 0; }

  const std::string& token(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= id_to_token_.size()) {
      throw Error("token id out of range: " + std::to_string(id));
    }
    return id_to_token_[static_cast<std::size_t>(id)];
  }

  // Fingerprint of the id assignment, recorded in checkpoint manifests.
  std::uint64_t fingerprint() const {
    Fnv1a h;
    for (const auto& t : id_to_token_) {
      h.update(t);
      h.update("\n");
    }
    return h.digest();
  }

  // One token per line; line k (0-based) holds id k + 2.
  void save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write vocabulary: " + path.string());
    for (std::size_t i = kNumSpecials; i < id_to_token_.size(); ++i) out << id_to_token_[i] << '\n';
  }

  static Vocabulary load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open vocabulary: " + path.string());
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    return from_tokens(tokens);
  }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.id_to_token_ == b.id_to_token_;
  }

 private:
  std::unordered_map<std::string, TokenId> token_to_id_;
  std::vector<std::string> id_to_token_;
  std::size_t min_count_ = 1;
};

// Counts premise and hypothesis tokens of the given (train) split. Ordering is
// descending frequency, ties broken lexicographically.
inline Vocabulary build_vocab(const Dataset& ds, std::size_t min_count = 1) {
  if (ds.empty()) throw Error("cannot build a vocabulary from an empty dataset");
  if (min_count < 1) throw Error("min_count must be at least 1");
  std::map<std::string, std::size_t> counts;
  for (const Example& ex : ds.examples) {
    for (const auto& t : tokenize(ex.premise)) ++counts[t];
    for (const auto& t : tokenize(ex.hypothesis)) ++counts[t];
  }
  std::vector<std::pair<std::string, std::size_t>> kept;
  for (auto& [tok, n] : counts) {
    if (n >= min_count) kept.emplace_back(tok, n);
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens;
  tokens.reserve(kept.size());
  for (auto& [tok, n] : kept) tokens.push_back(tok);
  return Vocabulary::from_tokens(tokens, min_count);
}

inline std::vector<TokenId> encode(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
  std::vector<TokenId> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(vocab.id(t));
  return ids;
}

inline std::vector<std::string> decode(const std::vector<TokenId>& ids, const Vocabulary& vocab) {
  std::vector<std::string> tokens;
  tokens.reserve(ids.size());
  for (TokenId id : ids) tokens.push_back(vocab.token(id));
  return tokens;
}

// Model-ready form of an Example.
struct EncodedExample {
  std::vector<TokenId> premise;
  std::vector<TokenId> hypothesis;
  Label label = Label::entailment;
};

inline EncodedExample encode_example(const Example& ex, const Vocabulary& vocab) {
  return EncodedExample{encode(tokenize(ex.premise), vocab), encode(tokenize(ex.hypothesis), vocab),
                        ex.label};
}

inline std::vector<EncodedExample> encode_dataset(const Dataset& ds, const Vocabulary& vocab) {
  std::vector<EncodedExample> out;
  out.reserve(ds.size());
  for (const Example& ex : ds.examples) out.push_back(encode_example(ex, vocab));
  return out;
}

}  // namespace debias
