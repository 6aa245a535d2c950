#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "debias_lab/error.hpp"
#include "debias_lab/hash.hpp"
#include "debias_lab/model.hpp"
#include "debias_lab/optim.hpp"

namespace debias {

// On-disk layout of a checkpoint directory:
//   manifest.json                 dims, variant, vocab hash, seed, step count
//   E.bin W1.bin b1.bin U.bin c.bin            parameters
//   m.E.bin ... v.c.bin                        AdamW moments (when saved)
// Every .bin is a flat little-endian array of 64-bit IEEE doubles.
inline constexpr const char* kCheckpointFormat = "debias-lab-checkpoint/1";

struct CheckpointInfo {
  std::uint64_t vocab_hash = 0;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

namespace detail {

inline void write_blob(const std::filesystem::path& path, std::span<const double> values) {
  std::vector<unsigned char> bytes(values.size() * 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits;
    std::memcpy(&bits, &values[i], 8);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + b] = static_cast<unsigned char>(bits >> (8 * b));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error("write failed: " + path.string());
}

inline void read_blob(const std::filesystem::path& path, std::span<double> values) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::vector<unsigned char> bytes(values.size() * 8);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size()) || in.peek() != EOF) {
    throw Error("blob size mismatch: " + path.string());
  }
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) bits |= static_cast<std::uint64_t>(bytes[i * 8 + b]) << (8 * b);
    std::memcpy(&values[i], &bits, 8);
  }
}

inline std::vector<std::size_t> block_shape(const ModelDims& d, std::size_t block) {
  switch (block) {
    case 0: return {d.vocab_size, d.d_embed};
    case 1: return {d.d_feat(), d.d_hidden};
    case 2: return {d.d_hidden};
    case 3: return {static_cast<std::size_t>(kNumLabels), d.d_hidden};
    default: return {static_cast<std::size_t>(kNumLabels)};
  }
}

}  // namespace detail

inline void save_checkpoint(const std::filesystem::path& dir, const ModelParams& params,
                            const CheckpointInfo& info, const OptimState* optimizer = nullptr) {
  std::filesystem::create_directories(dir);
  nlohmann::ordered_json manifest;
  manifest["format"] = kCheckpointFormat;
  manifest["variant"] = variant_name(params.dims.variant);
  manifest["vocab_size"] = params.dims.vocab_size;
  manifest["d_embed"] = params.dims.d_embed;
  manifest["d_hidden"] = params.dims.d_hidden;
  manifest["vocab_hash"] = hex64(info.vocab_hash);
  manifest["seed"] = info.seed;
  manifest["step"] = info.step;
  manifest["checksum"] = hex64(params.checksum());
  auto& blocks = manifest["blocks"];
  const auto bs = params.blocks();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    const std::string name(ParamBlocks::kBlockNames[i]);
    detail::write_blob(dir / (name + ".bin"), bs[i]);
    blocks.push_back({{"name", name},
                      {"file", name + ".bin"},
                      {"shape", detail::block_shape(params.dims, i)}});
  }
  if (optimizer) {
    auto& opt = manifest["optimizer"];
    opt["t"] = optimizer->t;
    opt["lr"] = optimizer->hyper.lr;
    opt["beta1"] = optimizer->hyper.beta1;
    opt["beta2"] = optimizer->hyper.beta2;
    opt["eps"] = optimizer->hyper.eps;
    opt["weight_decay"] = optimizer->hyper.weight_decay;
    const auto ms = optimizer->m.blocks();
    const auto vs = optimizer->v.blocks();
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string name(ParamBlocks::kBlockNames[i]);
      detail::write_blob(dir / ("m." + name + ".bin"), ms[i]);
      detail::write_blob(dir / ("v." + name + ".bin"), vs[i]);
    }
  }
  std::ofstream out(dir / "manifest.json", std::ios::binary);
  if (!out) throw Error("cannot write manifest in " + dir.string());
  out << manifest.dump(2) << '\n';
}

struct LoadedCheckpoint {
  ModelParams params;
  CheckpointInfo info;
  std::optional<OptimState> optimizer;
};

inline LoadedCheckpoint load_checkpoint(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error("missing checkpoint manifest: " + (dir / "manifest.json").string());
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error("malformed checkpoint manifest in " + dir.string() + ": " + e.what());
  }
  if (manifest.value("format", "") != kCheckpointFormat) {
    throw Error("unsupported checkpoint format in " + dir.string());
  }
  ModelDims dims{manifest.at("vocab_size").get<std::size_t>(), manifest.at("d_embed").get<std::size_t>(),
                 manifest.at("d_hidden").get<std::size_t>(),
                 parse_variant(manifest.at("variant").get<std::string>())};
  LoadedCheckpoint ck{ModelParams(dims), {}, std::nullopt};
  ck.info.vocab_hash = std::stoull(manifest.at("vocab_hash").get<std::string>(), nullptr, 16);
  ck.info.seed = manifest.at("seed").get<std::uint64_t>();
  ck.info.step = manifest.at("step").get<std::uint64_t>();
  auto bs = ck.params.blocks();
  for (std::size_t i = 0; i < bs.size(); ++i) {
    detail::read_blob(dir / (std::string(ParamBlocks::kBlockNames[i]) + ".bin"), bs[i]);
  }
  if (auto it = manifest.find("checksum"); it != manifest.end()) {
    if (it->get<std::string>() != hex64(ck.params.checksum())) {
      throw Error("checkpoint checksum mismatch in " + dir.string());
    }
  }
  if (auto it = manifest.find("optimizer"); it != manifest.end()) {
    AdamWHyper h{it->at("lr").get<double>(), it->at("beta1").get<double>(),
                 it->at("beta2").get<double>(), it->at("eps").get<double>(),
                 it->at("weight_decay").get<double>()};
    OptimState st(dims, h);
    st.t = it->at("t").get<std::uint64_t>();
    auto ms = st.m.blocks();
    auto vs = st.v.blocks();
    for (std::size_t i = 0; i < ms.size(); ++i) {
      const std::string name(ParamBlocks::kBlockNames[i]);
      detail::read_blob(dir / ("m." + name + ".bin"), ms[i]);
      detail::read_blob(dir / ("v." + name + ".bin"), vs[i]);
    }
    ck.optimizer = std::move(st);
  }
  return ck;
}

}  // namespace debias
