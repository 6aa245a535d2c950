#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "debias_lab/checkpoint.hpp"

using namespace debias;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("debias_ck_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Checkpoint, RoundTripIsExact) {
  const auto dir = fresh_dir("roundtrip");
  const auto params = init_params(17, 5, 6, Variant::full, 42);
  OptimState st(params.dims, AdamWHyper{3e-4, 0.9, 0.99, 1e-8, 0.02});
  st.t = 7;
  st.m.fill(0.125);
  st.v.fill(1e-9);
  save_checkpoint(dir, params, {0xabcdefULL, 42, 7}, &st);
  const auto ck = load_checkpoint(dir);
  EXPECT_EQ(ck.params, params);
  EXPECT_EQ(ck.info.vocab_hash, 0xabcdefULL);
  EXPECT_EQ(ck.info.seed, 42u);
  EXPECT_EQ(ck.info.step, 7u);
  ASSERT_TRUE(ck.optimizer.has_value());
  EXPECT_EQ(ck.optimizer->t, 7u);
  EXPECT_EQ(ck.optimizer->m, st.m);
  EXPECT_EQ(ck.optimizer->hyper.weight_decay, 0.02);
}

TEST(Checkpoint, WithoutOptimizer) {
  const auto dir = fresh_dir("noopt");
  const auto params = init_params(9, 3, 2, Variant::hypothesis_only, 1);
  save_checkpoint(dir, params, {});
  const auto ck = load_checkpoint(dir);
  EXPECT_EQ(ck.params.dims.variant, Variant::hypothesis_only);
  EXPECT_FALSE(ck.optimizer.has_value());
  EXPECT_FALSE(fs::exists(dir / "m.E.bin"));
}

TEST(Checkpoint, BlobsAreLittleEndianDoubles) {
  const auto dir = fresh_dir("layout");
  auto params = init_params(4, 2, 2, Variant::full, 1);
  params.out_bias = {1.0, -2.0, 0.5};
  save_checkpoint(dir, params, {});
  EXPECT_EQ(fs::file_size(dir / "c.bin"), 24u);
  std::ifstream in(dir / "c.bin", std::ios::binary);
  unsigned char bytes[8];
  in.read(reinterpret_cast<char*>(bytes), 8);
  // 1.0 = 0x3FF0000000000000
  EXPECT_EQ(bytes[7], 0x3F);
  EXPECT_EQ(bytes[6], 0xF0);
  for (int i = 0; i < 6; ++i) EXPECT_EQ(bytes[i], 0);
}

TEST(Checkpoint, CorruptionIsDetected) {
  const auto dir = fresh_dir("corrupt");
  save_checkpoint(dir, init_params(8, 3, 3, Variant::full, 5), {});
  {
    std::fstream f(dir / "W1.bin", std::ios::binary | std::ios::in | std::ios::out);
    f.seekp(3);
    f.put('\x55');
  }
  EXPECT_THROW(load_checkpoint(dir), Error);

  save_checkpoint(dir, init_params(8, 3, 3, Variant::full, 5), {});
  { std::ofstream(dir / "b1.bin", std::ios::binary | std::ios::app) << 'x'; }
  try {
    load_checkpoint(dir);
    FAIL();
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("blob size mismatch"), std::string::npos);
  }
  EXPECT_THROW(load_checkpoint(fresh_dir("missing")), Error);
}
