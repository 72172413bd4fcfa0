// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cstring>
#include <sstream>

#include "mpcrn/checkpoint.h"
#include "mpcrn/error.h"
#include "test_util.h"

namespace mpcrn {
namespace {

std::string serialize(const Checkpoint& ck) {
  std::ostringstream os;
  write_checkpoint(os, ck);
  return os.str();
}

Checkpoint deserialize(const std::string& bytes) {
  std::istringstream is(bytes);
  return read_checkpoint(is);
}

TEST(CheckpointTest, BitExactRoundTrip) {
  ModelParams<float> p;
  const Mpcrn<float> m(ModelConfig::toy(), p, 3);
  Rng rng(4);
  testing::randomize(p, rng, 1.0);
  p.at("enc0.bn.running_var").value[1] = 7.5f;
  const Checkpoint ck = make_checkpoint(ModelConfig::toy(), p);
  const std::string bytes = serialize(ck);
  const Checkpoint back = deserialize(bytes);
  EXPECT_EQ(back.config, ModelConfig::toy());
  ASSERT_EQ(back.records.size(), p.size());
  EXPECT_EQ(back.records, ck.records);
  EXPECT_EQ(serialize(back), bytes);

  const LoadedModel loaded = model_from_checkpoint(back);
  for (std::size_t k = 0; k < p.size(); ++k) {
    ASSERT_EQ(loaded.params[k].name, p[k].name);
    EXPECT_EQ(std::memcmp(loaded.params[k].value.data(), p[k].value.data(),
                          p[k].size() * sizeof(float)),
              0);
  }
}

TEST(CheckpointTest, LayoutHeader) {
  ModelParams<float> p;
  const Mpcrn<float> m(ModelConfig::toy(), p, 1);
  const std::string bytes = serialize(make_checkpoint(ModelConfig::toy(), p));
  ASSERT_GT(bytes.size(), 15u);
  EXPECT_EQ(std::memcmp(bytes.data(), "MPCRN1\0", 7), 0);
  std::uint64_t len = 0;
  for (int i = 7; i >= 0; --i) len = len << 8 | static_cast<unsigned char>(bytes[7 + i]);
  EXPECT_EQ(bytes.substr(15, len), ModelConfig::toy().to_text());
}

TEST(CheckpointTest, FileRoundTripAndInference) {
  testing::TempDir dir;
  ModelParams<float> p;
  const Mpcrn<float> m(ModelConfig::toy(), p, 5);
  save_checkpoint(dir.file("m.ckpt"), make_checkpoint(ModelConfig::toy(), p));
  const LoadedModel loaded = load_model(dir.file("m.ckpt"));
  Rng rng(6);
  const auto x = testing::random_tensor<float>({1, 2, 5, 257}, rng);
  EXPECT_EQ(loaded.model.forward(loaded.params, x, Mode::kEval).vec(),
            m.forward(p, x, Mode::kEval).vec());
}

TEST(CheckpointTest, RejectsCorruptData) {
  ModelParams<float> p;
  const Mpcrn<float> m(ModelConfig::toy(), p, 7);
  const std::string bytes = serialize(make_checkpoint(ModelConfig::toy(), p));
  EXPECT_THROW(deserialize(""), ParseError);
  EXPECT_THROW(deserialize("NOTCKPT" + bytes.substr(7)), ParseError);
  EXPECT_THROW(deserialize(bytes.substr(0, bytes.size() - 3)), ParseError);
  EXPECT_THROW(deserialize(bytes + "x"), ParseError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), ParseError);
}

TEST(CheckpointTest, ApplyChecksNamesAndShapes) {
  ModelParams<float> p;
  const Mpcrn<float> m(ModelConfig::toy(), p, 8);
  Checkpoint ck = make_checkpoint(ModelConfig::toy(), p);
  Checkpoint missing = ck;
  missing.records.pop_back();
  EXPECT_THROW(apply_checkpoint(missing, p), ParseError);
  Checkpoint renamed = ck;
  renamed.records[0].name = "nope";
  EXPECT_THROW(apply_checkpoint(renamed, p), ParseError);
  Checkpoint reshaped = ck;
  reshaped.records[0].shape[0] += 1;
  EXPECT_THROW(apply_checkpoint(reshaped, p), ParseError);
  ModelParams<double> pd;
  const Mpcrn<double> md(ModelConfig::toy(), pd, 9);
  apply_checkpoint(ck, pd);
  EXPECT_EQ(static_cast<float>(pd[0].value[3]), p[0].value[3]);
}

}  // namespace
}  // namespace mpcrn
