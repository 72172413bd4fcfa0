// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include "mpcrn/error.h"
#include "mpcrn/pipeline.h"
#include "mpcrn/stream.h"
#include "test_util.h"

namespace mpcrn {
namespace {

using testing::max_abs_diff;
using testing::random_waveform;

struct ToyModel {
  ModelParams<float> params;
  Mpcrn<float> model;
  explicit ToyModel(std::uint64_t seed) : model(ModelConfig::toy(), params, seed) {}
};

TEST(StreamTest, MatchesOfflineFloat) {
  const ToyModel m(1);
  for (std::uint64_t seed : {2u, 3u}) {
    const Waveform in = random_waveform(16000 + 77 * seed, seed, 0.1);
    for (auto mode : {ReconstructionMode::kPolar, ReconstructionMode::kE}) {
      StreamEnhancer<float> s(m.model, m.params, mode);
      const Waveform a = s.run(in);
      const Waveform b = enhance_offline(m.model, m.params, in, mode);
      ASSERT_EQ(a.samples.size(), in.samples.size());
      EXPECT_LT(max_abs_diff(a.samples, b.samples), 1e-5);
    }
  }
}

TEST(StreamTest, MatchesOfflineDouble) {
  ModelParams<double> p;
  const Mpcrn<double> model(ModelConfig::toy(), p, 4);
  const Waveform in = random_waveform(9000, 5, 0.1);
  StreamEnhancer<double> s(model, p);
  EXPECT_LT(max_abs_diff(s.run(in).samples, enhance_offline(model, p, in).samples), 1e-10);
}

TEST(StreamTest, ZeroInZeroOut) {
  ToyModel m(6);
  for (auto& e : m.params)
    if (e.name.find("bias") != std::string::npos) std::fill(e.value.begin(), e.value.end(), 0.f);
  StreamEnhancer<float> s(m.model, m.params);
  s.prime(std::vector<double>(s.prime_size(), 0.0));
  const std::vector<double> zeros(s.hop(), 0.0);
  for (int i = 0; i < 50; ++i)
    for (double v : s.process_frame(zeros)) ASSERT_EQ(v, 0.0);
  for (double v : s.flush()) EXPECT_EQ(v, 0.0);
}

TEST(StreamTest, InterleavedStreamsAreIsolated) {
  const ToyModel m(7);
  const Waveform a = random_waveform(8192, 8, 0.1), b = random_waveform(8192, 9, 0.2);
  StreamEnhancer<float> sa(m.model, m.params), sb(m.model, m.params);
  const std::size_t p = sa.prime_size(), hop = sa.hop();
  sa.prime(std::span(a.samples.data(), p));
  sb.prime(std::span(b.samples.data(), p));
  std::vector<double> ya, yb;
  for (std::size_t pos = p; pos + hop <= a.samples.size(); pos += hop) {
    auto ca = sa.process_frame(std::span(a.samples.data() + pos, hop));
    auto cb = sb.process_frame(std::span(b.samples.data() + pos, hop));
    ya.insert(ya.end(), ca.begin(), ca.end());
    yb.insert(yb.end(), cb.begin(), cb.end());
  }
  auto ta = sa.flush(), tb = sb.flush();
  ya.insert(ya.end(), ta.begin(), ta.end());
  yb.insert(yb.end(), tb.begin(), tb.end());
  StreamEnhancer<float> solo(m.model, m.params);
  EXPECT_EQ(ya, solo.run(a).samples);
  EXPECT_EQ(yb, solo.run(b).samples);
}

TEST(StreamTest, StateFootprintIsConstant) {
  const ToyModel m(10);
  StreamEnhancer<float> s(m.model, m.params);
  const Waveform w = random_waveform(s.prime_size() + 128 * 64, 11, 0.1);
  s.prime(std::span(w.samples.data(), s.prime_size()));
  std::size_t after10 = 0;
  for (std::size_t f = 1; f <= 10000; ++f) {
    const std::size_t pos = s.prime_size() + 128 * (f % 64);
    s.process_frame(std::span(w.samples.data() + pos, 128));
    if (f == 10) after10 = s.state_bytes();
  }
  EXPECT_EQ(s.frames_processed(), 10000u);
  EXPECT_EQ(s.state_bytes(), after10);
}

TEST(StreamTest, LatencyIsOneWindow) {
  const ToyModel m(12);
  const Waveform in = random_waveform(6000, 13, 0.1);
  StreamEnhancer<float> s(m.model, m.params);
  const Waveform y0 = s.run(in);
  for (std::size_t j : {1000u, 2345u, 4000u}) {
    Waveform pert = in;
    pert.samples[j] += 0.5;
    const Waveform y1 = s.run(pert);
    for (std::size_t n = 0; n + 511 < j; ++n) ASSERT_EQ(y0.samples[n], y1.samples[n]) << n;
    bool changed = false;
    for (std::size_t n = j - 511; n <= j; ++n) changed = changed || y0.samples[n] != y1.samples[n];
    EXPECT_TRUE(changed);
  }
}

TEST(StreamTest, ResetReproduces) {
  const ToyModel m(14);
  const Waveform in = random_waveform(3000, 15, 0.1);
  StreamEnhancer<float> s(m.model, m.params);
  const auto a = s.run(in).samples;
  s.reset();
  EXPECT_EQ(s.run(in).samples, a);
}

TEST(StreamTest, Errors) {
  const ToyModel m(16);
  StreamEnhancer<float> s(m.model, m.params);
  EXPECT_THROW(s.process_frame(std::vector<double>(128)), UsageError);
  EXPECT_THROW(s.flush(), UsageError);
  EXPECT_THROW(s.prime(std::vector<double>(100)), InvalidInput);
  s.prime(std::vector<double>(s.prime_size()));
  EXPECT_THROW(s.prime(std::vector<double>(s.prime_size())), UsageError);
  EXPECT_THROW(s.process_frame(std::vector<double>(127)), InvalidInput);
  s.process_frame(std::vector<double>(128));
  s.flush();
  EXPECT_THROW(s.process_frame(std::vector<double>(128)), UsageError);
  EXPECT_THROW(s.run(Waveform{}), InvalidInput);
  StftConfig other;
  other.fft_size = other.win_len = 256;
  other.hop = 64;
  EXPECT_THROW(StreamEnhancer<float>(m.model, m.params, ReconstructionMode::kPolar, other),
               InvalidInput);
}

TEST(PipelineTest, IdentityPassThrough) {
  const Waveform in = random_waveform(5000, 17);
  const Waveform out = enhance_identity(in);
  ASSERT_EQ(out.samples.size(), in.samples.size());
  EXPECT_LT(max_abs_diff(out.samples, in.samples), 1e-12);
}

TEST(PipelineTest, ShortSignalsArePadded) {
  EXPECT_EQ(padded_length(100), 512u);
  EXPECT_EQ(padded_length(512), 512u);
  EXPECT_EQ(padded_length(513), 640u);
  const ToyModel m(18);
  const Waveform in = random_waveform(300, 19, 0.1);
  EXPECT_EQ(enhance_offline(m.model, m.params, in).samples.size(), 300u);
  StreamEnhancer<float> s(m.model, m.params);
  EXPECT_EQ(s.run(in).samples.size(), 300u);
}

TEST(RtfTest, ReportsMedianOfRuns) {
  const RtfReport r = benchmark_rtf(ModelConfig::toy(), 0.5, 3, 1);
  EXPECT_EQ(r.run_seconds.size(), 5u);
  EXPECT_DOUBLE_EQ(r.audio_seconds, 0.5);
  EXPECT_GT(r.rtf, 0.0);
  EXPECT_NEAR(r.rtf, r.median_seconds / r.audio_seconds, 1e-15);
  EXPECT_THROW(benchmark_rtf(ModelConfig::toy(), 0.0), InvalidInput);
}

TEST(RtfTest, TimeScalesWithDuration) {
  const RtfReport a = benchmark_rtf(ModelConfig::toy(), 2.0, 7, 2);
  const RtfReport b = benchmark_rtf(ModelConfig::toy(), 4.0, 7, 2);
  EXPECT_NEAR(b.median_seconds / a.median_seconds, 2.0, 0.4);
}

}  // namespace
}  // namespace mpcrn
