// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>

#include "mpcrn/error.h"
#include "mpcrn/metrics.h"
#include "test_util.h"

namespace mpcrn {
namespace {

using testing::random_waveform;

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

TEST(SiSdrTest, CapAndScaleInvariance) {
  const auto ref = random_waveform(4000, 1);
  EXPECT_DOUBLE_EQ(si_sdr(ref, ref), kSiSdrCap);
  Waveform half = ref;
  for (auto& v : half.samples) v *= 0.5;
  EXPECT_DOUBLE_EQ(si_sdr(half, ref), kSiSdrCap);
}

TEST(SiSdrTest, OrthogonalNoiseAtEqualPowerIsZeroDb) {
  const auto ref = random_waveform(8000, 2);
  auto noise = random_waveform(8000, 3).samples;
  const double a = dot(noise, ref.samples) / dot(ref.samples, ref.samples);
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] -= a * ref.samples[i];
  const double g = std::sqrt(dot(ref.samples, ref.samples) / dot(noise, noise));
  Waveform est = ref;
  for (std::size_t i = 0; i < noise.size(); ++i) est.samples[i] += g * noise[i];
  EXPECT_NEAR(si_sdr(est, ref), 0.0, 1e-9);
  // Rescaling the estimate leaves the score unchanged.
  for (auto& v : est.samples) v *= 3.0;
  EXPECT_NEAR(si_sdr(est, ref), 0.0, 1e-9);
}

TEST(SiSdrTest, KnownRatio) {
  // Residual at a tenth of the target power: 10 dB.
  const auto ref = random_waveform(6000, 4);
  auto noise = random_waveform(6000, 5).samples;
  const double a = dot(noise, ref.samples) / dot(ref.samples, ref.samples);
  for (std::size_t i = 0; i < noise.size(); ++i) noise[i] -= a * ref.samples[i];
  const double g = std::sqrt(0.1 * dot(ref.samples, ref.samples) / dot(noise, noise));
  Waveform est = ref;
  for (std::size_t i = 0; i < noise.size(); ++i) est.samples[i] += g * noise[i];
  EXPECT_NEAR(si_sdr(est, ref), 10.0, 1e-9);
}

TEST(SiSdrTest, OrthogonalEstimateHitsLowerCap) {
  Waveform ref, est;
  ref.samples = {1.0, 0.0, 0.0, 0.0};
  est.samples = {0.0, 1.0, 0.0, 0.0};
  EXPECT_DOUBLE_EQ(si_sdr(est, ref), -kSiSdrCap);
}

TEST(SiSdrTest, Errors) {
  Waveform zero;
  zero.samples.assign(10, 0.0);
  EXPECT_THROW(si_sdr(random_waveform(10, 1), zero), InvalidInput);
  EXPECT_THROW(si_sdr(random_waveform(10, 1), random_waveform(11, 1)), InvalidInput);
  EXPECT_THROW(si_sdr(Waveform{}, Waveform{}), InvalidInput);
}

TEST(SegSnrTest, IdenticalHitsCeiling) {
  const auto ref = random_waveform(4096, 6);
  EXPECT_DOUBLE_EQ(seg_snr(ref, ref), 35.0);
}

TEST(SegSnrTest, InvertedSignal) {
  // Error is -2 * reference in every frame: 10 log10(1/4).
  const auto ref = random_waveform(4096, 7);
  Waveform inv = ref;
  for (auto& v : inv.samples) v = -v;
  EXPECT_NEAR(seg_snr(inv, ref), -6.0206, 1e-4);
}

TEST(SegSnrTest, FloorApplies) {
  const auto ref = random_waveform(4096, 8, 0.001);
  const auto est = random_waveform(4096, 9, 10.0);
  EXPECT_DOUBLE_EQ(seg_snr(est, ref), -10.0);
}

TEST(SegSnrTest, SilentFramesSkipped) {
  auto ref = random_waveform(2048, 10);
  std::fill(ref.samples.begin(), ref.samples.begin() + 1024, 0.0);
  Waveform est = ref;
  for (std::size_t i = 1024; i < 2048; ++i) est.samples[i] *= 0.9;  // 20 dB
  std::fill(est.samples.begin(), est.samples.begin() + 1024, 1.0);
  EXPECT_NEAR(seg_snr(est, ref), 20.0, 1e-9);
}

TEST(SegSnrTest, Errors) {
  Waveform silent;
  silent.samples.assign(2048, 0.0);
  EXPECT_THROW(seg_snr(random_waveform(2048, 1), silent), InvalidInput);
  SegSnrOptions bad;
  bad.floor_db = 40.0;
  EXPECT_THROW(seg_snr(random_waveform(2048, 1), random_waveform(2048, 2), bad), InvalidInput);
}

TEST(SnrTest, PowerRatio) {
  std::vector<double> s(100, 2.0), n(100, 0.2);
  EXPECT_NEAR(snr_db(s, n), 20.0, 1e-12);
}

}  // namespace
}  // namespace mpcrn
