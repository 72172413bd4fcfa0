// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>

#include "mpcrn/error.h"
#include "mpcrn/loss.h"
#include "test_util.h"

namespace mpcrn {
namespace {

using testing::random_spectrogram;

ComplexSpectrogram zeros_like(const ComplexSpectrogram& s) {
  ComplexSpectrogram z = s;
  z.real.setZero();
  z.imag.setZero();
  return z;
}

TEST(LossTest, ZeroForIdenticalSpectra) {
  Rng rng(1);
  const auto s = random_spectrogram(4, 9, rng);
  EXPECT_NEAR(loss_mag(s, s), 0.0, 1e-20);
  EXPECT_EQ(loss_ri(s, s), 0.0);
  EXPECT_NEAR(loss_total(s, s), 0.0, 1e-20);
}

TEST(LossTest, SingleBinValues) {
  Rng rng(2);
  auto s = random_spectrogram(1, 2, rng);
  s.real.resize(1, 1);
  s.imag.resize(1, 1);
  s.real(0, 0) = 3.0;
  s.imag(0, 0) = 4.0;
  const double m0 = std::sqrt(kLossEpsilon), m1 = std::sqrt(25.0 + kLossEpsilon);
  EXPECT_NEAR(loss_mag(zeros_like(s), s), (m1 - m0) * (m1 - m0), 1e-12);
  EXPECT_NEAR(loss_mag(zeros_like(s), s), 25.0, 1e-4);
  auto shifted = s;
  shifted.real(0, 0) += 1.0;
  shifted.imag(0, 0) += 1.0;
  EXPECT_DOUBLE_EQ(loss_ri(shifted, s), 2.0);
}

TEST(LossTest, MatchesElementwiseRecomputation) {
  Rng rng(3);
  const auto a = random_spectrogram(6, 17, rng), b = random_spectrogram(6, 17, rng);
  double mag = 0.0, ri = 0.0;
  const double n = 6 * 17;
  for (Eigen::Index k = 0; k < a.real.size(); ++k) {
    const auto mag_of = [](double re, double im) { return std::sqrt(re * re + im * im + kLossEpsilon); };
    const double d = mag_of(a.real.data()[k], a.imag.data()[k]) - mag_of(b.real.data()[k], b.imag.data()[k]);
    mag += d * d / n;
    const double dr = a.real.data()[k] - b.real.data()[k], di = a.imag.data()[k] - b.imag.data()[k];
    ri += (dr * dr + di * di) / n;
  }
  EXPECT_NEAR(loss_mag(a, b), mag, 1e-12);
  EXPECT_NEAR(loss_ri(a, b), ri, 1e-12);
  EXPECT_NEAR(loss_total(a, b, {0.3, 2.0}), 0.3 * mag + 2.0 * ri, 1e-12);
  EXPECT_NEAR(loss_total(a, b, {0.0, 1.0}), loss_ri(a, b), 1e-15);
}

TEST(LossTest, RiSymmetricUnderPlaneSwap) {
  Rng rng(4);
  auto a = random_spectrogram(3, 5, rng), b = random_spectrogram(3, 5, rng);
  const double before = loss_ri(a, b);
  std::swap(a.real, a.imag);
  std::swap(b.real, b.imag);
  EXPECT_DOUBLE_EQ(loss_ri(a, b), before);
}

TEST(LossTest, GradientMatchesFiniteDifferences) {
  Rng rng(5);
  auto a = random_spectrogram(3, 7, rng);
  const auto b = random_spectrogram(3, 7, rng);
  const LossWeights w{0.7, 1.3};
  const auto g = loss_total_grad(a, b, w);
  EXPECT_NEAR(g.value, loss_total(a, b, w), 1e-15);
  for (Plane* plane : {&a.real, &a.imag}) {
    const Plane& grad = plane == &a.real ? g.d_real : g.d_imag;
    for (Eigen::Index k = 0; k < plane->size(); ++k) {
      const double v = plane->data()[k], h = 1e-6;
      plane->data()[k] = v + h;
      const double fp = loss_total(a, b, w);
      plane->data()[k] = v - h;
      const double fm = loss_total(a, b, w);
      plane->data()[k] = v;
      const double num = (fp - fm) / (2 * h);
      EXPECT_LT(std::abs(grad.data()[k] - num) / std::max({std::abs(num), std::abs(grad.data()[k]), 1e-6}),
                1e-4);
    }
  }
}

TEST(LossTest, GradientFiniteAtZeroEstimate) {
  Rng rng(6);
  const auto b = random_spectrogram(2, 3, rng);
  const auto g = loss_total_grad(zeros_like(b), b);
  EXPECT_TRUE(g.d_real.isFinite().all());
  EXPECT_TRUE(g.d_imag.isFinite().all());
}

TEST(LossTest, Errors) {
  Rng rng(7);
  const auto a = random_spectrogram(2, 3, rng), b = random_spectrogram(3, 3, rng);
  EXPECT_THROW(loss_total(a, b), ShapeError);
  EXPECT_THROW(loss_total(a, a, {-1.0, 1.0}), InvalidInput);
  EXPECT_THROW((LossWeights{1.0, std::nan("")}.validate()), InvalidInput);
}

}  // namespace
}  // namespace mpcrn
