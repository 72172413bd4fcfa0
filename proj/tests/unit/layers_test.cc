// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <gtest/gtest.h>

#include <cmath>

#include "mpcrn/error.h"
#include "mpcrn/layers.h"
#include "test_util.h"

namespace mpcrn {
namespace {

using testing::random_tensor;

Tensor<double> concat_time(const Tensor<double>& a, const Tensor<double>& b) {
  const Shape4 s = a.shape();
  Tensor<double> out({s.n, s.c, s.t + b.shape().t, s.f});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c) {
      for (std::size_t t = 0; t < s.t; ++t)
        for (std::size_t f = 0; f < s.f; ++f) out(n, c, t, f) = a(n, c, t, f);
      for (std::size_t t = 0; t < b.shape().t; ++t)
        for (std::size_t f = 0; f < s.f; ++f) out(n, c, s.t + t, f) = b(n, c, t, f);
    }
  return out;
}

// ---------------------------------------------------------------------------
// Causal convolution

TEST(Conv2dTest, FrequencyChain) {
  ConvSpec spec;
  std::vector<std::size_t> chain{257};
  for (int l = 0; l < 5; ++l) chain.push_back(conv_out_freq(chain.back(), spec));
  EXPECT_EQ(chain, (std::vector<std::size_t>{257, 129, 65, 33, 17, 9}));
}

TEST(Conv2dTest, MatchesDirectSum) {
  Rng rng(1);
  ModelParams<double> p;
  const ConvSpec spec{3, 4, 5, 2, 2, 2};
  const Conv2dCausal<double> conv(p, "c", spec, rng);
  testing::randomize(p, rng, 0.5);
  const auto x = random_tensor<double>({2, 3, 6, 17}, rng);
  const auto y = conv.forward(p, x);
  const auto& w = p.at("c.weight").value;
  const auto& b = p.at("c.bias").value;
  ASSERT_EQ(y.shape(), (Shape4{2, 4, 6, 9}));
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 4; ++o)
      for (std::size_t t = 0; t < 6; ++t)
        for (std::size_t fo = 0; fo < 9; ++fo) {
          double acc = b[o];
          for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t dt = 0; dt < 2; ++dt)
              for (std::size_t df = 0; df < 5; ++df) {
                const long ti = static_cast<long>(t + dt) - 1;
                const long fi = static_cast<long>(fo * 2 + df) - 2;
                if (ti < 0 || fi < 0 || fi >= 17) continue;
                acc += w[((o * 3 + i) * 2 + dt) * 5 + df] *
                       x(n, i, static_cast<std::size_t>(ti), static_cast<std::size_t>(fi));
              }
          EXPECT_NEAR(y(n, o, t, fo), acc, 1e-12);
        }
}

TEST(Conv2dTest, HistoryContinuesTheSequence) {
  Rng rng(2);
  ModelParams<double> p;
  const Conv2dCausal<double> conv(p, "c", ConvSpec{2, 3, 5, 2, 2, 2}, rng);
  const auto a = random_tensor<double>({1, 2, 4, 11}, rng);
  const auto b = random_tensor<double>({1, 2, 3, 11}, rng);
  const auto whole = conv.forward(p, concat_time(a, b));
  const auto hist = trailing_frames(a, static_cast<const Tensor<double>*>(nullptr), 1);
  const auto tail = conv.forward(p, b, &hist);
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t f = 0; f < tail.shape().f; ++f)
        EXPECT_NEAR(tail(0, o, t, f), whole(0, o, 4 + t, f), 1e-13);
}

TEST(Conv2dTest, IdentityKernel) {
  Rng rng(3);
  ModelParams<double> p;
  const Conv2dCausal<double> conv(p, "c", ConvSpec{3, 3, 1, 1, 1, 0}, rng);
  auto& w = p.at("c.weight").value;
  std::fill(w.begin(), w.end(), 0.0);
  for (std::size_t c = 0; c < 3; ++c) w[c * 3 + c] = 1.0;
  std::fill(p.at("c.bias").value.begin(), p.at("c.bias").value.end(), 0.0);
  const auto x = random_tensor<double>({2, 3, 4, 7}, rng);
  EXPECT_EQ(conv.forward(p, x).vec(), x.vec());
}

TEST(Conv2dTest, ZeroInputGivesBias) {
  Rng rng(4);
  ModelParams<double> p;
  const Conv2dCausal<double> conv(p, "c", ConvSpec{2, 3, 5, 2, 2, 2}, rng);
  p.at("c.bias").value = {0.5, -1.0, 2.0};
  const auto y = conv.forward(p, Tensor<double>({1, 2, 3, 9}));
  for (std::size_t o = 0; o < 3; ++o)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t f = 0; f < 5; ++f) EXPECT_EQ(y(0, o, t, f), p.at("c.bias").value[o]);
}

TEST(Conv2dTest, Errors) {
  Rng rng(5);
  ModelParams<double> p;
  const Conv2dCausal<double> conv(p, "c", ConvSpec{2, 3, 5, 2, 2, 2}, rng);
  EXPECT_THROW(conv.forward(p, Tensor<double>({1, 3, 3, 9})), ShapeError);
  const Tensor<double> bad_hist({1, 2, 2, 9});
  EXPECT_THROW(conv.forward(p, Tensor<double>({1, 2, 3, 9}), &bad_hist), ShapeError);
  EXPECT_THROW(conv.backward(p, ConvCache<double>{}, Tensor<double>({1, 3, 3, 5})), UsageError);
}

// ---------------------------------------------------------------------------
// Transposed convolution

TEST(TConv2dTest, MatchesScatterSum) {
  Rng rng(6);
  ModelParams<double> p;
  const TConvSpec spec{ConvSpec{3, 2, 5, 2, 2, 2}, 17};
  const TConv2dCausal<double> tconv(p, "t", spec, rng);
  testing::randomize(p, rng, 0.5);
  const auto x = random_tensor<double>({2, 3, 5, 9}, rng);
  const auto y = tconv.forward(p, x);
  ASSERT_EQ(y.shape(), (Shape4{2, 2, 5, 17}));
  const auto& w = p.at("t.weight").value;  // (kt, in, out, kf)
  Tensor<double> ref({2, 2, 5, 17});
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t o = 0; o < 2; ++o)
      for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t fo = 0; fo < 17; ++fo) ref(n, o, t, fo) = p.at("t.bias").value[o];
  for (std::size_t n = 0; n < 2; ++n)
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t ti = 0; ti < 5; ++ti)
        for (std::size_t f = 0; f < 9; ++f)
          for (std::size_t dt = 0; dt < 2; ++dt)
            for (std::size_t o = 0; o < 2; ++o)
              for (std::size_t df = 0; df < 5; ++df) {
                const std::size_t to = ti + dt;
                const long fo = static_cast<long>(f * 2 + df) - 2;
                if (to >= 5 || fo < 0 || fo >= 17) continue;
                ref(n, o, to, static_cast<std::size_t>(fo)) +=
                    w[((dt * 3 + i) * 2 + o) * 5 + df] * x(n, i, ti, f);
              }
  for (std::size_t k = 0; k < y.size(); ++k) EXPECT_NEAR(y.vec()[k], ref.vec()[k], 1e-12);
}

TEST(TConv2dTest, ZeroInputGivesBias) {
  Rng rng(7);
  ModelParams<double> p;
  const TConv2dCausal<double> tconv(p, "t", TConvSpec{ConvSpec{2, 2, 5, 2, 2, 2}, 17}, rng);
  p.at("t.bias").value = {1.5, -0.25};
  const auto y = tconv.forward(p, Tensor<double>({1, 2, 3, 9}));
  for (std::size_t t = 0; t < 3; ++t)
    for (std::size_t f = 0; f < 17; ++f) {
      EXPECT_EQ(y(0, 0, t, f), 1.5);
      EXPECT_EQ(y(0, 1, t, f), -0.25);
    }
}

TEST(TConv2dTest, MirrorsConvSizes) {
  ConvSpec spec;
  for (std::size_t f_in : {257u, 129u, 65u, 33u, 17u, 100u, 31u}) {
    const std::size_t f_out = conv_out_freq(f_in, spec);
    Rng rng(8);
    ModelParams<double> p;
    const TConv2dCausal<double> tconv(p, "t", TConvSpec{ConvSpec{1, 1, 5, 2, 2, 2}, f_in}, rng);
    EXPECT_EQ(tconv.forward(p, Tensor<double>({1, 1, 2, f_out})).shape().f, f_in);
  }
}

TEST(TConv2dTest, OutputDependsOnlyOnPastFrames) {
  Rng rng(9);
  ModelParams<double> p;
  const TConv2dCausal<double> tconv(p, "t", TConvSpec{ConvSpec{2, 2, 5, 2, 2, 2}, 17}, rng);
  auto x = random_tensor<double>({1, 2, 6, 9}, rng);
  const auto y0 = tconv.forward(p, x);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t f = 0; f < 9; ++f) x(0, c, 4, f) += 1.0;
  const auto y1 = tconv.forward(p, x);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 4; ++t)
      for (std::size_t f = 0; f < 17; ++f) EXPECT_EQ(y0(0, c, t, f), y1(0, c, t, f));
}

// ---------------------------------------------------------------------------
// Normalization and activations

TEST(BatchNormTest, TrainModeStandardizes) {
  Rng rng(10);
  ModelParams<double> p;
  const BatchNorm2d<double> bn(p, "bn", 3);
  auto x = random_tensor<double>({2, 3, 5, 7}, rng, 3.0);
  for (auto& v : x.vec()) v += 2.0;
  const auto y = bn.forward(p, x, Mode::kTrain);
  for (std::size_t c = 0; c < 3; ++c) {
    double m = 0.0, v = 0.0;
    const double cnt = 2 * 5 * 7;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t f = 0; f < 7; ++f) m += y(n, c, t, f) / cnt;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t f = 0; f < 7; ++f) v += (y(n, c, t, f) - m) * (y(n, c, t, f) - m) / cnt;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-5);  // eps = 1e-5 inside the square root
  }
}

TEST(BatchNormTest, EvalUsesRunningStatistics) {
  Rng rng(11);
  ModelParams<double> p;
  const BatchNorm2d<double> bn(p, "bn", 2);
  p.at("bn.gamma").value = {2.0, 0.5};
  p.at("bn.beta").value = {1.0, -1.0};
  p.at("bn.running_mean").value = {0.3, -0.2};
  p.at("bn.running_var").value = {4.0, 0.25};
  const auto x = random_tensor<double>({1, 2, 3, 4}, rng);
  const auto y = bn.forward(p, x, Mode::kEval);
  EXPECT_EQ(y.vec(), bn.forward(p, x, Mode::kEval).vec());
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t t = 0; t < 3; ++t)
      for (std::size_t f = 0; f < 4; ++f) {
        const double g = p.at("bn.gamma").value[c], b = p.at("bn.beta").value[c];
        const double m = p.at("bn.running_mean").value[c], v = p.at("bn.running_var").value[c];
        EXPECT_NEAR(y(0, c, t, f), g * (x(0, c, t, f) - m) / std::sqrt(v + 1e-5) + b, 1e-12);
      }
}

TEST(BatchNormTest, RunningAverageUpdate) {
  Rng rng(12);
  ModelParams<double> p;
  const BatchNorm2d<double> bn(p, "bn", 1);
  Tensor<double> x({1, 1, 2, 2});
  x.vec() = {1.0, 2.0, 3.0, 6.0};
  BnCache<double> cache;
  bn.forward(p, x, Mode::kTrain, &cache);
  bn.update_running(p, cache);
  // mean 3, unbiased variance 14/3
  EXPECT_NEAR(p.at("bn.running_mean").value[0], 0.1 * 3.0, 1e-12);
  EXPECT_NEAR(p.at("bn.running_var").value[0], 0.9 + 0.1 * 14.0 / 3.0, 1e-12);
}

TEST(BatchNormTest, StandardizedInputPassesThrough) {
  ModelParams<double> p;
  const BatchNorm2d<double> bn(p, "bn", 1);
  Tensor<double> x({1, 1, 1, 4});
  x.vec() = {-1.0, -1.0, 1.0, 1.0};
  const auto y = bn.forward(p, x, Mode::kTrain);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(y.vec()[k], x.vec()[k], 1e-5);
}

TEST(PReluTest, Definition) {
  ModelParams<double> p;
  const PRelu<double> act(p, "a", 1);
  Tensor<double> x({1, 1, 1, 3});
  x.vec() = {-1.0, 2.0, 0.0};
  const auto y = act.forward(p, x);
  EXPECT_DOUBLE_EQ(y.vec()[0], -0.25);
  EXPECT_DOUBLE_EQ(y.vec()[1], 2.0);
  EXPECT_DOUBLE_EQ(y.vec()[2], 0.0);
}

TEST(PReluTest, PerChannelSlopes) {
  ModelParams<double> p;
  const PRelu<double> act(p, "a", 2);
  p.at("a.slope").value = {0.1, 0.5};
  Tensor<double> x({1, 2, 1, 2}, -2.0);
  const auto y = act.forward(p, x);
  EXPECT_DOUBLE_EQ(y(0, 0, 0, 1), -0.2);
  EXPECT_DOUBLE_EQ(y(0, 1, 0, 0), -1.0);
}

TEST(ActivationTest, SigmoidAndTanh) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_DOUBLE_EQ(std::tanh(0.0), 0.0);
  // d/dx sum(sigmoid(x)) at 0 is 1/4
  const double h = 1e-6;
  EXPECT_NEAR((sigmoid(h) - sigmoid(-h)) / (2 * h), 0.25, 1e-9);
  EXPECT_GE(sigmoid(-800.0), 0.0);
  EXPECT_LE(sigmoid(800.0), 1.0);
  EXPECT_TRUE(std::isfinite(sigmoid(-800.0f)));
}

TEST(LayerNormTest, RowsStandardized) {
  Rng rng(13);
  ModelParams<double> p;
  const LayerNorm<double> ln(p, "ln", 6);
  std::vector<double> x(4 * 6), y(x.size());
  for (auto& v : x) v = 3.0 * rng.normal() + 1.0;
  ln.forward(p, x, y);
  for (std::size_t r = 0; r < 4; ++r) {
    double m = 0.0, v = 0.0;
    for (std::size_t k = 0; k < 6; ++k) m += y[r * 6 + k] / 6.0;
    for (std::size_t k = 0; k < 6; ++k) v += (y[r * 6 + k] - m) * (y[r * 6 + k] - m) / 6.0;
    EXPECT_NEAR(m, 0.0, 1e-6);
    EXPECT_NEAR(v, 1.0, 1e-5);
  }
}

TEST(TrailingFramesTest, ConcatenatesHistory) {
  Tensor<double> hist({1, 1, 2, 1});
  hist.vec() = {1.0, 2.0};
  Tensor<double> x({1, 1, 1, 1});
  x.vec() = {3.0};
  EXPECT_EQ(trailing_frames(x, &hist, 2).vec(), (std::vector<double>{2.0, 3.0}));
  EXPECT_EQ(trailing_frames(x, static_cast<const Tensor<double>*>(nullptr), 2).vec(),
            (std::vector<double>{0.0, 3.0}));
}

// ---------------------------------------------------------------------------
// Recurrent layers

double sig(double v) { return 1.0 / (1.0 + std::exp(-v)); }

// Straight-line recurrence, independent of the batched implementation.
std::vector<double> gru_oracle(const ModelParams<double>& p, const std::string& pre,
                               const Sequence<double>& x, std::size_t lane, std::size_t H,
                               bool reverse) {
  const auto& wi = p.at(pre + ".w_ih").value;
  const auto& wh = p.at(pre + ".w_hh").value;
  const auto& bi = p.at(pre + ".b_ih").value;
  const auto& bh = p.at(pre + ".b_hh").value;
  const std::size_t I = x.width, S = x.steps;
  std::vector<double> h(H, 0.0), out(S * H);
  for (std::size_t s = 0; s < S; ++s) {
    const std::size_t step = reverse ? S - 1 - s : s;
    const double* xv = x.row(lane, step);
    std::vector<double> hn(H);
    for (std::size_t j = 0; j < H; ++j) {
      double ar = bi[j] + bh[j], az = bi[H + j] + bh[H + j], an_i = bi[2 * H + j],
             an_h = bh[2 * H + j];
      for (std::size_t k = 0; k < I; ++k) {
        ar += wi[j * I + k] * xv[k];
        az += wi[(H + j) * I + k] * xv[k];
        an_i += wi[(2 * H + j) * I + k] * xv[k];
      }
      for (std::size_t k = 0; k < H; ++k) {
        ar += wh[j * H + k] * h[k];
        az += wh[(H + j) * H + k] * h[k];
        an_h += wh[(2 * H + j) * H + k] * h[k];
      }
      const double r = sig(ar), z = sig(az), n = std::tanh(an_i + r * an_h);
      hn[j] = (1.0 - z) * n + z * h[j];
    }
    h = hn;
    std::copy(h.begin(), h.end(), out.begin() + static_cast<long>(step * H));
  }
  return out;
}

Sequence<double> random_sequence(std::size_t l, std::size_t s, std::size_t w, Rng& rng) {
  Sequence<double> x(l, s, w);
  for (auto& v : x.data) v = rng.normal();
  return x;
}

TEST(GruTest, MatchesStraightLineRecurrence) {
  Rng rng(14);
  ModelParams<double> p;
  const Gru<double> gru(p, "g", 3, 4, rng);
  testing::randomize(p, rng, 0.6);
  const auto x = random_sequence(2, 5, 3, rng);
  for (bool reverse : {false, true}) {
    const auto y = gru.forward(p, x, nullptr, nullptr, nullptr, reverse);
    for (std::size_t lane = 0; lane < 2; ++lane) {
      const auto ref = gru_oracle(p, "g", x, lane, 4, reverse);
      for (std::size_t s = 0; s < 5; ++s)
        for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(y.row(lane, s)[j], ref[s * 4 + j], 1e-12);
    }
  }
}

TEST(GruTest, ZeroFixedPoint) {
  Rng rng(15);
  ModelParams<double> p;
  const Gru<double> gru(p, "g", 3, 4, rng);
  for (auto name : {"g.b_ih", "g.b_hh"})
    std::fill(p.at(name).value.begin(), p.at(name).value.end(), 0.0);
  const auto y = gru.forward(p, Sequence<double>(2, 6, 3));
  for (double v : y.data) EXPECT_EQ(v, 0.0);
}

TEST(GruTest, StepwiseCallsMatchOneCall) {
  Rng rng(16);
  ModelParams<double> p;
  const Gru<double> gru(p, "g", 3, 5, rng);
  const auto x = random_sequence(1, 10, 3, rng);
  const auto whole = gru.forward(p, x);
  std::vector<double> h(5, 0.0), h_next(5);
  for (std::size_t s = 0; s < 10; ++s) {
    Sequence<double> xs(1, 1, 3);
    std::copy_n(x.row(0, s), 3, xs.data.begin());
    const auto ys = gru.forward(p, xs, h.data(), h_next.data());
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(ys.data[j], whole.row(0, s)[j], 1e-13);
    h = h_next;
  }
}

TEST(GruTest, WrongWidthThrows) {
  Rng rng(17);
  ModelParams<double> p;
  const Gru<double> gru(p, "g", 3, 2, rng);
  EXPECT_THROW(gru.forward(p, Sequence<double>(1, 2, 4)), ShapeError);
}

TEST(BiGruTest, SumOfTwoDirections) {
  Rng rng(18);
  ModelParams<double> p;
  const BiGru<double> bigru(p, "b", 3, 4, rng);
  const auto x = random_sequence(3, 6, 3, rng);
  const auto y = bigru.forward(p, x);
  for (std::size_t lane = 0; lane < 3; ++lane) {
    const auto f = gru_oracle(p, "b.fwd", x, lane, 4, false);
    const auto b = gru_oracle(p, "b.bwd", x, lane, 4, true);
    for (std::size_t s = 0; s < 6; ++s)
      for (std::size_t j = 0; j < 4; ++j)
        EXPECT_NEAR(y.row(lane, s)[j], f[s * 4 + j] + b[s * 4 + j], 1e-12);
  }
}

TEST(BiGruTest, PalindromeWithTiedWeights) {
  Rng rng(19);
  ModelParams<double> p;
  const BiGru<double> bigru(p, "b", 2, 3, rng);
  for (auto name : {"w_ih", "w_hh", "b_ih", "b_hh"})
    p.at(std::string("b.bwd.") + name).value = p.at(std::string("b.fwd.") + name).value;
  Sequence<double> x(1, 7, 2);
  for (std::size_t s = 0; s < 4; ++s)
    for (std::size_t k = 0; k < 2; ++k) {
      const double v = rng.normal();
      x.row(0, s)[k] = v;
      x.row(0, 6 - s)[k] = v;
    }
  const auto y = bigru.forward(p, x);
  for (std::size_t s = 0; s < 7; ++s)
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(y.row(0, s)[j], y.row(0, 6 - s)[j], 1e-14);
}

TEST(BiGruTest, ZeroInputZeroBiases) {
  Rng rng(20);
  ModelParams<double> p;
  const BiGru<double> bigru(p, "b", 2, 3, rng);
  for (auto& e : p)
    if (e.name.find(".b_") != std::string::npos) std::fill(e.value.begin(), e.value.end(), 0.0);
  for (double v : bigru.forward(p, Sequence<double>(2, 5, 2)).data) EXPECT_EQ(v, 0.0);
}

}  // namespace
}  // namespace mpcrn
