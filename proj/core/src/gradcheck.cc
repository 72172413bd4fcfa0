// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/gradcheck.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "mpcrn/error.h"
#include "mpcrn/layers.h"
#include "mpcrn/loss.h"
#include "mpcrn/model.h"
#include "mpcrn/pipeline.h"
#include "mpcrn/reconstruction.h"

namespace mpcrn {
namespace {

using Vec = AlignedVector<double>;

double dot(const Vec& a, const Vec& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec randn(std::size_t n, Rng& rng) {
  Vec v(n);
  for (auto& x : v) x = rng.normal();
  return v;
}

// Values bounded away from zero, for inputs that feed a PReLU kink.
Vec away_from_zero(std::size_t n, Rng& rng) {
  Vec v(n);
  for (auto& x : v) x = (rng.uniform() < 0.5 ? -1.0 : 1.0) * rng.uniform(0.1, 1.5);
  return v;
}

std::string dims(std::initializer_list<std::size_t> d) {
  std::string s = "(";
  for (auto it = d.begin(); it != d.end(); ++it) {
    if (it != d.begin()) s += ",";
    s += std::to_string(*it);
  }
  return s + ")";
}

// Projects forward() onto a random direction and checks the input gradient
// returned by analytic() plus every trainable parameter gradient.
void check_module(GradcheckResult& res, ModelParams<double>& p, Vec& x,
                  const std::function<Vec()>& forward,
                  const std::function<Vec(const Vec& dy)>& analytic,
                  const GradcheckOptions& opt, Rng& rng) {
  const Vec r = randn(forward().size(), rng);
  p.zero_grad();
  const Vec dx = analytic(r);
  std::vector<Vec> grads;
  for (const auto& prm : p) grads.push_back(prm.grad);
  const auto f = [&] { return dot(forward(), r); };
  if (!x.empty()) check_entries("input", x, dx, f, opt, rng, res);
  std::size_t k = 0;
  for (auto& prm : p) {
    const Vec& g = grads[k++];
    if (prm.trainable) check_entries(prm.name, prm.value, g, f, opt, rng, res);
  }
}

Tensor<double> as_tensor(const Shape4& s, const Vec& v) {
  Tensor<double> t(s);
  t.vec() = v;
  return t;
}

GradcheckResult conv_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  struct Case { std::size_t n, cin, t, f, cout, kf, kt, stride, pad; bool history; };
  static const Case cases[] = {{1, 2, 3, 9, 3, 5, 2, 2, 2, false},
                               {2, 3, 4, 7, 2, 3, 2, 1, 1, true},
                               {1, 1, 5, 12, 4, 5, 2, 2, 2, true},
                               {2, 2, 3, 6, 2, 1, 1, 1, 0, false}};
  const Case& c = cases[i % std::size(cases)];
  GradcheckResult res{"conv2d_causal", dims({c.n, c.cin, c.t, c.f}) + "->" + std::to_string(c.cout)};
  ModelParams<double> p;
  const Conv2dCausal<double> conv(p, "conv", ConvSpec{c.cin, c.cout, c.kf, c.kt, c.stride, c.pad},
                                  rng);
  for (auto& prm : p)
    for (auto& v : prm.value) v = rng.normal() * 0.5;
  const Shape4 s{c.n, c.cin, c.t, c.f};
  Vec x = randn(s.size(), rng);
  Tensor<double> hist;
  if (c.history && c.kt > 1) hist = as_tensor({c.n, c.cin, c.kt - 1, c.f}, randn(c.n * c.cin * (c.kt - 1) * c.f, rng));
  const Tensor<double>* h = hist.empty() ? nullptr : &hist;
  check_module(
      res, p, x, [&] { return conv.forward(p, as_tensor(s, x), h).vec(); },
      [&](const Vec& dy) {
        ConvCache<double> cache;
        const auto y = conv.forward(p, as_tensor(s, x), h, &cache);
        return conv.backward(p, cache, as_tensor(y.shape(), dy)).vec();
      },
      opt, rng);
  return res;
}

GradcheckResult tconv_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  struct Case { std::size_t n, cin, t, fin, cout, out_f; bool history; };
  static const Case cases[] = {{1, 3, 3, 5, 2, 9, false},
                               {2, 2, 4, 4, 3, 8, true},
                               {1, 4, 2, 9, 2, 17, true}};
  const Case& c = cases[i % std::size(cases)];
  GradcheckResult res{"tconv2d_causal",
                      dims({c.n, c.cin, c.t, c.fin}) + "->" + dims({c.cout, c.out_f})};
  ModelParams<double> p;
  const TConv2dCausal<double> tconv(p, "tconv", TConvSpec{ConvSpec{c.cin, c.cout}, c.out_f}, rng);
  for (auto& prm : p)
    for (auto& v : prm.value) v = rng.normal() * 0.5;
  const Shape4 s{c.n, c.cin, c.t, c.fin};
  Vec x = randn(s.size(), rng);
  Tensor<double> hist;
  if (c.history) hist = as_tensor({c.n, c.cin, 1, c.fin}, randn(c.n * c.cin * c.fin, rng));
  const Tensor<double>* h = hist.empty() ? nullptr : &hist;
  check_module(
      res, p, x, [&] { return tconv.forward(p, as_tensor(s, x), h).vec(); },
      [&](const Vec& dy) {
        TConvCache<double> cache;
        const auto y = tconv.forward(p, as_tensor(s, x), h, &cache);
        return tconv.backward(p, cache, as_tensor(y.shape(), dy)).vec();
      },
      opt, rng);
  return res;
}

GradcheckResult bn_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  static const Shape4 cases[] = {{2, 3, 4, 5}, {1, 2, 6, 3}, {3, 4, 2, 2}};
  const Shape4 s = cases[i % std::size(cases)];
  GradcheckResult res{"batchnorm", s.str()};
  ModelParams<double> p;
  const BatchNorm2d<double> bn(p, "bn", s.c);
  for (auto& prm : p)
    if (prm.trainable)
      for (auto& v : prm.value) v = rng.uniform(0.5, 1.5);
  Vec x = randn(s.size(), rng);
  for (auto& v : x) v = 2.0 * v + 0.3;
  check_module(
      res, p, x, [&] { return bn.forward(p, as_tensor(s, x), Mode::kTrain).vec(); },
      [&](const Vec& dy) {
        BnCache<double> cache;
        bn.forward(p, as_tensor(s, x), Mode::kTrain, &cache);
        return bn.backward(p, cache, as_tensor(s, dy)).vec();
      },
      opt, rng);
  return res;
}

GradcheckResult ln_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  struct Case { std::size_t rows, width; };
  static const Case cases[] = {{6, 4}, {3, 7}, {2, 16}};
  const Case c = cases[i % std::size(cases)];
  GradcheckResult res{"layernorm", dims({c.rows, c.width})};
  ModelParams<double> p;
  const LayerNorm<double> ln(p, "ln", c.width);
  for (auto& prm : p)
    for (auto& v : prm.value) v = rng.uniform(0.5, 1.5);
  Vec x = randn(c.rows * c.width, rng);
  check_module(
      res, p, x,
      [&] {
        Vec y(x.size());
        ln.forward(p, x, y);
        return y;
      },
      [&](const Vec& dy) {
        LnCache<double> cache;
        Vec y(x.size()), dx(x.size());
        ln.forward(p, x, y, &cache);
        ln.backward(p, cache, dy, dx);
        return dx;
      },
      opt, rng);
  return res;
}

GradcheckResult prelu_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  static const Shape4 cases[] = {{1, 3, 2, 4}, {2, 2, 3, 3}, {1, 5, 1, 6}};
  const Shape4 s = cases[i % std::size(cases)];
  GradcheckResult res{"prelu", s.str()};
  ModelParams<double> p;
  const PRelu<double> act(p, "prelu", s.c);
  for (auto& v : p.at("prelu.slope").value) v = rng.uniform(0.05, 0.5);
  Vec x = away_from_zero(s.size(), rng);
  check_module(
      res, p, x, [&] { return act.forward(p, as_tensor(s, x)).vec(); },
      [&](const Vec& dy) {
        PreluCache<double> cache;
        act.forward(p, as_tensor(s, x), &cache);
        return act.backward(p, cache, as_tensor(s, dy)).vec();
      },
      opt, rng);
  return res;
}

Sequence<double> as_seq(std::size_t lanes, std::size_t steps, std::size_t width, const Vec& v) {
  Sequence<double> s(lanes, steps, width);
  s.data = v;
  return s;
}

GradcheckResult gru_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  struct Case { std::size_t lanes, steps, in, hidden; bool reverse; };
  static const Case cases[] = {{2, 4, 3, 5, false}, {3, 3, 4, 2, true}, {1, 6, 2, 3, false}};
  const Case c = cases[i % std::size(cases)];
  GradcheckResult res{"gru", dims({c.lanes, c.steps, c.in}) + " H=" + std::to_string(c.hidden) +
                                 (c.reverse ? " reverse" : "")};
  ModelParams<double> p;
  const Gru<double> gru(p, "gru", c.in, c.hidden, rng);
  for (auto& prm : p)
    for (auto& v : prm.value) v = rng.normal() * 0.5;
  Vec x = randn(c.lanes * c.steps * c.in, rng);
  check_module(
      res, p, x,
      [&] {
        return gru.forward(p, as_seq(c.lanes, c.steps, c.in, x), nullptr, nullptr, nullptr,
                           c.reverse)
            .data;
      },
      [&](const Vec& dy) {
        GruCache<double> cache;
        gru.forward(p, as_seq(c.lanes, c.steps, c.in, x), nullptr, nullptr, &cache, c.reverse);
        return gru.backward(p, cache, as_seq(c.lanes, c.steps, c.hidden, dy)).data;
      },
      opt, rng);
  return res;
}

GradcheckResult bigru_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  struct Case { std::size_t lanes, steps, in, hidden; };
  static const Case cases[] = {{2, 4, 3, 5}, {1, 5, 2, 3}, {3, 3, 4, 4}};
  const Case c = cases[i % std::size(cases)];
  GradcheckResult res{"bigru", dims({c.lanes, c.steps, c.in}) + " H=" + std::to_string(c.hidden)};
  ModelParams<double> p;
  const BiGru<double> bigru(p, "bigru", c.in, c.hidden, rng);
  for (auto& prm : p)
    for (auto& v : prm.value) v = rng.normal() * 0.5;
  Vec x = randn(c.lanes * c.steps * c.in, rng);
  check_module(
      res, p, x, [&] { return bigru.forward(p, as_seq(c.lanes, c.steps, c.in, x)).data; },
      [&](const Vec& dy) {
        BiGruCache<double> cache;
        bigru.forward(p, as_seq(c.lanes, c.steps, c.in, x), &cache);
        return bigru.backward(p, cache, as_seq(c.lanes, c.steps, c.hidden, dy)).data;
      },
      opt, rng);
  return res;
}

ComplexSpectrogram random_spec(std::size_t frames, std::size_t bins, Rng& rng) {
  StftConfig cfg;
  cfg.fft_size = 2 * (bins - 1);
  cfg.win_len = cfg.fft_size;
  cfg.hop = cfg.fft_size / 4;
  ComplexSpectrogram s(frames, cfg);
  for (Eigen::Index k = 0; k < s.real.size(); ++k) {
    s.real.data()[k] = rng.normal();
    s.imag.data()[k] = rng.normal();
  }
  return s;
}

std::span<double> plane_span(Plane& p) { return {p.data(), static_cast<std::size_t>(p.size())}; }
std::span<const double> plane_span(const Plane& p) {
  return {p.data(), static_cast<std::size_t>(p.size())};
}

struct SpecCase { std::size_t frames, bins; };
constexpr SpecCase kSpecCases[] = {{3, 5}, {4, 7}, {2, 9}};

GradcheckResult loss_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  static const LossWeights weights[] = {{1.0, 1.0}, {0.5, 2.0}, {1.0, 0.0}};
  const SpecCase c = kSpecCases[i % std::size(kSpecCases)];
  const LossWeights w = weights[i % std::size(weights)];
  GradcheckResult res{"loss_total", dims({c.frames, c.bins})};
  ComplexSpectrogram s_hat = random_spec(c.frames, c.bins, rng);
  const ComplexSpectrogram s = random_spec(c.frames, c.bins, rng);
  const LossValue lv = loss_total_grad(s_hat, s, w);
  const auto f = [&] { return loss_total(s_hat, s, w); };
  check_entries("s_hat.real", plane_span(s_hat.real), plane_span(lv.d_real), f, opt, rng, res);
  check_entries("s_hat.imag", plane_span(s_hat.imag), plane_span(lv.d_imag), f, opt, rng, res);
  return res;
}

GradcheckResult polar_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  const SpecCase c = kSpecCases[i % std::size(kSpecCases)];
  GradcheckResult res{"loss_total_polar", dims({c.frames, c.bins})};
  const ComplexSpectrogram x = random_spec(c.frames, c.bins, rng);
  const ComplexSpectrogram s = random_spec(c.frames, c.bins, rng);
  MaskTriple m;
  m.mag_mask = Plane(c.frames, c.bins);
  m.cirm_real = Plane(c.frames, c.bins);
  m.cirm_imag = Plane(c.frames, c.bins);
  for (Eigen::Index k = 0; k < m.mag_mask.size(); ++k) {
    m.mag_mask.data()[k] = rng.uniform(0.05, 0.95);
    m.cirm_real.data()[k] = rng.uniform(-1, 1);
    m.cirm_imag.data()[k] = rng.uniform(-1, 1);
  }
  const ComplexSpectrogram s_hat = reconstruct_polar(m, x);
  const LossValue lv = loss_total_grad(s_hat, s);
  const MaskTriple g = reconstruct_polar_backward(m, x, lv.d_real, lv.d_imag);
  const auto f = [&] { return loss_total(reconstruct_polar(m, x), s); };
  check_entries("mag_mask", plane_span(m.mag_mask), plane_span(g.mag_mask), f, opt, rng, res);
  check_entries("cirm_real", plane_span(m.cirm_real), plane_span(g.cirm_real), f, opt, rng, res);
  check_entries("cirm_imag", plane_span(m.cirm_imag), plane_span(g.cirm_imag), f, opt, rng, res);
  return res;
}

GradcheckResult cartesian_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  static const ReconstructionMode modes[] = {ReconstructionMode::kR, ReconstructionMode::kC,
                                             ReconstructionMode::kE};
  const SpecCase c = kSpecCases[i % std::size(kSpecCases)];
  const ReconstructionMode mode = modes[i % std::size(modes)];
  GradcheckResult res{"reconstruct_cartesian",
                      dims({c.frames, c.bins}) + " mode=" + std::string(mode_name(mode))};
  const ComplexSpectrogram x = random_spec(c.frames, c.bins, rng);
  const ComplexSpectrogram s = random_spec(c.frames, c.bins, rng);
  CartesianMask m{Plane(c.frames, c.bins), Plane(c.frames, c.bins)};
  for (Eigen::Index k = 0; k < m.real.size(); ++k) {
    m.real.data()[k] = rng.uniform(-1, 1);
    m.imag.data()[k] = rng.uniform(-1, 1);
  }
  const LossValue lv = loss_total_grad(reconstruct_cartesian(mode, m, x), s);
  const CartesianMask g = reconstruct_cartesian_backward(mode, m, x, lv.d_real, lv.d_imag);
  const auto f = [&] { return loss_total(reconstruct_cartesian(mode, m, x), s); };
  check_entries("mask.real", plane_span(m.real), plane_span(g.real), f, opt, rng, res);
  check_entries("mask.imag", plane_span(m.imag), plane_span(g.imag), f, opt, rng, res);
  return res;
}

// Whole network in train mode, through polar reconstruction and the loss.
// PReLU slopes start at 1 so that no finite-difference step straddles a kink;
// the slope gradients are still exercised.
GradcheckResult model_case(std::size_t i, const GradcheckOptions& opt, Rng& rng) {
  struct Case { std::size_t n, frames, bins; };
  static const Case cases[] = {{2, 4, 33}, {1, 5, 17}, {3, 3, 33}};
  const Case c = cases[i % std::size(cases)];
  ModelConfig cfg;
  cfg.enc_channels = {3, 4, 4, 4, 4};
  cfg.dec_channels = {4, 4, 4, 3, 3};
  cfg.psm_hidden = {3, 3};
  cfg.freq_bins = c.bins;
  if (c.bins < 33) {
    cfg.enc_channels = {3, 4, 4};
    cfg.dec_channels = {4, 4, 3};
  }
  GradcheckResult res{"model", dims({c.n, 2, c.frames, c.bins})};
  ModelParams<double> p;
  const Mpcrn<double> model(cfg, p, rng.next_u64());
  for (auto& prm : p)
    if (prm.name.ends_with(".slope")) std::fill(prm.value.begin(), prm.value.end(), 1.0);
  std::vector<ComplexSpectrogram> xs, ss;
  Tensor<double> input({c.n, 2, c.frames, c.bins});
  for (std::size_t b = 0; b < c.n; ++b) {
    xs.push_back(random_spec(c.frames, c.bins, rng));
    ss.push_back(random_spec(c.frames, c.bins, rng));
    for (std::size_t t = 0; t < c.frames; ++t)
      for (std::size_t f = 0; f < c.bins; ++f) {
        input(b, 0, t, f) = xs[b].real(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f));
        input(b, 1, t, f) = xs[b].imag(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f));
      }
  }
  const auto loss = [&] {
    const auto out = model.forward(p, input, Mode::kTrain);
    double l = 0.0;
    for (std::size_t b = 0; b < c.n; ++b)
      l += loss_total(apply_reconstruction(out, b, ReconstructionMode::kPolar, xs[b]), ss[b]);
    return l / static_cast<double>(c.n);
  };
  ModelTape<double> tape;
  const auto out = model.forward(p, input, Mode::kTrain, &tape);
  Tensor<double> d_out(out.shape());
  for (std::size_t b = 0; b < c.n; ++b) {
    const MaskTriple m = mask_triple(out, b);
    LossValue lv = loss_total_grad(reconstruct_polar(m, xs[b]), ss[b]);
    lv.d_real /= static_cast<double>(c.n);
    lv.d_imag /= static_cast<double>(c.n);
    const MaskTriple g = reconstruct_polar_backward(m, xs[b], lv.d_real, lv.d_imag);
    const Plane* planes[] = {&g.mag_mask, &g.cirm_real, &g.cirm_imag};
    for (std::size_t ch = 0; ch < 3; ++ch)
      std::copy(planes[ch]->data(), planes[ch]->data() + planes[ch]->size(), d_out.plane(b, ch));
  }
  p.zero_grad();
  model.backward(p, tape, d_out);
  GradcheckOptions sub = opt;
  sub.max_entries = std::min<std::size_t>(opt.max_entries, 6);
  // The composed loss is strongly curved in a few weights; Ridders' scheme
  // adapts the step per entry.
  sub.ridders = true;
  for (auto& prm : p) {
    if (!prm.trainable) continue;
    const Vec g = prm.grad;
    // Train-mode batch norm subtracts the batch mean, so a per-channel shift
    // that reaches it through affine maps only (conv biases, and with unit
    // PReLU slopes the PSM LayerNorm offsets) has exactly zero gradient; a
    // finite difference there only measures roundoff.
    if (prm.name.ends_with("conv.bias") || prm.name.ends_with("_ln.beta")) {
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double err = relative_error(g[k], 0.0);
        ++res.checked;
        if (!(err <= res.max_rel_err)) {
          res.max_rel_err = err;
          res.worst = prm.name + "[" + std::to_string(k) + "]";
        }
      }
      continue;
    }
    check_entries(prm.name, prm.value, g, loss, sub, rng, res);
  }
  res.passed = res.max_rel_err < opt.tolerance;
  return res;
}

std::uint64_t fnv1a(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : s) h = (h ^ static_cast<unsigned char>(c)) * 0x100000001b3ULL;
  return h;
}

using CaseFn = GradcheckResult (*)(std::size_t, const GradcheckOptions&, Rng&);

const std::vector<std::pair<std::string, CaseFn>>& registry() {
  static const std::vector<std::pair<std::string, CaseFn>> r = {
      {"conv2d_causal", conv_case},   {"tconv2d_causal", tconv_case},
      {"batchnorm", bn_case},         {"layernorm", ln_case},
      {"prelu", prelu_case},          {"gru", gru_case},
      {"bigru", bigru_case},          {"loss_total", loss_case},
      {"loss_total_polar", polar_case}, {"reconstruct_cartesian", cartesian_case},
      {"model", model_case}};
  return r;
}

}  // namespace

namespace {

// Ridders' extrapolation of central differences over steps h, h/1.4, ...
// Returns the tableau entry with the smallest error estimate, and that estimate.
std::pair<double, double> ridders(const std::function<double(double)>& central, double h) {
  constexpr int kTab = 10;
  constexpr double kCon = 1.4, kCon2 = kCon * kCon, kSafe = 2.0;
  double a[kTab][kTab];
  a[0][0] = central(h);
  double best = a[0][0], err = std::numeric_limits<double>::infinity();
  for (int i = 1; i < kTab; ++i) {
    h /= kCon;
    a[0][i] = central(h);
    double fac = kCon2;
    for (int j = 1; j <= i; ++j) {
      a[j][i] = (a[j - 1][i] * fac - a[j - 1][i - 1]) / (fac - 1.0);
      fac *= kCon2;
      const double e = std::max(std::abs(a[j][i] - a[j - 1][i]), std::abs(a[j][i] - a[j - 1][i - 1]));
      if (e <= err) {
        err = e;
        best = a[j][i];
      }
    }
    if (std::abs(a[i][i] - a[i - 1][i - 1]) >= kSafe * err) break;
  }
  return {best, err};
}

// Tiny gradients need a large first step to rise above roundoff and strongly
// curved directions a small one, so three decades are tried.
double ridders_multi(const std::function<double(double)>& central, double h) {
  std::pair<double, double> best{0.0, std::numeric_limits<double>::infinity()};
  for (const double scale : {10.0, 1.0, 0.1}) {
    const auto r = ridders(central, scale * h);
    if (r.second < best.second) best = r;
  }
  return best.first;
}

}  // namespace

double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / denom;
}

void check_entries(std::string_view tensor, std::span<double> x,
                   std::span<const double> analytic, const std::function<double()>& f,
                   const GradcheckOptions& opt, Rng& rng, GradcheckResult& result) {
  if (x.size() != analytic.size())
    throw ShapeError("gradcheck: gradient size mismatch for " + std::string(tensor));
  std::vector<std::size_t> idx(x.size());
  std::iota(idx.begin(), idx.end(), 0);
  if (idx.size() > opt.max_entries) {
    for (std::size_t k = 0; k < opt.max_entries; ++k)
      std::swap(idx[k], idx[k + rng.below(idx.size() - k)]);
    idx.resize(opt.max_entries);
  }
  for (auto i : idx) {
    const double orig = x[i];
    const auto central = [&](double h) {
      x[i] = orig + h;
      const double fp = f();
      x[i] = orig - h;
      const double fm = f();
      x[i] = orig;
      return (fp - fm) / (2.0 * h);
    };
    const double numeric = opt.ridders ? ridders_multi(central, opt.step) : central(opt.step);
    const double err = relative_error(analytic[i], numeric);
    ++result.checked;
    if (!(err <= result.max_rel_err)) {
      result.max_rel_err = err;
      result.worst = std::string(tensor) + "[" + std::to_string(i) + "]";
    }
  }
  result.passed = result.max_rel_err < opt.tolerance;
}

const std::vector<std::string>& gradcheck_layers() {
  static const std::vector<std::string> names = [] {
    std::vector<std::string> n;
    for (const auto& [name, fn] : registry()) n.push_back(name);
    return n;
  }();
  return names;
}

std::vector<GradcheckResult> gradcheck_layer(std::string_view layer, const GradcheckOptions& opt) {
  for (const auto& [name, fn] : registry()) {
    if (name != layer) continue;
    Rng rng(opt.seed ^ fnv1a(name));
    std::vector<GradcheckResult> out;
    for (std::size_t i = 0; i < opt.shapes; ++i) {
      GradcheckResult r = fn(i, opt, rng);
      r.passed = r.checked > 0 && r.max_rel_err < opt.tolerance;
      out.push_back(std::move(r));
    }
    return out;
  }
  throw InvalidInput("gradcheck: unknown layer '" + std::string(layer) + "'");
}

std::vector<GradcheckResult> gradcheck_all(const GradcheckOptions& opt) {
  std::vector<GradcheckResult> out;
  for (const auto& name : gradcheck_layers()) {
    auto r = gradcheck_layer(name, opt);
    out.insert(out.end(), r.begin(), r.end());
  }
  return out;
}

}  // namespace mpcrn
