// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/loss.h"

#include <cmath>
#include <string>

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

void check(const ComplexSpectrogram& a, const ComplexSpectrogram& b, const char* what) {
  if (a.real.rows() != b.real.rows() || a.real.cols() != b.real.cols() ||
      a.imag.rows() != a.real.rows() || a.imag.cols() != a.real.cols() ||
      b.imag.rows() != b.real.rows() || b.imag.cols() != b.real.cols())
    throw ShapeError(std::string(what) + ": spectra differ in shape (" +
                     std::to_string(a.real.rows()) + "x" + std::to_string(a.real.cols()) +
                     " vs " + std::to_string(b.real.rows()) + "x" +
                     std::to_string(b.real.cols()) + ")");
  if (a.real.size() == 0) throw ShapeError(std::string(what) + ": empty spectra");
}

Plane stable_magnitude(const ComplexSpectrogram& s) {
  return (s.real.square() + s.imag.square() + kLossEpsilon).sqrt();
}

}  // namespace

void LossWeights::validate() const {
  if (!(alpha_mag >= 0.0) || !(alpha_ri >= 0.0) || !std::isfinite(alpha_mag) ||
      !std::isfinite(alpha_ri))
    throw InvalidInput("loss weights must be finite and non-negative");
}

double loss_mag(const ComplexSpectrogram& s_hat, const ComplexSpectrogram& s) {
  check(s_hat, s, "loss_mag");
  return (stable_magnitude(s_hat) - stable_magnitude(s)).square().mean();
}

double loss_ri(const ComplexSpectrogram& s_hat, const ComplexSpectrogram& s) {
  check(s_hat, s, "loss_ri");
  return (s_hat.real - s.real).square().mean() + (s_hat.imag - s.imag).square().mean();
}

double loss_total(const ComplexSpectrogram& s_hat, const ComplexSpectrogram& s,
                  const LossWeights& w) {
  w.validate();
  return w.alpha_mag * loss_mag(s_hat, s) + w.alpha_ri * loss_ri(s_hat, s);
}

LossValue loss_total_grad(const ComplexSpectrogram& s_hat, const ComplexSpectrogram& s,
                          const LossWeights& w) {
  w.validate();
  check(s_hat, s, "loss_total_grad");
  const double count = static_cast<double>(s.real.size());
  const Plane a = stable_magnitude(s_hat);
  const Plane diff = a - stable_magnitude(s);
  const Plane er = s_hat.real - s.real;
  const Plane ei = s_hat.imag - s.imag;

  LossValue out;
  out.value = w.alpha_mag * diff.square().mean() +
              w.alpha_ri * (er.square().mean() + ei.square().mean());
  const Plane radial = (2.0 * w.alpha_mag / count) * diff / a;
  out.d_real = radial * s_hat.real + (2.0 * w.alpha_ri / count) * er;
  out.d_imag = radial * s_hat.imag + (2.0 * w.alpha_ri / count) * ei;
  return out;
}

}  // namespace mpcrn
