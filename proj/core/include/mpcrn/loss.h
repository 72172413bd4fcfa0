// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Spectral training losses. All reductions are means over (frame, bin).

#pragma once

#include "mpcrn/dsp.h"

namespace mpcrn {

// Added inside the magnitude square root so the loss is differentiable at 0.
inline constexpr double kLossEpsilon = 1e-12;

struct LossWeights {
  double alpha_mag = 1.0;
  double alpha_ri = 1.0;

  // Throws InvalidInput on negative or non-finite weights.
  void validate() const;
};

// mean (|S_hat| - |S|)^2
double loss_mag(const ComplexSpectrogram& s_hat, const ComplexSpectrogram& s);
// mean (S_hat_r - S_r)^2 + mean (S_hat_i - S_i)^2
double loss_ri(const ComplexSpectrogram& s_hat, const ComplexSpectrogram& s);
double loss_total(const ComplexSpectrogram& s_hat, const ComplexSpectrogram& s,
                  const LossWeights& w = {});

struct LossValue {
  double value = 0.0;
  Plane d_real;  // d loss / d S_hat_r
  Plane d_imag;
};

LossValue loss_total_grad(const ComplexSpectrogram& s_hat, const ComplexSpectrogram& s,
                          const LossWeights& w = {});

}  // namespace mpcrn
