// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <string>
#include <string_view>
#include <utility>

#include "mpcrn/dsp.h"
#include "mpcrn/mask.h"

namespace mpcrn {

// kPolar consumes a MaskTriple; kR, kC and kE consume a CartesianMask.
enum class ReconstructionMode { kPolar, kR, kC, kE };

std::string_view mode_name(ReconstructionMode mode);
// Accepts "polar", "r", "c", "e" (case-insensitive). Throws InvalidInput.
ReconstructionMode parse_mode(std::string_view text);

// Pairs whose norm is at or below this map to (1, 0).
inline constexpr double kTriangleEpsilon = 1e-12;

// Scales (pr, pi) to unit modulus.
std::pair<double, double> triangle_correct(double pr, double pi);
std::pair<Plane, Plane> triangle_correct(const Plane& pr, const Plane& pi);

// Mask of ones with phase factor (1, 0).
MaskTriple identity_mask(std::size_t frames, std::size_t bins);

struct PhasePlanes {
  Plane cos_phase;
  Plane sin_phase;
};

// cos/sin of the enhanced phase: the noisy phase rotated by the corrected
// phase mask.
PhasePlanes enhanced_phase(const MaskTriple& mask, const ComplexSpectrogram& x);

// |S| = mag_mask * |X| with the phase of X rotated by the corrected phase mask.
// Evaluated as mag_mask * (tcpr + j tcpi) * X, which equals the polar form and
// is exact for the identity mask.
ComplexSpectrogram reconstruct_polar(const MaskTriple& mask, const ComplexSpectrogram& x);

// R: (Mr Xr) + j (Mi Xi)
// C: M * X
// E: |X| |M| exp(j (angle(X) + atan2(Mi, Mr)))
ComplexSpectrogram reconstruct_cartesian(ReconstructionMode mode, const CartesianMask& mask,
                                         const ComplexSpectrogram& x);

// Gradients of a scalar loss with respect to the mask planes, given its
// gradient (d_real, d_imag) with respect to the reconstructed spectrum.
MaskTriple reconstruct_polar_backward(const MaskTriple& mask, const ComplexSpectrogram& x,
                                      const Plane& d_real, const Plane& d_imag);
CartesianMask reconstruct_cartesian_backward(ReconstructionMode mode, const CartesianMask& mask,
                                             const ComplexSpectrogram& x, const Plane& d_real,
                                             const Plane& d_imag);

}  // namespace mpcrn
