// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>

#include "mpcrn/dsp.h"

namespace mpcrn {

inline constexpr double kSiSdrCap = 100.0;

// Scale-invariant SDR in dB: the estimate is projected onto the reference,
// target = a*reference, residual = estimate - target. Clamped to
// [-kSiSdrCap, kSiSdrCap]. No mean removal.
// Throws InvalidInput on length mismatch, empty or all-zero reference.
double si_sdr(std::span<const double> estimate, std::span<const double> reference);
double si_sdr(const Waveform& estimate, const Waveform& reference);

struct SegSnrOptions {
  std::size_t frame_len = 512;
  double floor_db = -10.0;
  double ceil_db = 35.0;
  // Frames whose reference mean power is at or below this are skipped.
  double silence_power = 1e-10;
};

// Mean over non-silent reference frames (non-overlapping) of the per-frame SNR
// clamped to [floor_db, ceil_db]. Throws InvalidInput when every frame is silent.
double seg_snr(std::span<const double> estimate, std::span<const double> reference,
               const SegSnrOptions& opt = {});
double seg_snr(const Waveform& estimate, const Waveform& reference,
               const SegSnrOptions& opt = {});

// 10 log10(P_signal / P_noise).
double snr_db(std::span<const double> signal, std::span<const double> noise);

}  // namespace mpcrn
