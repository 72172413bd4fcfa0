// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

void check_lengths(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw InvalidInput(std::string(what) + ": length mismatch (" + std::to_string(a) + " vs " +
                       std::to_string(b) + ")");
  if (a == 0) throw InvalidInput(std::string(what) + ": empty signals");
}

double ratio_db(double num, double den, double lo, double hi) {
  if (den <= 0.0) return hi;
  if (num <= 0.0) return lo;
  return std::clamp(10.0 * std::log10(num / den), lo, hi);
}

}  // namespace

double si_sdr(std::span<const double> estimate, std::span<const double> reference) {
  check_lengths(estimate.size(), reference.size(), "si_sdr");
  double ref_energy = 0.0, dot = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    ref_energy += reference[i] * reference[i];
    dot += estimate[i] * reference[i];
  }
  if (ref_energy == 0.0) throw InvalidInput("si_sdr: reference is all zeros");
  const double a = dot / ref_energy;
  double target = 0.0, residual = 0.0;
  for (std::size_t i = 0; i < reference.size(); ++i) {
    const double t = a * reference[i];
    const double r = estimate[i] - t;
    target += t * t;
    residual += r * r;
  }
  return ratio_db(target, residual, -kSiSdrCap, kSiSdrCap);
}

double si_sdr(const Waveform& estimate, const Waveform& reference) {
  return si_sdr(std::span<const double>(estimate.samples),
                std::span<const double>(reference.samples));
}

double seg_snr(std::span<const double> estimate, std::span<const double> reference,
               const SegSnrOptions& opt) {
  check_lengths(estimate.size(), reference.size(), "seg_snr");
  if (opt.frame_len == 0) throw InvalidInput("seg_snr: frame_len must be positive");
  if (!(opt.floor_db < opt.ceil_db)) throw InvalidInput("seg_snr: floor must be below ceil");
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t start = 0; start + opt.frame_len <= reference.size(); start += opt.frame_len) {
    double sig = 0.0, err = 0.0;
    for (std::size_t i = start; i < start + opt.frame_len; ++i) {
      sig += reference[i] * reference[i];
      const double d = reference[i] - estimate[i];
      err += d * d;
    }
    if (sig / static_cast<double>(opt.frame_len) <= opt.silence_power) continue;
    total += ratio_db(sig, err, opt.floor_db, opt.ceil_db);
    ++used;
  }
  if (used == 0) throw InvalidInput("seg_snr: reference has no non-silent frames");
  return total / static_cast<double>(used);
}

double seg_snr(const Waveform& estimate, const Waveform& reference, const SegSnrOptions& opt) {
  return seg_snr(std::span<const double>(estimate.samples),
                 std::span<const double>(reference.samples), opt);
}

double snr_db(std::span<const double> signal, std::span<const double> noise) {
  check_lengths(signal.size(), noise.size(), "snr_db");
  double ps = 0.0, pn = 0.0;
  for (std::size_t i = 0; i < signal.size(); ++i) {
    ps += signal[i] * signal[i];
    pn += noise[i] * noise[i];
  }
  if (pn == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(ps / pn);
}

}  // namespace mpcrn
