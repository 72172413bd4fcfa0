// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Synthetic clean/noisy pairs for desk-scale training: voiced harmonic
// "speech" with syllable-like envelopes mixed with white, pink or band-limited
// noise at an exact SNR.

#pragma once

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "mpcrn/params.h"

namespace mpcrn {

enum class NoiseKind { kWhite, kPink, kBand };

std::string_view noise_name(NoiseKind kind);
NoiseKind parse_noise(std::string_view text);

struct SynthMixSpec {
  std::vector<double> snr_db{0, 5, 10, 15};
  std::vector<NoiseKind> noise{NoiseKind::kWhite, NoiseKind::kPink, NoiseKind::kBand};
  std::size_t min_harmonics = 3;
  std::size_t max_harmonics = 8;
  double min_f0 = 80.0;
  double max_f0 = 300.0;
  double clean_rms = 0.1;
  // Multiplies the noise after SNR scaling; 0 yields noisy == clean.
  double noise_gain = 1.0;
  double duration_s = 3.0;
  std::size_t count = 16;
  int sample_rate = 16000;
  std::uint64_t seed = 0;

  // Throws InvalidInput on empty choice lists or inverted ranges.
  void validate() const;
  std::size_t samples() const;
};

struct MixPair {
  std::vector<double> noisy;
  std::vector<double> clean;
  double snr_db = 0.0;
  NoiseKind noise = NoiseKind::kWhite;
};

std::vector<double> synth_clean(const SynthMixSpec& spec, std::size_t samples, Rng& rng);
std::vector<double> synth_noise(NoiseKind kind, std::size_t samples, int sample_rate, Rng& rng);

// Scales `noise` so that 10 log10(P_clean / P_noise) == snr_db and returns
// clean + gain * scaled noise.
std::vector<double> mix_at_snr(const std::vector<double>& clean, const std::vector<double>& noise,
                               double snr_db, double gain = 1.0);

// `count` pairs of `duration_s` seconds, deterministic in `seed`.
std::vector<MixPair> synth_batch(const SynthMixSpec& spec);

}  // namespace mpcrn
