// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/synth.h"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

double power(const std::vector<double>& x) {
  double p = 0.0;
  for (double v : x) p += v * v;
  return x.empty() ? 0.0 : p / static_cast<double>(x.size());
}

// Raised-cosine ramps at both ends of a segment.
double ramp(std::size_t i, std::size_t len, std::size_t fade) {
  fade = std::min(fade, len / 2);
  if (fade == 0) return 1.0;
  const std::size_t d = std::min(i, len - 1 - i);
  if (d >= fade) return 1.0;
  return 0.5 - 0.5 * std::cos(std::numbers::pi * static_cast<double>(d) / static_cast<double>(fade));
}

}  // namespace

std::string_view noise_name(NoiseKind kind) {
  switch (kind) {
    case NoiseKind::kWhite: return "white";
    case NoiseKind::kPink: return "pink";
    case NoiseKind::kBand: return "band";
  }
  return "?";
}

NoiseKind parse_noise(std::string_view text) {
  if (text == "white") return NoiseKind::kWhite;
  if (text == "pink") return NoiseKind::kPink;
  if (text == "band") return NoiseKind::kBand;
  throw InvalidInput("unknown noise kind '" + std::string(text) + "'");
}

void SynthMixSpec::validate() const {
  if (snr_db.empty()) throw InvalidInput("synth: no SNR choices");
  if (noise.empty()) throw InvalidInput("synth: no noise kinds");
  if (min_harmonics == 0 || min_harmonics > max_harmonics)
    throw InvalidInput("synth: bad harmonic range");
  if (!(min_f0 > 0.0) || min_f0 > max_f0) throw InvalidInput("synth: bad f0 range");
  if (sample_rate <= 0) throw InvalidInput("synth: bad sample rate");
  if (!(duration_s > 0.0)) throw InvalidInput("synth: duration must be positive");
  if (!(clean_rms > 0.0)) throw InvalidInput("synth: clean_rms must be positive");
  if (!(noise_gain >= 0.0)) throw InvalidInput("synth: noise_gain must be non-negative");
}

std::size_t SynthMixSpec::samples() const {
  return static_cast<std::size_t>(std::llround(duration_s * sample_rate));
}

std::vector<double> synth_clean(const SynthMixSpec& spec, std::size_t samples, Rng& rng) {
  const double fs = spec.sample_rate;
  const double nyquist = 0.5 * fs;
  std::vector<double> out(samples, 0.0);
  std::size_t pos = 0;
  // Alternating voiced segments (syllables) and short pauses.
  while (pos < samples) {
    const auto seg = static_cast<std::size_t>(rng.uniform(0.12, 0.40) * fs);
    const auto gap = static_cast<std::size_t>(rng.uniform(0.02, 0.15) * fs);
    const std::size_t len = std::min(seg, samples - pos);
    const std::size_t harmonics =
        spec.min_harmonics + rng.below(spec.max_harmonics - spec.min_harmonics + 1);
    const double f0_start = rng.uniform(spec.min_f0, spec.max_f0);
    const double f0_end = std::clamp(f0_start * rng.uniform(0.85, 1.15), spec.min_f0, spec.max_f0);
    const double level = rng.uniform(0.5, 1.0);
    std::vector<double> amp(harmonics), phase(harmonics);
    for (std::size_t h = 0; h < harmonics; ++h) {
      amp[h] = rng.uniform(0.3, 1.0) / static_cast<double>(h + 1);
      phase[h] = rng.uniform(0.0, kTwoPi);
    }
    const auto fade = static_cast<std::size_t>(0.02 * fs);
    double base = 0.0;
    for (std::size_t i = 0; i < len; ++i) {
      const double frac = len > 1 ? static_cast<double>(i) / static_cast<double>(len - 1) : 0.0;
      const double f0 = f0_start + (f0_end - f0_start) * frac;
      base += kTwoPi * f0 / fs;
      double v = 0.0;
      for (std::size_t h = 0; h < harmonics; ++h) {
        if (f0 * static_cast<double>(h + 1) >= nyquist) break;
        v += amp[h] * std::sin(static_cast<double>(h + 1) * base + phase[h]);
      }
      const double env = std::sin(std::numbers::pi * frac);
      out[pos + i] = level * ramp(i, len, fade) * (0.3 + 0.7 * env) * v;
    }
    pos += len + gap;
  }
  const double p = power(out);
  if (p > 0.0) {
    const double g = spec.clean_rms / std::sqrt(p);
    for (double& v : out) v *= g;
  }
  return out;
}

std::vector<double> synth_noise(NoiseKind kind, std::size_t samples, int sample_rate, Rng& rng) {
  std::vector<double> out(samples);
  switch (kind) {
    case NoiseKind::kWhite:
      for (auto& v : out) v = rng.normal();
      break;
    case NoiseKind::kPink: {
      // Paul Kellet's refined pinking filter.
      double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
      for (auto& v : out) {
        const double w = rng.normal();
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        v = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
        b6 = w * 0.115926;
      }
      break;
    }
    case NoiseKind::kBand: {
      // Biquad band-pass (constant peak gain) around a random centre frequency.
      const double fc = rng.uniform(300.0, 4000.0);
      const double q = rng.uniform(0.7, 3.0);
      const double w0 = kTwoPi * fc / sample_rate;
      const double alpha = std::sin(w0) / (2.0 * q);
      const double a0 = 1.0 + alpha;
      const double b0 = alpha / a0, b2 = -alpha / a0;
      const double a1 = -2.0 * std::cos(w0) / a0, a2 = (1.0 - alpha) / a0;
      double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
      for (auto& v : out) {
        const double x = rng.normal();
        const double y = b0 * x + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x;
        y2 = y1;
        y1 = y;
        v = y;
      }
      break;
    }
  }
  return out;
}

std::vector<double> mix_at_snr(const std::vector<double>& clean, const std::vector<double>& noise,
                               double snr_db, double gain) {
  if (clean.size() != noise.size()) throw InvalidInput("mix_at_snr: length mismatch");
  const double ps = power(clean), pn = power(noise);
  if (!(pn > 0.0)) throw InvalidInput("mix_at_snr: noise is silent");
  const double scale = gain * std::sqrt(ps / (pn * std::pow(10.0, snr_db / 10.0)));
  std::vector<double> out(clean.size());
  for (std::size_t i = 0; i < clean.size(); ++i) out[i] = clean[i] + scale * noise[i];
  return out;
}

std::vector<MixPair> synth_batch(const SynthMixSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  const std::size_t n = spec.samples();
  std::vector<MixPair> out;
  out.reserve(spec.count);
  for (std::size_t k = 0; k < spec.count; ++k) {
    MixPair pair;
    pair.snr_db = spec.snr_db[rng.below(spec.snr_db.size())];
    pair.noise = spec.noise[rng.below(spec.noise.size())];
    pair.clean = synth_clean(spec, n, rng);
    const auto noise = synth_noise(pair.noise, n, spec.sample_rate, rng);
    pair.noisy = mix_at_snr(pair.clean, noise, pair.snr_db, spec.noise_gain);
    out.push_back(std::move(pair));
  }
  return out;
}

}  // namespace mpcrn
