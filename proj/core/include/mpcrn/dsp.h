// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace mpcrn {

// Row-major real plane indexed (frame, bin).
using Plane = Eigen::Array<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;
};

enum class WindowKind { kHamming, kRectangular };

struct StftConfig {
  std::size_t win_len = 512;   // 32 ms at 16 kHz
  std::size_t hop = 128;       // 8 ms
  std::size_t fft_size = 512;
  WindowKind window = WindowKind::kHamming;

  std::size_t bins() const { return fft_size / 2 + 1; }
  // Throws InvalidInput unless hop divides win_len and win_len <= fft_size.
  void validate() const;
  // Number of full frames in a signal of `samples` length (no padding).
  std::size_t frames_for(std::size_t samples) const;
  std::size_t samples_for(std::size_t frames) const;
};

struct ComplexSpectrogram {
  Plane real;
  Plane imag;
  StftConfig config;

  ComplexSpectrogram() = default;
  ComplexSpectrogram(std::size_t frames, const StftConfig& cfg);

  std::size_t frames() const { return static_cast<std::size_t>(real.rows()); }
  std::size_t bins() const { return static_cast<std::size_t>(real.cols()); }
};

struct MagnitudePhase {
  Plane magnitude;
  Plane cos_phase;
  Plane sin_phase;
};

// Bins with magnitude at or below this use the (cos, sin) = (1, 0) convention.
inline constexpr double kPhaseEpsilon = 1e-12;

std::vector<double> make_window(WindowKind kind, std::size_t length);

// Frame m covers samples [m*hop, m*hop + win_len). One-sided spectrum.
ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg = {});

// Weighted overlap-add with the analysis window, normalized per sample by the
// summed squared window. Output length is (frames - 1) * hop + win_len.
Waveform istft(const ComplexSpectrogram& spec, int sample_rate = 16000);

MagnitudePhase magnitude_phase(const ComplexSpectrogram& spec);

// Streaming helpers shared with the offline path so both produce identical
// per-frame numbers.
class FrameTransform {
 public:
  explicit FrameTransform(const StftConfig& cfg);

  const StftConfig& config() const { return cfg_; }
  const std::vector<double>& window() const { return window_; }

  // `frame` holds win_len raw samples; writes bins() values to re/im.
  void analyze(std::span<const double> frame, std::span<double> re,
               std::span<double> im) const;
  // Inverse FFT of one frame, windowed by the synthesis window (win_len outputs).
  void synthesize(std::span<const double> re, std::span<const double> im,
                  std::span<double> out) const;

 private:
  StftConfig cfg_;
  std::vector<double> window_;
};

}  // namespace mpcrn
