// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/dsp.h"

#include <cmath>
#include <complex>
#include <numbers>
#include <string>

#include <unsupported/Eigen/FFT>

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

// Eigen::FFT caches plans internally and is not safe to share between threads.
Eigen::FFT<double>& local_fft() {
  thread_local Eigen::FFT<double> fft = [] {
    Eigen::FFT<double> f;
    f.SetFlag(Eigen::FFT<double>::HalfSpectrum);
    return f;
  }();
  return fft;
}

}  // namespace

void StftConfig::validate() const {
  if (win_len == 0 || hop == 0 || fft_size == 0)
    throw InvalidInput("stft config: sizes must be positive");
  if (win_len % hop != 0)
    throw InvalidInput("stft config: hop must divide win_len");
  if (win_len > fft_size)
    throw InvalidInput("stft config: win_len must not exceed fft_size");
}

std::size_t StftConfig::frames_for(std::size_t samples) const {
  if (samples < win_len) return 0;
  return (samples - win_len) / hop + 1;
}

std::size_t StftConfig::samples_for(std::size_t frames) const {
  return frames == 0 ? 0 : (frames - 1) * hop + win_len;
}

ComplexSpectrogram::ComplexSpectrogram(std::size_t frames, const StftConfig& cfg)
    : real(Plane::Zero(static_cast<Eigen::Index>(frames),
                       static_cast<Eigen::Index>(cfg.bins()))),
      imag(Plane::Zero(static_cast<Eigen::Index>(frames),
                       static_cast<Eigen::Index>(cfg.bins()))),
      config(cfg) {}

std::vector<double> make_window(WindowKind kind, std::size_t length) {
  std::vector<double> w(length, 1.0);
  if (kind == WindowKind::kHamming) {
    // Periodic form: 75% overlap sums to a near-constant.
    for (std::size_t n = 0; n < length; ++n)
      w[n] = 0.54 - 0.46 * std::cos(2.0 * std::numbers::pi * static_cast<double>(n) /
                                    static_cast<double>(length));
  }
  return w;
}

FrameTransform::FrameTransform(const StftConfig& cfg)
    : cfg_(cfg), window_(make_window(cfg.window, cfg.win_len)) {
  cfg_.validate();
}

void FrameTransform::analyze(std::span<const double> frame, std::span<double> re,
                             std::span<double> im) const {
  std::vector<double> buf(cfg_.fft_size, 0.0);
  for (std::size_t n = 0; n < cfg_.win_len; ++n) buf[n] = frame[n] * window_[n];
  std::vector<std::complex<double>> out;
  local_fft().fwd(out, buf);
  for (std::size_t k = 0; k < cfg_.bins(); ++k) {
    re[k] = out[k].real();
    im[k] = out[k].imag();
  }
}

void FrameTransform::synthesize(std::span<const double> re, std::span<const double> im,
                                std::span<double> out) const {
  std::vector<std::complex<double>> spec(cfg_.bins());
  for (std::size_t k = 0; k < spec.size(); ++k) spec[k] = {re[k], im[k]};
  // A real signal has purely real DC and Nyquist bins.
  spec.front().imag(0.0);
  if (cfg_.fft_size % 2 == 0) spec.back().imag(0.0);
  std::vector<double> time;
  local_fft().inv(time, spec, static_cast<Eigen::Index>(cfg_.fft_size));
  for (std::size_t n = 0; n < cfg_.win_len; ++n) out[n] = time[n] * window_[n];
}

ComplexSpectrogram stft(const Waveform& w, const StftConfig& cfg) {
  cfg.validate();
  if (w.samples.empty()) throw InvalidInput("stft: empty waveform");
  for (double v : w.samples)
    if (!std::isfinite(v)) throw InvalidInput("stft: non-finite sample");
  const std::size_t frames = cfg.frames_for(w.samples.size());
  if (frames == 0)
    throw InvalidInput("stft: waveform shorter than one window (" +
                       std::to_string(w.samples.size()) + " < " +
                       std::to_string(cfg.win_len) + ")");
  FrameTransform ft(cfg);
  ComplexSpectrogram spec(frames, cfg);
  const std::span<const double> all(w.samples);
  for (std::size_t m = 0; m < frames; ++m) {
    ft.analyze(all.subspan(m * cfg.hop, cfg.win_len),
               std::span(spec.real.row(static_cast<Eigen::Index>(m)).data(), cfg.bins()),
               std::span(spec.imag.row(static_cast<Eigen::Index>(m)).data(), cfg.bins()));
  }
  return spec;
}

Waveform istft(const ComplexSpectrogram& spec, int sample_rate) {
  const StftConfig& cfg = spec.config;
  cfg.validate();
  if (spec.bins() != cfg.bins() || spec.imag.rows() != spec.real.rows() ||
      spec.imag.cols() != spec.real.cols())
    throw InvalidInput("istft: spectrogram dimensions do not match its config");
  Waveform out;
  out.sample_rate = sample_rate;
  const std::size_t frames = spec.frames();
  if (frames == 0) return out;
  const std::size_t length = cfg.samples_for(frames);
  out.samples.assign(length, 0.0);
  std::vector<double> norm(length, 0.0);
  FrameTransform ft(cfg);
  const auto& win = ft.window();
  std::vector<double> frame(cfg.win_len);
  for (std::size_t m = 0; m < frames; ++m) {
    const auto row = static_cast<Eigen::Index>(m);
    ft.synthesize(std::span(spec.real.row(row).data(), cfg.bins()),
                  std::span(spec.imag.row(row).data(), cfg.bins()), frame);
    const std::size_t start = m * cfg.hop;
    for (std::size_t n = 0; n < cfg.win_len; ++n) {
      out.samples[start + n] += frame[n];
      norm[start + n] += win[n] * win[n];
    }
  }
  for (std::size_t n = 0; n < length; ++n)
    out.samples[n] = norm[n] > 1e-12 ? out.samples[n] / norm[n] : 0.0;
  return out;
}

MagnitudePhase magnitude_phase(const ComplexSpectrogram& spec) {
  MagnitudePhase mp;
  const auto rows = spec.real.rows();
  const auto cols = spec.real.cols();
  mp.magnitude.resize(rows, cols);
  mp.cos_phase.resize(rows, cols);
  mp.sin_phase.resize(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) {
      const double re = spec.real(i, j);
      const double im = spec.imag(i, j);
      const double mag = std::hypot(re, im);
      mp.magnitude(i, j) = mag;
      if (mag > kPhaseEpsilon) {
        mp.cos_phase(i, j) = re / mag;
        mp.sin_phase(i, j) = im / mag;
      } else {
        mp.cos_phase(i, j) = 1.0;
        mp.sin_phase(i, j) = 0.0;
      }
    }
  }
  return mp;
}

}  // namespace mpcrn
