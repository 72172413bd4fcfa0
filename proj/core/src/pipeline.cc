// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/pipeline.h"

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

void check_waveform(const Waveform& in) {
  if (in.samples.empty()) throw InvalidInput("enhance: empty signal");
  if (in.sample_rate <= 0) throw InvalidInput("enhance: invalid sample rate");
}

Waveform finish(const ComplexSpectrogram& s, const Waveform& in) {
  Waveform out = istft(s, in.sample_rate);
  out.samples.resize(in.samples.size());
  return out;
}

}  // namespace

template <typename T>
CartesianMask cartesian_mask(const Tensor<T>& out, std::size_t n) {
  MaskTriple m = mask_triple(out, n);
  return CartesianMask{std::move(m.cirm_real), std::move(m.cirm_imag)};
}

template <typename T>
ComplexSpectrogram apply_reconstruction(const Tensor<T>& out, std::size_t n,
                                        ReconstructionMode mode, const ComplexSpectrogram& x) {
  if (mode == ReconstructionMode::kPolar) return reconstruct_polar(mask_triple(out, n), x);
  return reconstruct_cartesian(mode, cartesian_mask(out, n), x);
}

std::size_t padded_length(std::size_t samples, const StftConfig& cfg) {
  cfg.validate();
  if (samples <= cfg.win_len) return cfg.win_len;
  const std::size_t extra = samples - cfg.win_len;
  return cfg.win_len + (extra + cfg.hop - 1) / cfg.hop * cfg.hop;
}

std::vector<double> pad_to(const std::vector<double>& x, std::size_t length) {
  std::vector<double> out(x);
  if (out.size() < length) out.resize(length, 0.0);
  return out;
}

template <typename T>
Waveform enhance_offline(const Mpcrn<T>& model, const ModelParams<T>& params, const Waveform& in,
                         ReconstructionMode mode, const StftConfig& cfg) {
  check_waveform(in);
  Waveform padded{pad_to(in.samples, padded_length(in.samples.size(), cfg)), in.sample_rate};
  const ComplexSpectrogram x = stft(padded, cfg);
  const Tensor<T> out = model.forward(params, spectrogram_to_input<T>(x), Mode::kEval);
  return finish(apply_reconstruction(out, 0, mode, x), in);
}

Waveform enhance_identity(const Waveform& in, const StftConfig& cfg) {
  check_waveform(in);
  Waveform padded{pad_to(in.samples, padded_length(in.samples.size(), cfg)), in.sample_rate};
  const ComplexSpectrogram x = stft(padded, cfg);
  return finish(reconstruct_polar(identity_mask(x.frames(), x.bins()), x), in);
}

#define MPCRN_INSTANTIATE(T)                                                                   \
  template CartesianMask cartesian_mask<T>(const Tensor<T>&, std::size_t);                    \
  template ComplexSpectrogram apply_reconstruction<T>(const Tensor<T>&, std::size_t,          \
                                                      ReconstructionMode,                     \
                                                      const ComplexSpectrogram&);             \
  template Waveform enhance_offline<T>(const Mpcrn<T>&, const ModelParams<T>&, const Waveform&, \
                                       ReconstructionMode, const StftConfig&);

MPCRN_INSTANTIATE(float)
MPCRN_INSTANTIATE(double)

}  // namespace mpcrn
