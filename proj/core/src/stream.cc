// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/stream.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "mpcrn/error.h"
#include "mpcrn/pipeline.h"

namespace mpcrn {

template <typename T>
StreamEnhancer<T>::StreamEnhancer(const Mpcrn<T>& model, const ModelParams<T>& params,
                                  ReconstructionMode mode, const StftConfig& cfg)
    : model_(&model), params_(&params), mode_(mode), cfg_(cfg), ft_(cfg) {
  cfg_.validate();
  if (model.config().freq_bins != cfg_.bins())
    throw InvalidInput("stream: model expects " + std::to_string(model.config().freq_bins) +
                       " bins, STFT gives " + std::to_string(cfg_.bins()));
  reset();
}

template <typename T>
void StreamEnhancer<T>::reset() {
  state_ = model_->make_state(1);
  input_.assign(cfg_.win_len, 0.0);
  ola_.assign(cfg_.win_len, 0.0);
  norm_.assign(cfg_.win_len, 0.0);
  frame_.assign(cfg_.win_len, 0.0);
  primed_ = false;
  flushed_ = false;
  frames_ = 0;
}

template <typename T>
void StreamEnhancer<T>::prime(std::span<const double> samples) {
  if (primed_) throw UsageError("stream: already primed");
  if (samples.size() != prime_size())
    throw InvalidInput("stream: priming needs " + std::to_string(prime_size()) +
                       " samples, got " + std::to_string(samples.size()));
  std::copy(samples.begin(), samples.end(), input_.begin() + static_cast<long>(cfg_.hop));
  primed_ = true;
}

template <typename T>
std::vector<double> StreamEnhancer<T>::process_frame(std::span<const double> chunk) {
  if (!primed_) throw UsageError("stream: process_frame before prime");
  if (flushed_) throw UsageError("stream: process_frame after flush; call reset()");
  if (chunk.size() != cfg_.hop)
    throw InvalidInput("stream: chunk must have " + std::to_string(cfg_.hop) + " samples, got " +
                       std::to_string(chunk.size()));
  const std::size_t win = cfg_.win_len, hop = cfg_.hop, bins = cfg_.bins();
  std::copy(input_.begin() + static_cast<long>(hop), input_.end(), input_.begin());
  std::copy(chunk.begin(), chunk.end(), input_.end() - static_cast<long>(hop));

  ComplexSpectrogram x(1, cfg_);
  ft_.analyze(input_, std::span(x.real.data(), bins), std::span(x.imag.data(), bins));
  const Tensor<T> out =
      model_->forward(*params_, spectrogram_to_input<T>(x), Mode::kEval, nullptr, &state_);
  const ComplexSpectrogram s = apply_reconstruction(out, 0, mode_, x);
  ft_.synthesize(std::span(s.real.data(), bins), std::span(s.imag.data(), bins), frame_);

  const auto& w = ft_.window();
  for (std::size_t n = 0; n < win; ++n) {
    ola_[n] += frame_[n];
    norm_[n] += w[n] * w[n];
  }
  std::vector<double> result(hop);
  for (std::size_t n = 0; n < hop; ++n) result[n] = norm_[n] > 1e-12 ? ola_[n] / norm_[n] : 0.0;
  std::copy(ola_.begin() + static_cast<long>(hop), ola_.end(), ola_.begin());
  std::copy(norm_.begin() + static_cast<long>(hop), norm_.end(), norm_.begin());
  std::fill(ola_.end() - static_cast<long>(hop), ola_.end(), 0.0);
  std::fill(norm_.end() - static_cast<long>(hop), norm_.end(), 0.0);
  ++frames_;
  return result;
}

template <typename T>
std::vector<double> StreamEnhancer<T>::flush() {
  if (!primed_) throw UsageError("stream: flush before prime");
  if (flushed_) throw UsageError("stream: already flushed");
  flushed_ = true;
  std::vector<double> tail(prime_size(), 0.0);
  if (frames_ == 0) return tail;
  for (std::size_t n = 0; n < tail.size(); ++n)
    tail[n] = norm_[n] > 1e-12 ? ola_[n] / norm_[n] : 0.0;
  return tail;
}

template <typename T>
std::size_t StreamEnhancer<T>::state_bytes() const {
  return state_.bytes() + (input_.size() + ola_.size() + norm_.size()) * sizeof(double);
}

template <typename T>
Waveform StreamEnhancer<T>::run(const Waveform& in) {
  if (in.samples.empty()) throw InvalidInput("stream: empty signal");
  reset();
  const std::vector<double> x = pad_to(in.samples, padded_length(in.samples.size(), cfg_));
  const std::size_t p = prime_size();
  prime(std::span(x.data(), p));
  Waveform out;
  out.sample_rate = in.sample_rate;
  out.samples.reserve(x.size());
  for (std::size_t pos = p; pos < x.size(); pos += cfg_.hop) {
    const auto chunk = process_frame(std::span(x.data() + pos, cfg_.hop));
    out.samples.insert(out.samples.end(), chunk.begin(), chunk.end());
  }
  const auto tail = flush();
  out.samples.insert(out.samples.end(), tail.begin(), tail.end());
  out.samples.resize(in.samples.size());
  return out;
}

RtfReport benchmark_rtf(const ModelConfig& cfg, double duration_s, std::size_t runs,
                        std::uint64_t seed) {
  if (!(duration_s > 0.0)) throw InvalidInput("benchmark_rtf: duration must be positive");
  runs = std::max<std::size_t>(runs, 5);
  ModelParams<float> params;
  const Mpcrn<float> model(cfg, params, seed);
  StftConfig stft_cfg;
  Rng rng(seed ^ 0x5eedULL);
  Waveform in;
  in.samples.resize(static_cast<std::size_t>(std::llround(duration_s * in.sample_rate)));
  for (auto& v : in.samples) v = 0.1 * rng.normal();

  StreamEnhancer<float> stream(model, params, ReconstructionMode::kPolar, stft_cfg);
  RtfReport report;
  report.audio_seconds = static_cast<double>(in.samples.size()) / in.sample_rate;
  for (std::size_t r = 0; r < runs; ++r) {
    const auto t0 = std::chrono::steady_clock::now();
    const Waveform out = stream.run(in);
    const auto t1 = std::chrono::steady_clock::now();
    if (out.samples.size() != in.samples.size())
      throw NumericalError("benchmark_rtf: output length changed");
    report.run_seconds.push_back(std::chrono::duration<double>(t1 - t0).count());
  }
  std::vector<double> sorted = report.run_seconds;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t mid = sorted.size() / 2;
  report.median_seconds =
      sorted.size() % 2 ? sorted[mid] : 0.5 * (sorted[mid - 1] + sorted[mid]);
  report.rtf = report.median_seconds / report.audio_seconds;
  return report;
}

template class StreamEnhancer<float>;
template class StreamEnhancer<double>;

}  // namespace mpcrn
