// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Frame-by-frame causal enhancement. After priming with win_len - hop
// samples, every hop-sized input chunk completes one analysis frame and
// releases the next hop output samples, so output sample n depends only on
// input samples up to n + win_len - 1. Output matches enhance_offline on the
// same (padded) signal.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mpcrn/model.h"
#include "mpcrn/reconstruction.h"

namespace mpcrn {

template <typename T>
class StreamEnhancer {
 public:
  // `model` and `params` must outlive the enhancer.
  StreamEnhancer(const Mpcrn<T>& model, const ModelParams<T>& params,
                 ReconstructionMode mode = ReconstructionMode::kPolar, const StftConfig& cfg = {});

  std::size_t prime_size() const { return cfg_.win_len - cfg_.hop; }
  std::size_t hop() const { return cfg_.hop; }
  bool primed() const { return primed_; }
  std::size_t frames_processed() const { return frames_; }

  // Exactly prime_size() samples, once after construction or reset().
  void prime(std::span<const double> samples);
  // Exactly hop() samples; returns hop() enhanced samples.
  std::vector<double> process_frame(std::span<const double> chunk);
  // Remaining win_len - hop output samples. The stream must be reset before reuse.
  std::vector<double> flush();
  void reset();

  // Bytes of carried state (model history, input and overlap-add buffers).
  std::size_t state_bytes() const;
  const ModelState<T>& model_state() const { return state_; }

  // Streams a whole waveform (zero-padded like enhance_offline) and returns an
  // output of equal length. Resets first.
  Waveform run(const Waveform& in);

 private:
  const Mpcrn<T>* model_;
  const ModelParams<T>* params_;
  ReconstructionMode mode_;
  StftConfig cfg_;
  FrameTransform ft_;
  ModelState<T> state_;
  std::vector<double> input_;  // last win_len input samples
  std::vector<double> ola_;    // overlap-add accumulator for the next win_len outputs
  std::vector<double> norm_;   // summed squared window for the same span
  std::vector<double> frame_;
  bool primed_ = false;
  bool flushed_ = false;
  std::size_t frames_ = 0;
};

struct RtfReport {
  double audio_seconds = 0.0;
  std::vector<double> run_seconds;
  double median_seconds = 0.0;
  double rtf = 0.0;  // median_seconds / audio_seconds
};

// Streams `duration_s` seconds of noise through a randomly initialized model
// with configuration `cfg` on the calling thread, `runs` times (at least 5).
RtfReport benchmark_rtf(const ModelConfig& cfg, double duration_s = 3.0, std::size_t runs = 5,
                        std::uint64_t seed = 0);

}  // namespace mpcrn
