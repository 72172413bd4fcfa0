// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Neural primitives with hand-written backward passes.
//
// Every layer is an immutable description (sizes plus ParamIds into a
// ModelParams collection). Forward functions are const and take the
// parameters explicitly; when a cache pointer is supplied they record what the
// matching backward call needs. Backward accumulates parameter gradients into
// Param::grad and returns the input gradient. Calling backward with a cache
// that was never recorded throws UsageError.

#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "mpcrn/params.h"
#include "mpcrn/tensor.h"

namespace mpcrn {

enum class Mode { kTrain, kEval };

// Convolution geometry. Kernel and stride are given as (frequency, time); time
// stride is always 1 and time padding is causal (kernel_t - 1 frames on the
// past side only).
struct ConvSpec {
  std::size_t in_ch = 1;
  std::size_t out_ch = 1;
  std::size_t kernel_f = 5;
  std::size_t kernel_t = 2;
  std::size_t stride_f = 2;
  std::size_t pad_f = 2;
};

// floor((f_in + 2*pad - kernel) / stride) + 1
std::size_t conv_out_freq(std::size_t f_in, const ConvSpec& spec);

template <typename T>
struct ConvCache {
  bool recorded = false;
  Shape4 in_shape;
  std::vector<AlignedVector<T>> cols;  // per batch item, im2col matrix
};

template <typename T>
class Conv2dCausal {
 public:
  Conv2dCausal() = default;
  // Weight shape (out, in, kernel_t, kernel_f), bias (out).
  Conv2dCausal(ModelParams<T>& params, const std::string& prefix, const ConvSpec& spec,
               Rng& rng);

  const ConvSpec& spec() const { return spec_; }
  ParamId weight_id() const { return w_; }
  ParamId bias_id() const { return b_; }

  // `history` holds the kernel_t - 1 input frames that precede x (shape
  // (N, in, kernel_t - 1, F)); null means zero padding.
  Tensor<T> forward(const ModelParams<T>& p, const Tensor<T>& x,
                    const Tensor<T>* history = nullptr, ConvCache<T>* cache = nullptr) const;
  Tensor<T> backward(ModelParams<T>& p, const ConvCache<T>& cache, const Tensor<T>& dy) const;

  std::size_t macs_per_frame(std::size_t f_in) const;

 private:
  ConvSpec spec_;
  ParamId w_ = 0, b_ = 0;
};

// Transposed convolution mirroring Conv2dCausal. The full transposed output is
// trimmed by pad_f bins on the low-frequency side down to `out_f` bins, and by
// kernel_t - 1 frames on the future side so output frame t depends only on
// input frames <= t.
struct TConvSpec {
  ConvSpec conv;
  std::size_t out_f = 0;
};

template <typename T>
struct TConvCache {
  bool recorded = false;
  Shape4 in_shape;
  Tensor<T> x_ext;  // history frames followed by the input
};

template <typename T>
class TConv2dCausal {
 public:
  TConv2dCausal() = default;
  // Weight shape (kernel_t, in, out, kernel_f), bias (out).
  TConv2dCausal(ModelParams<T>& params, const std::string& prefix, const TConvSpec& spec,
                Rng& rng);

  const TConvSpec& spec() const { return spec_; }
  ParamId bias_id() const { return b_; }

  Tensor<T> forward(const ModelParams<T>& p, const Tensor<T>& x,
                    const Tensor<T>* history = nullptr, TConvCache<T>* cache = nullptr) const;
  Tensor<T> backward(ModelParams<T>& p, const TConvCache<T>& cache, const Tensor<T>& dy) const;

  std::size_t macs_per_frame(std::size_t f_in) const;

 private:
  TConvSpec spec_;
  ParamId w_ = 0, b_ = 0;
};

// Concatenates `history` (may be null => zeros) and x along time and returns the
// trailing `count` frames: the history a causal layer needs for the next call.
template <typename T>
Tensor<T> trailing_frames(const Tensor<T>& x, const Tensor<T>* history, std::size_t count);

template <typename T>
struct BnCache {
  bool recorded = false;
  Mode mode = Mode::kEval;
  Tensor<T> xhat;
  AlignedVector<T> inv_std;
  AlignedVector<T> batch_mean;
  AlignedVector<T> batch_var;  // unbiased, for the running average
};

template <typename T>
class BatchNorm2d {
 public:
  static constexpr double kEps = 1e-5;
  static constexpr double kMomentum = 0.1;

  BatchNorm2d() = default;
  // gamma, beta trainable; running_mean, running_var are buffers (0 and 1).
  BatchNorm2d(ModelParams<T>& params, const std::string& prefix, std::size_t channels);

  // Train mode normalizes with batch statistics over (batch, time, frequency);
  // eval mode with the running statistics.
  Tensor<T> forward(const ModelParams<T>& p, const Tensor<T>& x, Mode mode,
                    BnCache<T>* cache = nullptr) const;
  // Folds the batch statistics recorded in a train-mode cache into the running
  // averages.
  void update_running(ModelParams<T>& p, const BnCache<T>& cache) const;
  Tensor<T> backward(ModelParams<T>& p, const BnCache<T>& cache, const Tensor<T>& dy) const;

 private:
  std::size_t channels_ = 0;
  ParamId gamma_ = 0, beta_ = 0, mean_ = 0, var_ = 0;
};

// Memory layout of a channelled buffer: outer blocks, each holding `channels`
// runs of `inner` contiguous values.
struct ChannelLayout {
  std::size_t outer = 1, channels = 1, inner = 1;
};

template <typename T>
struct PreluCache {
  bool recorded = false;
  ChannelLayout layout;
  AlignedVector<T> x;
};

template <typename T>
class PRelu {
 public:
  PRelu() = default;
  // One learnable slope per channel, initialized to 0.25.
  PRelu(ModelParams<T>& params, const std::string& prefix, std::size_t channels);

  void forward(const ModelParams<T>& p, std::span<const T> x, std::span<T> y,
               const ChannelLayout& layout, PreluCache<T>* cache = nullptr) const;
  void backward(ModelParams<T>& p, const PreluCache<T>& cache, std::span<const T> dy,
                std::span<T> dx) const;

  // Tensor channels are axis 1.
  Tensor<T> forward(const ModelParams<T>& p, const Tensor<T>& x,
                    PreluCache<T>* cache = nullptr) const;
  Tensor<T> backward(ModelParams<T>& p, const PreluCache<T>& cache, const Tensor<T>& dy) const;

 private:
  std::size_t channels_ = 0;
  ParamId slope_ = 0;
};

template <typename T>
struct LnCache {
  bool recorded = false;
  std::size_t width = 0;
  AlignedVector<T> xhat;
  AlignedVector<T> inv_std;
};

// Normalizes each contiguous row of `width` values.
template <typename T>
class LayerNorm {
 public:
  static constexpr double kEps = 1e-5;

  LayerNorm() = default;
  LayerNorm(ModelParams<T>& params, const std::string& prefix, std::size_t width);

  void forward(const ModelParams<T>& p, std::span<const T> x, std::span<T> y,
               LnCache<T>* cache = nullptr) const;
  void backward(ModelParams<T>& p, const LnCache<T>& cache, std::span<const T> dy,
                std::span<T> dx) const;

 private:
  std::size_t width_ = 0;
  ParamId gamma_ = 0, beta_ = 0;
};

template <typename T>
T sigmoid(T x);

template <typename T>
struct GruCache {
  bool recorded = false;
  bool reverse = false;
  Sequence<T> x;
  // Indexed (step, lane, hidden) in processing order.
  AlignedVector<T> h_prev, r, z, n, hn;
};

// Gated recurrent unit with gate order (reset, update, candidate):
//   r = sigmoid(W_ir x + b_ir + W_hr h + b_hr)
//   z = sigmoid(W_iz x + b_iz + W_hz h + b_hz)
//   n = tanh(W_in x + b_in + r * (W_hn h + b_hn))
//   h' = (1 - z) * n + z * h
// Lanes are independent sequences sharing the weights.
template <typename T>
class Gru {
 public:
  Gru() = default;
  // w_ih (3H, I), w_hh (3H, H), b_ih (3H), b_hh (3H).
  Gru(ModelParams<T>& params, const std::string& prefix, std::size_t input_size,
      std::size_t hidden, Rng& rng);

  std::size_t input_size() const { return input_; }
  std::size_t hidden() const { return hidden_; }

  // h0 is lanes x hidden (null => zeros); h_last, when given, receives the state
  // after the final processed step. `reverse` walks steps from last to first.
  Sequence<T> forward(const ModelParams<T>& p, const Sequence<T>& x, const T* h0 = nullptr,
                      T* h_last = nullptr, GruCache<T>* cache = nullptr,
                      bool reverse = false) const;
  Sequence<T> backward(ModelParams<T>& p, const GruCache<T>& cache, const Sequence<T>& dy) const;

  std::size_t macs_per_step() const { return 3 * hidden_ * (input_ + hidden_); }

 private:
  std::size_t input_ = 0, hidden_ = 0;
  ParamId w_ih_ = 0, w_hh_ = 0, b_ih_ = 0, b_hh_ = 0;
};

template <typename T>
struct BiGruCache {
  GruCache<T> fwd, bwd;
};

// Forward and reverse GRUs over the same sequence, outputs summed elementwise.
template <typename T>
class BiGru {
 public:
  BiGru() = default;
  BiGru(ModelParams<T>& params, const std::string& prefix, std::size_t input_size,
        std::size_t hidden, Rng& rng);

  const Gru<T>& forward_gru() const { return fwd_; }
  const Gru<T>& backward_gru() const { return bwd_; }

  Sequence<T> forward(const ModelParams<T>& p, const Sequence<T>& x,
                      BiGruCache<T>* cache = nullptr) const;
  Sequence<T> backward(ModelParams<T>& p, const BiGruCache<T>& cache,
                       const Sequence<T>& dy) const;

 private:
  Gru<T> fwd_, bwd_;
};

}  // namespace mpcrn
