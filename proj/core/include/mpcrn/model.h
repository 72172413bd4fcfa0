// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "mpcrn/layers.h"
#include "mpcrn/mask.h"

namespace mpcrn {

struct ModelConfig {
  std::vector<std::size_t> enc_channels{16, 32, 64, 128, 256};
  std::vector<std::size_t> dec_channels{128, 64, 32, 16, 3};
  std::vector<std::size_t> psm_hidden{128, 64, 32};
  std::size_t kernel_f = 5;
  std::size_t kernel_t = 2;
  std::size_t stride_f = 2;
  std::size_t pad_f = 2;
  std::size_t input_channels = 2;
  std::size_t freq_bins = 257;

  // channels {4,8,8,8,8}, hidden {8,8,8}
  static ModelConfig toy();

  // Throws InvalidInput on inconsistent lists or a frequency chain that
  // collapses below one bin.
  void validate() const;
  // Frequency size entering each encoder level plus the bottleneck size.
  std::vector<std::size_t> freq_chain() const;

  // Canonical key=value block, one key per line in a fixed order.
  std::string to_text() const;
  static ModelConfig from_text(std::string_view text);

  bool operator==(const ModelConfig&) const = default;
};

// Exact number of trainable scalars, computed from the configuration alone.
std::size_t count_params(const ModelConfig& cfg);
// Multiply-accumulates per STFT frame, and per second of audio at
// `frames_per_second` (125 for an 8 ms hop).
std::size_t count_macs_per_frame(const ModelConfig& cfg);
double count_macs(const ModelConfig& cfg, double frames_per_second = 125.0);

template <typename T>
struct PsmCache {
  bool recorded = false;
  Shape4 in_shape;
  GruCache<T> gru;
  LnCache<T> ln_t;
  PreluCache<T> act_t;
  BiGruCache<T> bigru;
  LnCache<T> ln_s;
  PreluCache<T> act_s;
  ConvCache<T> fuse;
  BnCache<T> bn;
  PreluCache<T> act;
};

// Parallel sequence modeling block. The temporal branch runs a GRU over time
// with one lane per (batch, frequency); the spectral branch runs a BiGRU over
// frequency with one lane per (batch, frame). Both are followed by layer norm
// and PReLU, summed, and projected back to the input channel count by a 1x1
// conv + BN + PReLU. Output shape equals input shape.
template <typename T>
class PsmBlock {
 public:
  PsmBlock() = default;
  PsmBlock(ModelParams<T>& params, const std::string& prefix, std::size_t channels,
           std::size_t hidden, Rng& rng);

  std::size_t channels() const { return channels_; }
  std::size_t hidden() const { return hidden_; }

  // temporal_state: (N*F) x hidden GRU state carried across calls; null means
  // zeros. It is updated in place when given.
  Tensor<T> forward(const ModelParams<T>& p, const Tensor<T>& e, Mode mode,
                    PsmCache<T>* cache = nullptr, AlignedVector<T>* temporal_state = nullptr) const;
  Tensor<T> backward(ModelParams<T>& p, const PsmCache<T>& cache, const Tensor<T>& dy) const;
  void update_running(ModelParams<T>& p, const PsmCache<T>& cache) const;

  std::size_t macs_per_frame(std::size_t freq) const;

  // Intermediate outputs, exposed for stage diagnostics.
  struct Stages {
    Tensor<T> temporal, spectral, fused;
  };
  Tensor<T> forward_stages(const ModelParams<T>& p, const Tensor<T>& e, Mode mode,
                           PsmCache<T>* cache, AlignedVector<T>* temporal_state,
                           Stages* stages) const;

 private:
  std::size_t channels_ = 0, hidden_ = 0;
  Gru<T> gru_;
  LayerNorm<T> ln_t_;
  PRelu<T> act_t_;
  BiGru<T> bigru_;
  LayerNorm<T> ln_s_;
  PRelu<T> act_s_;
  Conv2dCausal<T> fuse_;
  BatchNorm2d<T> bn_;
  PRelu<T> act_;
};

// Causal history carried between streaming calls: one past input frame per
// (transposed) convolution and the temporal GRU state of every PSM block.
template <typename T>
struct ModelState {
  std::vector<Tensor<T>> enc_history;
  std::vector<Tensor<T>> dec_history;
  std::vector<AlignedVector<T>> psm_state;

  std::size_t bytes() const;
  bool operator==(const ModelState&) const;
};

template <typename T>
struct ModelTape {
  bool recorded = false;
  Mode mode = Mode::kEval;
  std::vector<ConvCache<T>> enc_conv;
  std::vector<BnCache<T>> enc_bn;
  std::vector<PreluCache<T>> enc_act;
  std::vector<PsmCache<T>> psm;
  std::vector<TConvCache<T>> dec_conv;
  std::vector<BnCache<T>> dec_bn;
  std::vector<PreluCache<T>> dec_act;
  Tensor<T> output;
};

// Encoder (conv + BN + PReLU per level) -> PSM blocks -> decoder (transposed
// conv + BN + PReLU per level) -> mask head. Input is (N, 2, T, F) holding
// real and imaginary STFT planes; output is (N, 3, T, F) with channel 0
// through sigmoid and channels 1, 2 through tanh.
template <typename T>
class Mpcrn {
 public:
  Mpcrn() = default;
  // Registers and initializes all parameters in `params` (which must be empty)
  // deterministically from `seed`.
  Mpcrn(const ModelConfig& cfg, ModelParams<T>& params, std::uint64_t seed);

  const ModelConfig& config() const { return cfg_; }

  // Train mode normalizes with batch statistics; with a tape they are recorded
  // and update_running() folds them into the running averages. `state`, when given, supplies
  // and receives the causal history (streaming); otherwise history is zero.
  Tensor<T> forward(const ModelParams<T>& p, const Tensor<T>& x, Mode mode,
                    ModelTape<T>* tape = nullptr, ModelState<T>* state = nullptr) const;
  void update_running(ModelParams<T>& p, const ModelTape<T>& tape) const;
  // d_out is the gradient w.r.t. the activated (N, 3, T, F) output.
  Tensor<T> backward(ModelParams<T>& p, const ModelTape<T>& tape, const Tensor<T>& d_out) const;

  ModelState<T> make_state(std::size_t batch = 1) const;

  // Name of the first stage whose output contains NaN/Inf, or empty.
  std::string first_non_finite_stage(const ModelParams<T>& p, const Tensor<T>& x,
                                     Mode mode) const;

 private:
  Tensor<T> run(const ModelParams<T>& p, const Tensor<T>& x, Mode mode, ModelTape<T>* tape,
                ModelState<T>* state, std::string* bad_stage) const;

  ModelConfig cfg_;
  std::vector<std::size_t> freq_;
  std::vector<Conv2dCausal<T>> enc_conv_;
  std::vector<BatchNorm2d<T>> enc_bn_;
  std::vector<PRelu<T>> enc_act_;
  std::vector<PsmBlock<T>> psm_;
  std::vector<TConv2dCausal<T>> dec_conv_;
  std::vector<BatchNorm2d<T>> dec_bn_;
  std::vector<PRelu<T>> dec_act_;
};

// Builds the (1, 2, frames, bins) network input from a spectrogram.
template <typename T>
Tensor<T> spectrogram_to_input(const ComplexSpectrogram& spec);

// Extracts batch item n of an (N, 3, T, F) model output as double planes.
template <typename T>
MaskTriple mask_triple(const Tensor<T>& out, std::size_t n = 0);

}  // namespace mpcrn
