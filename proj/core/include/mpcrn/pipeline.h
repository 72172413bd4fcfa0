// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Offline enhancement: STFT -> network -> reconstruction -> inverse STFT.

#pragma once

#include <cstddef>

#include "mpcrn/model.h"
#include "mpcrn/reconstruction.h"

namespace mpcrn {

// Network output channels 1 and 2 read as a Cartesian mask (R/C/E modes).
template <typename T>
CartesianMask cartesian_mask(const Tensor<T>& out, std::size_t n = 0);

// Reconstructs batch item n of a model output with the given mode.
template <typename T>
ComplexSpectrogram apply_reconstruction(const Tensor<T>& out, std::size_t n,
                                        ReconstructionMode mode, const ComplexSpectrogram& x);

// Smallest length >= max(samples, win_len) that the STFT covers without
// leftover samples. Signals are zero-padded to it and the output truncated
// back, so enhancement preserves length.
std::size_t padded_length(std::size_t samples, const StftConfig& cfg = {});
std::vector<double> pad_to(const std::vector<double>& x, std::size_t length);

template <typename T>
Waveform enhance_offline(const Mpcrn<T>& model, const ModelParams<T>& params, const Waveform& in,
                         ReconstructionMode mode = ReconstructionMode::kPolar,
                         const StftConfig& cfg = {});

// Same pipeline with the identity mask instead of a network: output equals
// the input up to STFT round-off.
Waveform enhance_identity(const Waveform& in, const StftConfig& cfg = {});

}  // namespace mpcrn
