// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// Central-difference verification of the hand-written backward passes, in
// double precision. Each check projects the layer output onto a fixed random
// tensor so every output element contributes to the scalar being
// differentiated.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mpcrn/params.h"

namespace mpcrn {

struct GradcheckOptions {
  double step = 1e-4;
  double tolerance = 1e-4;
  // Entries sampled per checked tensor (all entries when the tensor is smaller).
  std::size_t max_entries = 48;
  std::size_t shapes = 3;
  // Ridders' extrapolation from `step` downwards instead of one central difference.
  bool ridders = false;
  std::uint64_t seed = 0;
};

struct GradcheckResult {
  GradcheckResult() = default;
  GradcheckResult(std::string l, std::string s) : layer(std::move(l)), shape(std::move(s)) {}

  std::string layer;
  std::string shape;  // human-readable description of the tested configuration
  std::size_t checked = 0;
  double max_rel_err = 0.0;
  std::string worst;  // "tensor[index]" of the largest error
  bool passed = false;
};

// |a - n| / max(|a|, |n|, 1e-6)
double relative_error(double analytic, double numeric);

// Compares `analytic` against central differences of f() with respect to x,
// perturbing a random subset of entries in place (restored afterwards).
// Updates `result` with the entry count, maximum error and worst location.
void check_entries(std::string_view tensor, std::span<double> x,
                   std::span<const double> analytic, const std::function<double()>& f,
                   const GradcheckOptions& opt, Rng& rng, GradcheckResult& result);

// conv2d_causal, tconv2d_causal, batchnorm, layernorm, prelu, gru, bigru,
// loss_total, loss_total_polar, reconstruct_cartesian, model
const std::vector<std::string>& gradcheck_layers();

// One result per tested shape. Throws InvalidInput for an unknown layer.
std::vector<GradcheckResult> gradcheck_layer(std::string_view layer,
                                             const GradcheckOptions& opt = {});
std::vector<GradcheckResult> gradcheck_all(const GradcheckOptions& opt = {});

}  // namespace mpcrn
