// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include "mpcrn/dsp.h"

namespace mpcrn {

// Network output for one utterance, each plane [frames x bins]:
// mag_mask in (0,1), cirm_real and cirm_imag in (-1,1) estimating the
// cosine and sine of the phase difference between clean and noisy bins.
struct MaskTriple {
  Plane mag_mask;
  Plane cirm_real;
  Plane cirm_imag;

  std::size_t frames() const { return static_cast<std::size_t>(mag_mask.rows()); }
  std::size_t bins() const { return static_cast<std::size_t>(mag_mask.cols()); }
};

// Cartesian complex mask used by the R/C/E reconstruction variants.
struct CartesianMask {
  Plane real;
  Plane imag;
};

}  // namespace mpcrn
