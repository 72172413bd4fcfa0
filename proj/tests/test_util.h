// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <unistd.h>

#include <filesystem>
#include <string>
#include <vector>

#include "mpcrn/dsp.h"
#include "mpcrn/params.h"
#include "mpcrn/tensor.h"

namespace mpcrn {

// Lets tests compare aligned buffers against plain vectors.
template <typename T, typename A, typename B>
bool operator==(const std::vector<T, A>& a, const std::vector<T, B>& b) {
  return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin());
}

}  // namespace mpcrn

namespace mpcrn::testing {

inline Waveform random_waveform(std::size_t n, std::uint64_t seed, double scale = 0.3) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = scale * rng.normal();
  return w;
}

inline ComplexSpectrogram random_spectrogram(std::size_t frames, std::size_t bins, Rng& rng) {
  StftConfig cfg;
  cfg.fft_size = 2 * (bins - 1);
  cfg.win_len = cfg.fft_size;
  cfg.hop = cfg.win_len / 4;
  ComplexSpectrogram s(frames, cfg);
  for (Eigen::Index i = 0; i < s.real.size(); ++i) {
    s.real.data()[i] = rng.normal();
    s.imag.data()[i] = rng.normal();
  }
  return s;
}

inline Plane random_plane(std::size_t rows, std::size_t cols, Rng& rng, double lo, double hi) {
  Plane p(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < p.size(); ++i) p.data()[i] = rng.uniform(lo, hi);
  return p;
}

template <typename T>
Tensor<T> random_tensor(Shape4 s, Rng& rng, double scale = 1.0) {
  Tensor<T> x(s);
  for (auto& v : x.vec()) v = static_cast<T>(scale * rng.normal());
  return x;
}

template <typename T>
void randomize(ModelParams<T>& p, Rng& rng, double scale) {
  for (auto& e : p)
    if (e.trainable)
      for (auto& v : e.value) v = static_cast<T>(scale * rng.normal());
}

inline double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size() && i < b.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static int counter = 0;
    path_ = std::filesystem::temp_directory_path() /
            ("mpcrn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace mpcrn::testing
