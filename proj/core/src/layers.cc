// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/layers.h"

#include <cmath>

#include <Eigen/Core>

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

template <typename T>
using MatRM = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapRM = Eigen::Map<MatRM<T>>;
template <typename T>
using CMapRM = Eigen::Map<const MatRM<T>>;
template <typename T>
using CMapStrided = Eigen::Map<const MatRM<T>, 0, Eigen::OuterStride<>>;
template <typename T>
using VecMap = Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>>;

using Idx = Eigen::Index;

Idx ix(std::size_t v) { return static_cast<Idx>(v); }

template <typename T>
void init_uniform(AlignedVector<T>& values, double bound, Rng& rng) {
  for (auto& v : values) v = static_cast<T>(rng.uniform(-bound, bound));
}

void require(bool ok, const std::string& what) {
  if (!ok) throw ShapeError(what);
}

void require_recorded(bool recorded, const char* layer) {
  if (!recorded) throw UsageError(std::string(layer) + ": backward without a recorded forward");
}

}  // namespace

std::size_t conv_out_freq(std::size_t f_in, const ConvSpec& spec) {
  if (f_in + 2 * spec.pad_f < spec.kernel_f) return 0;
  return (f_in + 2 * spec.pad_f - spec.kernel_f) / spec.stride_f + 1;
}

template <typename T>
Tensor<T> trailing_frames(const Tensor<T>& x, const Tensor<T>* history, std::size_t count) {
  const Shape4 s = x.shape();
  Tensor<T> out({s.n, s.c, count, s.f});
  if (count == 0) return out;
  const std::size_t hist_t = history ? history->shape().t : 0;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t k = 0; k < count; ++k) {
        // position in the concatenation [history | x]
        const long pos = static_cast<long>(hist_t + s.t) - static_cast<long>(count - k);
        if (pos < 0) continue;
        const auto upos = static_cast<std::size_t>(pos);
        for (std::size_t f = 0; f < s.f; ++f)
          out(n, c, k, f) = upos < hist_t ? (*history)(n, c, upos, f) : x(n, c, upos - hist_t, f);
      }
  return out;
}

// ---------------------------------------------------------------------------
// Conv2dCausal

template <typename T>
Conv2dCausal<T>::Conv2dCausal(ModelParams<T>& params, const std::string& prefix,
                              const ConvSpec& spec, Rng& rng)
    : spec_(spec) {
  w_ = params.add(prefix + ".weight", {spec.out_ch, spec.in_ch, spec.kernel_t, spec.kernel_f});
  b_ = params.add(prefix + ".bias", {spec.out_ch});
  const double fan_in = static_cast<double>(spec.in_ch * spec.kernel_t * spec.kernel_f);
  init_uniform(params[w_].value, 1.0 / std::sqrt(fan_in), rng);
}

template <typename T>
Tensor<T> Conv2dCausal<T>::forward(const ModelParams<T>& p, const Tensor<T>& x,
                                   const Tensor<T>* history, ConvCache<T>* cache) const {
  const Shape4 s = x.shape();
  const std::size_t kt = spec_.kernel_t, kf = spec_.kernel_f;
  require(s.c == spec_.in_ch, "conv2d: expected " + std::to_string(spec_.in_ch) +
                                  " input channels, got " + std::to_string(s.c));
  const std::size_t fo_n = conv_out_freq(s.f, spec_);
  require(fo_n > 0, "conv2d: frequency axis too short");
  if (history)
    require(history->shape() == Shape4{s.n, s.c, kt - 1, s.f},
            "conv2d: history shape " + history->shape().str());

  const std::size_t k_rows = s.c * kt * kf;
  const std::size_t cols = s.t * fo_n;
  Tensor<T> y({s.n, spec_.out_ch, s.t, fo_n});
  CMapRM<T> w(p[w_].value.data(), ix(spec_.out_ch), ix(k_rows));
  const auto& bias = p[b_].value;
  if (cache) {
    cache->recorded = true;
    cache->in_shape = s;
    cache->cols.assign(s.n, {});
  }
  AlignedVector<T> col;
  for (std::size_t n = 0; n < s.n; ++n) {
    col.assign(k_rows * cols, T(0));
    for (std::size_t i = 0; i < s.c; ++i)
      for (std::size_t dt = 0; dt < kt; ++dt)
        for (std::size_t df = 0; df < kf; ++df) {
          T* dst = col.data() + ((i * kt + dt) * kf + df) * cols;
          for (std::size_t t = 0; t < s.t; ++t) {
            const long te = static_cast<long>(t + dt) - static_cast<long>(kt - 1);
            const T* src = nullptr;
            if (te >= 0)
              src = x.plane(n, i) + static_cast<std::size_t>(te) * s.f;
            else if (history)
              src = history->plane(n, i) + static_cast<std::size_t>(te + static_cast<long>(kt) - 1) * s.f;
            if (!src) continue;
            for (std::size_t fo = 0; fo < fo_n; ++fo) {
              const long fi = static_cast<long>(fo * spec_.stride_f + df) -
                              static_cast<long>(spec_.pad_f);
              if (fi >= 0 && fi < static_cast<long>(s.f))
                dst[t * fo_n + fo] = src[static_cast<std::size_t>(fi)];
            }
          }
        }
    CMapRM<T> colm(col.data(), ix(k_rows), ix(cols));
    MapRM<T> yn(y.plane(n, 0), ix(spec_.out_ch), ix(cols));
    yn.noalias() = w * colm;
    for (std::size_t o = 0; o < spec_.out_ch; ++o) yn.row(ix(o)).array() += bias[o];
    if (cache) cache->cols[n] = col;
  }
  return y;
}

template <typename T>
Tensor<T> Conv2dCausal<T>::backward(ModelParams<T>& p, const ConvCache<T>& cache,
                                    const Tensor<T>& dy) const {
  require_recorded(cache.recorded, "conv2d");
  const Shape4 s = cache.in_shape;
  const std::size_t kt = spec_.kernel_t, kf = spec_.kernel_f;
  const std::size_t fo_n = conv_out_freq(s.f, spec_);
  require(dy.shape() == Shape4{s.n, spec_.out_ch, s.t, fo_n}, "conv2d backward: dy shape");
  const std::size_t k_rows = s.c * kt * kf;
  const std::size_t cols = s.t * fo_n;
  CMapRM<T> w(p[w_].value.data(), ix(spec_.out_ch), ix(k_rows));
  MapRM<T> dw(p[w_].grad.data(), ix(spec_.out_ch), ix(k_rows));
  auto& db = p[b_].grad;
  Tensor<T> dx(s);
  MatRM<T> dcol(ix(k_rows), ix(cols));
  for (std::size_t n = 0; n < s.n; ++n) {
    CMapRM<T> dyn(dy.plane(n, 0), ix(spec_.out_ch), ix(cols));
    CMapRM<T> colm(cache.cols[n].data(), ix(k_rows), ix(cols));
    dw.noalias() += dyn * colm.transpose();
    for (std::size_t o = 0; o < spec_.out_ch; ++o) db[o] += dyn.row(ix(o)).sum();
    dcol.noalias() = w.transpose() * dyn;
    for (std::size_t i = 0; i < s.c; ++i)
      for (std::size_t dt = 0; dt < kt; ++dt)
        for (std::size_t df = 0; df < kf; ++df) {
          const T* src = dcol.data() + ((i * kt + dt) * kf + df) * cols;
          for (std::size_t t = 0; t < s.t; ++t) {
            const long te = static_cast<long>(t + dt) - static_cast<long>(kt - 1);
            if (te < 0) continue;
            T* dst = dx.plane(n, i) + static_cast<std::size_t>(te) * s.f;
            for (std::size_t fo = 0; fo < fo_n; ++fo) {
              const long fi = static_cast<long>(fo * spec_.stride_f + df) -
                              static_cast<long>(spec_.pad_f);
              if (fi >= 0 && fi < static_cast<long>(s.f))
                dst[static_cast<std::size_t>(fi)] += src[t * fo_n + fo];
            }
          }
        }
  }
  return dx;
}

template <typename T>
std::size_t Conv2dCausal<T>::macs_per_frame(std::size_t f_in) const {
  return conv_out_freq(f_in, spec_) * spec_.out_ch * spec_.in_ch * spec_.kernel_t *
         spec_.kernel_f;
}

// ---------------------------------------------------------------------------
// TConv2dCausal

template <typename T>
TConv2dCausal<T>::TConv2dCausal(ModelParams<T>& params, const std::string& prefix,
                                const TConvSpec& spec, Rng& rng)
    : spec_(spec) {
  const ConvSpec& c = spec.conv;
  w_ = params.add(prefix + ".weight", {c.kernel_t, c.in_ch, c.out_ch, c.kernel_f});
  b_ = params.add(prefix + ".bias", {c.out_ch});
  const double fan_in = static_cast<double>(c.in_ch * c.kernel_t * c.kernel_f);
  init_uniform(params[w_].value, 1.0 / std::sqrt(fan_in), rng);
}

template <typename T>
Tensor<T> TConv2dCausal<T>::forward(const ModelParams<T>& p, const Tensor<T>& x,
                                    const Tensor<T>* history, TConvCache<T>* cache) const {
  const ConvSpec& c = spec_.conv;
  const Shape4 s = x.shape();
  const std::size_t kt = c.kernel_t, kf = c.kernel_f;
  require(s.c == c.in_ch, "tconv2d: expected " + std::to_string(c.in_ch) +
                              " input channels, got " + std::to_string(s.c));
  const std::size_t full_f = (s.f - 1) * c.stride_f + kf;
  require(c.pad_f + spec_.out_f <= full_f,
          "tconv2d: cannot produce " + std::to_string(spec_.out_f) + " bins from " +
              std::to_string(s.f));
  if (history)
    require(history->shape() == Shape4{s.n, s.c, kt - 1, s.f},
            "tconv2d: history shape " + history->shape().str());

  const std::size_t te_n = s.t + kt - 1;
  Tensor<T> x_ext({s.n, s.c, te_n, s.f});
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t i = 0; i < s.c; ++i) {
      T* dst = x_ext.plane(n, i);
      if (history)
        std::copy_n(history->plane(n, i), (kt - 1) * s.f, dst);
      std::copy_n(x.plane(n, i), s.t * s.f, dst + (kt - 1) * s.f);
    }

  const std::size_t out_f = spec_.out_f;
  Tensor<T> y({s.n, c.out_ch, s.t, out_f});
  const std::size_t rows = c.out_ch * kf;
  const std::size_t cols = s.t * s.f;
  MatRM<T> ydt(ix(rows), ix(cols));
  for (std::size_t dt = 0; dt < kt; ++dt) {
    CMapRM<T> wdt(p[w_].value.data() + dt * c.in_ch * rows, ix(c.in_ch), ix(rows));
    for (std::size_t n = 0; n < s.n; ++n) {
      CMapStrided<T> xs(x_ext.plane(n, 0) + (kt - 1 - dt) * s.f, ix(c.in_ch), ix(cols),
                        Eigen::OuterStride<>(ix(te_n * s.f)));
      ydt.noalias() = wdt.transpose() * xs;
      for (std::size_t o = 0; o < c.out_ch; ++o)
        for (std::size_t df = 0; df < kf; ++df) {
          const T* src = ydt.data() + (o * kf + df) * cols;
          T* dst = y.plane(n, o);
          for (std::size_t t = 0; t < s.t; ++t)
            for (std::size_t f = 0; f < s.f; ++f) {
              const long fo = static_cast<long>(f * c.stride_f + df) - static_cast<long>(c.pad_f);
              if (fo >= 0 && fo < static_cast<long>(out_f))
                dst[t * out_f + static_cast<std::size_t>(fo)] += src[t * s.f + f];
            }
        }
    }
  }
  const auto& bias = p[b_].value;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < c.out_ch; ++o) {
      T* dst = y.plane(n, o);
      for (std::size_t k = 0; k < s.t * out_f; ++k) dst[k] += bias[o];
    }
  if (cache) {
    cache->recorded = true;
    cache->in_shape = s;
    cache->x_ext = std::move(x_ext);
  }
  return y;
}

template <typename T>
Tensor<T> TConv2dCausal<T>::backward(ModelParams<T>& p, const TConvCache<T>& cache,
                                     const Tensor<T>& dy) const {
  require_recorded(cache.recorded, "tconv2d");
  const ConvSpec& c = spec_.conv;
  const Shape4 s = cache.in_shape;
  const std::size_t kt = c.kernel_t, kf = c.kernel_f;
  const std::size_t out_f = spec_.out_f;
  require(dy.shape() == Shape4{s.n, c.out_ch, s.t, out_f}, "tconv2d backward: dy shape");
  const std::size_t te_n = s.t + kt - 1;
  const std::size_t rows = c.out_ch * kf;
  const std::size_t cols = s.t * s.f;
  Tensor<T> dx_ext({s.n, s.c, te_n, s.f});
  MatRM<T> dydt(ix(rows), ix(cols));
  MatRM<T> dxs(ix(c.in_ch), ix(cols));
  for (std::size_t dt = 0; dt < kt; ++dt) {
    CMapRM<T> wdt(p[w_].value.data() + dt * c.in_ch * rows, ix(c.in_ch), ix(rows));
    MapRM<T> dwdt(p[w_].grad.data() + dt * c.in_ch * rows, ix(c.in_ch), ix(rows));
    for (std::size_t n = 0; n < s.n; ++n) {
      for (std::size_t o = 0; o < c.out_ch; ++o)
        for (std::size_t df = 0; df < kf; ++df) {
          T* dst = dydt.data() + (o * kf + df) * cols;
          const T* src = dy.plane(n, o);
          for (std::size_t t = 0; t < s.t; ++t)
            for (std::size_t f = 0; f < s.f; ++f) {
              const long fo = static_cast<long>(f * c.stride_f + df) - static_cast<long>(c.pad_f);
              dst[t * s.f + f] = (fo >= 0 && fo < static_cast<long>(out_f))
                                     ? src[t * out_f + static_cast<std::size_t>(fo)]
                                     : T(0);
            }
        }
      CMapStrided<T> xs(cache.x_ext.plane(n, 0) + (kt - 1 - dt) * s.f, ix(c.in_ch), ix(cols),
                        Eigen::OuterStride<>(ix(te_n * s.f)));
      dwdt.noalias() += xs * dydt.transpose();
      dxs.noalias() = wdt * dydt;
      for (std::size_t i = 0; i < c.in_ch; ++i) {
        T* dst = dx_ext.plane(n, i) + (kt - 1 - dt) * s.f;
        const T* src = dxs.data() + i * cols;
        for (std::size_t k = 0; k < cols; ++k) dst[k] += src[k];
      }
    }
  }
  auto& db = p[b_].grad;
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t o = 0; o < c.out_ch; ++o) {
      const T* src = dy.plane(n, o);
      T acc = 0;
      for (std::size_t k = 0; k < s.t * out_f; ++k) acc += src[k];
      db[o] += acc;
    }
  return dx_ext.slice_time(kt - 1, s.t);
}

template <typename T>
std::size_t TConv2dCausal<T>::macs_per_frame(std::size_t f_in) const {
  const ConvSpec& c = spec_.conv;
  return f_in * c.in_ch * c.out_ch * c.kernel_t * c.kernel_f;
}

// ---------------------------------------------------------------------------
// BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(ModelParams<T>& params, const std::string& prefix,
                            std::size_t channels)
    : channels_(channels) {
  gamma_ = params.add(prefix + ".gamma", {channels});
  beta_ = params.add(prefix + ".beta", {channels});
  mean_ = params.add(prefix + ".running_mean", {channels}, false);
  var_ = params.add(prefix + ".running_var", {channels}, false);
  std::fill(params[gamma_].value.begin(), params[gamma_].value.end(), T(1));
  std::fill(params[var_].value.begin(), params[var_].value.end(), T(1));
}

template <typename T>
Tensor<T> BatchNorm2d<T>::forward(const ModelParams<T>& p, const Tensor<T>& x, Mode mode,
                                  BnCache<T>* cache) const {
  const Shape4 s = x.shape();
  require(s.c == channels_, "batchnorm: expected " + std::to_string(channels_) +
                                " channels, got " + std::to_string(s.c));
  const std::size_t plane = s.t * s.f;
  const std::size_t count = s.n * plane;
  Tensor<T> y(s);
  Tensor<T> xhat(cache ? s : Shape4{});
  AlignedVector<T> inv_std(s.c), bmean(s.c), bvar(s.c);
  const auto& gamma = p[gamma_].value;
  const auto& beta = p[beta_].value;
  for (std::size_t c = 0; c < s.c; ++c) {
    double mean, var;
    if (mode == Mode::kTrain) {
      double acc = 0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* src = x.plane(n, c);
        for (std::size_t k = 0; k < plane; ++k) acc += src[k];
      }
      mean = acc / static_cast<double>(count);
      double sq = 0;
      for (std::size_t n = 0; n < s.n; ++n) {
        const T* src = x.plane(n, c);
        for (std::size_t k = 0; k < plane; ++k) {
          const double d = src[k] - mean;
          sq += d * d;
        }
      }
      var = sq / static_cast<double>(count);
      bmean[c] = static_cast<T>(mean);
      bvar[c] = static_cast<T>(count > 1 ? sq / static_cast<double>(count - 1) : var);
    } else {
      mean = p[mean_].value[c];
      var = p[var_].value[c];
    }
    const T istd = static_cast<T>(1.0 / std::sqrt(var + kEps));
    const T m = static_cast<T>(mean);
    inv_std[c] = istd;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* src = x.plane(n, c);
      T* dst = y.plane(n, c);
      T* xh = cache ? xhat.plane(n, c) : nullptr;
      for (std::size_t k = 0; k < plane; ++k) {
        const T v = (src[k] - m) * istd;
        if (xh) xh[k] = v;
        dst[k] = gamma[c] * v + beta[c];
      }
    }
  }
  if (cache) {
    cache->recorded = true;
    cache->mode = mode;
    cache->xhat = std::move(xhat);
    cache->inv_std = std::move(inv_std);
    cache->batch_mean = std::move(bmean);
    cache->batch_var = std::move(bvar);
  }
  return y;
}

template <typename T>
void BatchNorm2d<T>::update_running(ModelParams<T>& p, const BnCache<T>& cache) const {
  require_recorded(cache.recorded, "batchnorm");
  if (cache.mode != Mode::kTrain) return;
  auto& rm = p[mean_].value;
  auto& rv = p[var_].value;
  const T mom = static_cast<T>(kMomentum);
  for (std::size_t c = 0; c < channels_; ++c) {
    rm[c] = (T(1) - mom) * rm[c] + mom * cache.batch_mean[c];
    rv[c] = (T(1) - mom) * rv[c] + mom * cache.batch_var[c];
  }
}

template <typename T>
Tensor<T> BatchNorm2d<T>::backward(ModelParams<T>& p, const BnCache<T>& cache,
                                   const Tensor<T>& dy) const {
  require_recorded(cache.recorded, "batchnorm");
  const Shape4 s = cache.xhat.shape();
  require(dy.shape() == s, "batchnorm backward: dy shape");
  const std::size_t plane = s.t * s.f;
  const double count = static_cast<double>(s.n * plane);
  const auto& gamma = p[gamma_].value;
  auto& dgamma = p[gamma_].grad;
  auto& dbeta = p[beta_].grad;
  Tensor<T> dx(s);
  for (std::size_t c = 0; c < s.c; ++c) {
    double sdy = 0, sdyx = 0;
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* g = dy.plane(n, c);
      const T* xh = cache.xhat.plane(n, c);
      for (std::size_t k = 0; k < plane; ++k) {
        sdy += g[k];
        sdyx += g[k] * xh[k];
      }
    }
    dgamma[c] += static_cast<T>(sdyx);
    dbeta[c] += static_cast<T>(sdy);
    const T scale = gamma[c] * cache.inv_std[c];
    for (std::size_t n = 0; n < s.n; ++n) {
      const T* g = dy.plane(n, c);
      const T* xh = cache.xhat.plane(n, c);
      T* dst = dx.plane(n, c);
      if (cache.mode == Mode::kTrain) {
        const T a = static_cast<T>(sdy / count);
        const T b = static_cast<T>(sdyx / count);
        for (std::size_t k = 0; k < plane; ++k) dst[k] = scale * (g[k] - a - xh[k] * b);
      } else {
        for (std::size_t k = 0; k < plane; ++k) dst[k] = scale * g[k];
      }
    }
  }
  return dx;
}

// ---------------------------------------------------------------------------
// PRelu

template <typename T>
PRelu<T>::PRelu(ModelParams<T>& params, const std::string& prefix, std::size_t channels)
    : channels_(channels) {
  slope_ = params.add(prefix + ".slope", {channels});
  std::fill(params[slope_].value.begin(), params[slope_].value.end(), T(0.25));
}

template <typename T>
void PRelu<T>::forward(const ModelParams<T>& p, std::span<const T> x, std::span<T> y,
                       const ChannelLayout& layout, PreluCache<T>* cache) const {
  require(layout.channels == channels_, "prelu: expected " + std::to_string(channels_) +
                                            " channels, got " + std::to_string(layout.channels));
  require(x.size() == layout.outer * layout.channels * layout.inner && y.size() == x.size(),
          "prelu: buffer size");
  const auto& a = p[slope_].value;
  std::size_t k = 0;
  for (std::size_t o = 0; o < layout.outer; ++o)
    for (std::size_t c = 0; c < layout.channels; ++c)
      for (std::size_t i = 0; i < layout.inner; ++i, ++k) y[k] = x[k] > T(0) ? x[k] : a[c] * x[k];
  if (cache) {
    cache->recorded = true;
    cache->layout = layout;
    cache->x.assign(x.begin(), x.end());
  }
}

template <typename T>
void PRelu<T>::backward(ModelParams<T>& p, const PreluCache<T>& cache, std::span<const T> dy,
                        std::span<T> dx) const {
  require_recorded(cache.recorded, "prelu");
  const auto& layout = cache.layout;
  require(dy.size() == cache.x.size() && dx.size() == dy.size(), "prelu backward: size");
  const auto& a = p[slope_].value;
  auto& da = p[slope_].grad;
  std::size_t k = 0;
  for (std::size_t o = 0; o < layout.outer; ++o)
    for (std::size_t c = 0; c < layout.channels; ++c) {
      T acc = 0;
      for (std::size_t i = 0; i < layout.inner; ++i, ++k) {
        const T xv = cache.x[k];
        if (xv > T(0)) {
          dx[k] = dy[k];
        } else {
          dx[k] = a[c] * dy[k];
          acc += dy[k] * xv;
        }
      }
      da[c] += acc;
    }
}

template <typename T>
Tensor<T> PRelu<T>::forward(const ModelParams<T>& p, const Tensor<T>& x,
                            PreluCache<T>* cache) const {
  Tensor<T> y(x.shape());
  const Shape4 s = x.shape();
  forward(p, x.span(), y.span(), ChannelLayout{s.n, s.c, s.t * s.f}, cache);
  return y;
}

template <typename T>
Tensor<T> PRelu<T>::backward(ModelParams<T>& p, const PreluCache<T>& cache,
                             const Tensor<T>& dy) const {
  Tensor<T> dx(dy.shape());
  backward(p, cache, dy.span(), dx.span());
  return dx;
}

// ---------------------------------------------------------------------------
// LayerNorm

template <typename T>
LayerNorm<T>::LayerNorm(ModelParams<T>& params, const std::string& prefix, std::size_t width)
    : width_(width) {
  gamma_ = params.add(prefix + ".gamma", {width});
  beta_ = params.add(prefix + ".beta", {width});
  std::fill(params[gamma_].value.begin(), params[gamma_].value.end(), T(1));
}

template <typename T>
void LayerNorm<T>::forward(const ModelParams<T>& p, std::span<const T> x, std::span<T> y,
                           LnCache<T>* cache) const {
  require(x.size() % width_ == 0 && y.size() == x.size(), "layernorm: buffer size");
  const std::size_t rows = x.size() / width_;
  const auto& g = p[gamma_].value;
  const auto& b = p[beta_].value;
  if (cache) {
    cache->recorded = true;
    cache->width = width_;
    cache->xhat.resize(x.size());
    cache->inv_std.resize(rows);
  }
  for (std::size_t r = 0; r < rows; ++r) {
    const T* src = x.data() + r * width_;
    T* dst = y.data() + r * width_;
    double mean = 0;
    for (std::size_t j = 0; j < width_; ++j) mean += src[j];
    mean /= static_cast<double>(width_);
    double var = 0;
    for (std::size_t j = 0; j < width_; ++j) {
      const double d = src[j] - mean;
      var += d * d;
    }
    var /= static_cast<double>(width_);
    const T istd = static_cast<T>(1.0 / std::sqrt(var + kEps));
    const T m = static_cast<T>(mean);
    for (std::size_t j = 0; j < width_; ++j) {
      const T xh = (src[j] - m) * istd;
      if (cache) cache->xhat[r * width_ + j] = xh;
      dst[j] = g[j] * xh + b[j];
    }
    if (cache) cache->inv_std[r] = istd;
  }
}

template <typename T>
void LayerNorm<T>::backward(ModelParams<T>& p, const LnCache<T>& cache, std::span<const T> dy,
                            std::span<T> dx) const {
  require_recorded(cache.recorded, "layernorm");
  require(dy.size() == cache.xhat.size() && dx.size() == dy.size(), "layernorm backward: size");
  const std::size_t rows = dy.size() / width_;
  const auto& g = p[gamma_].value;
  auto& dg = p[gamma_].grad;
  auto& db = p[beta_].grad;
  const double w = static_cast<double>(width_);
  for (std::size_t r = 0; r < rows; ++r) {
    const T* gy = dy.data() + r * width_;
    const T* xh = cache.xhat.data() + r * width_;
    double s1 = 0, s2 = 0;
    for (std::size_t j = 0; j < width_; ++j) {
      const double dxh = gy[j] * g[j];
      s1 += dxh;
      s2 += dxh * xh[j];
      dg[j] += gy[j] * xh[j];
      db[j] += gy[j];
    }
    const T a = static_cast<T>(s1 / w);
    const T b = static_cast<T>(s2 / w);
    T* dst = dx.data() + r * width_;
    for (std::size_t j = 0; j < width_; ++j)
      dst[j] = cache.inv_std[r] * (gy[j] * g[j] - a - xh[j] * b);
  }
}

template <typename T>
T sigmoid(T x) {
  // Split on sign so exp never overflows.
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

// ---------------------------------------------------------------------------
// Gru

template <typename T>
Gru<T>::Gru(ModelParams<T>& params, const std::string& prefix, std::size_t input_size,
            std::size_t hidden, Rng& rng)
    : input_(input_size), hidden_(hidden) {
  w_ih_ = params.add(prefix + ".w_ih", {3 * hidden, input_size});
  w_hh_ = params.add(prefix + ".w_hh", {3 * hidden, hidden});
  b_ih_ = params.add(prefix + ".b_ih", {3 * hidden});
  b_hh_ = params.add(prefix + ".b_hh", {3 * hidden});
  const double bound = 1.0 / std::sqrt(static_cast<double>(hidden));
  init_uniform(params[w_ih_].value, bound, rng);
  init_uniform(params[w_hh_].value, bound, rng);
}

template <typename T>
Sequence<T> Gru<T>::forward(const ModelParams<T>& p, const Sequence<T>& x, const T* h0,
                            T* h_last, GruCache<T>* cache, bool reverse) const {
  require(x.width == input_, "gru: expected input width " + std::to_string(input_) + ", got " +
                                 std::to_string(x.width));
  const std::size_t L = x.lanes, S = x.steps, H = hidden_;
  CMapRM<T> w_ih(p[w_ih_].value.data(), ix(3 * H), ix(input_));
  CMapRM<T> w_hh(p[w_hh_].value.data(), ix(3 * H), ix(H));
  const auto& b_ih = p[b_ih_].value;
  const auto& b_hh = p[b_hh_].value;

  CMapRM<T> xm(x.data.data(), ix(L * S), ix(input_));
  MatRM<T> gi = xm * w_ih.transpose();
  for (std::size_t r = 0; r < L * S; ++r)
    for (std::size_t j = 0; j < 3 * H; ++j) gi(ix(r), ix(j)) += b_ih[j];

  MatRM<T> h(ix(L), ix(H));
  if (h0)
    h = CMapRM<T>(h0, ix(L), ix(H));
  else
    h.setZero();
  MatRM<T> gh(ix(L), ix(3 * H));
  Sequence<T> y(L, S, H);
  if (cache) {
    cache->recorded = true;
    cache->reverse = reverse;
    cache->x = x;
    for (auto* v : {&cache->h_prev, &cache->r, &cache->z, &cache->n, &cache->hn})
      v->assign(S * L * H, T(0));
  }
  for (std::size_t k = 0; k < S; ++k) {
    const std::size_t s = reverse ? S - 1 - k : k;
    gh.noalias() = h * w_hh.transpose();
    for (std::size_t l = 0; l < L; ++l) {
      const T* gir = gi.data() + (l * S + s) * 3 * H;
      T* ghr = gh.data() + l * 3 * H;
      T* hr = h.data() + l * H;
      T* yr = y.row(l, s);
      const std::size_t base = (k * L + l) * H;
      for (std::size_t j = 0; j < H; ++j) {
        const T r = sigmoid(gir[j] + ghr[j] + b_hh[j]);
        const T z = sigmoid(gir[H + j] + ghr[H + j] + b_hh[H + j]);
        const T hn = ghr[2 * H + j] + b_hh[2 * H + j];
        const T nn = std::tanh(gir[2 * H + j] + r * hn);
        const T hp = hr[j];
        const T hnew = (T(1) - z) * nn + z * hp;
        if (cache) {
          cache->h_prev[base + j] = hp;
          cache->r[base + j] = r;
          cache->z[base + j] = z;
          cache->n[base + j] = nn;
          cache->hn[base + j] = hn;
        }
        yr[j] = hnew;
      }
      std::copy_n(yr, H, hr);
    }
  }
  if (h_last) std::copy_n(h.data(), L * H, h_last);
  return y;
}

template <typename T>
Sequence<T> Gru<T>::backward(ModelParams<T>& p, const GruCache<T>& cache,
                             const Sequence<T>& dy) const {
  require_recorded(cache.recorded, "gru");
  const Sequence<T>& x = cache.x;
  const std::size_t L = x.lanes, S = x.steps, H = hidden_;
  require(dy.lanes == L && dy.steps == S && dy.width == H, "gru backward: dy shape");
  CMapRM<T> w_ih(p[w_ih_].value.data(), ix(3 * H), ix(input_));
  CMapRM<T> w_hh(p[w_hh_].value.data(), ix(3 * H), ix(H));
  MapRM<T> dw_ih(p[w_ih_].grad.data(), ix(3 * H), ix(input_));
  MapRM<T> dw_hh(p[w_hh_].grad.data(), ix(3 * H), ix(H));
  auto& db_ih = p[b_ih_].grad;
  auto& db_hh = p[b_hh_].grad;

  MatRM<T> dgi = MatRM<T>::Zero(ix(L * S), ix(3 * H));
  MatRM<T> dh = MatRM<T>::Zero(ix(L), ix(H));
  MatRM<T> dh_direct(ix(L), ix(H));
  MatRM<T> dgh(ix(L), ix(3 * H));
  for (std::size_t kk = S; kk-- > 0;) {
    const std::size_t s = cache.reverse ? S - 1 - kk : kk;
    for (std::size_t l = 0; l < L; ++l) {
      const T* gy = dy.row(l, s);
      const std::size_t base = (kk * L + l) * H;
      T* dgir = dgi.data() + (l * S + s) * 3 * H;
      T* dghr = dgh.data() + l * 3 * H;
      for (std::size_t j = 0; j < H; ++j) {
        const T g = gy[j] + dh(ix(l), ix(j));
        const T z = cache.z[base + j], r = cache.r[base + j], nn = cache.n[base + j];
        const T hn = cache.hn[base + j], hp = cache.h_prev[base + j];
        const T dn = g * (T(1) - z);
        const T dz = g * (hp - nn);
        const T dan = dn * (T(1) - nn * nn);
        const T dar = dan * hn * r * (T(1) - r);
        const T daz = dz * z * (T(1) - z);
        dgir[j] = dar;
        dgir[H + j] = daz;
        dgir[2 * H + j] = dan;
        dghr[j] = dar;
        dghr[H + j] = daz;
        dghr[2 * H + j] = dan * r;
        dh_direct(ix(l), ix(j)) = g * z;
      }
    }
    CMapRM<T> hprev(cache.h_prev.data() + kk * L * H, ix(L), ix(H));
    dw_hh.noalias() += dgh.transpose() * hprev;
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t j = 0; j < 3 * H; ++j) db_hh[j] += dgh(ix(l), ix(j));
    dh = dh_direct;
    dh.noalias() += dgh * w_hh;
  }
  CMapRM<T> xm(x.data.data(), ix(L * S), ix(input_));
  dw_ih.noalias() += dgi.transpose() * xm;
  for (std::size_t r = 0; r < L * S; ++r)
    for (std::size_t j = 0; j < 3 * H; ++j) db_ih[j] += dgi(ix(r), ix(j));
  Sequence<T> dx(L, S, input_);
  MapRM<T>(dx.data.data(), ix(L * S), ix(input_)).noalias() = dgi * w_ih;
  return dx;
}

// ---------------------------------------------------------------------------
// BiGru

template <typename T>
BiGru<T>::BiGru(ModelParams<T>& params, const std::string& prefix, std::size_t input_size,
                std::size_t hidden, Rng& rng)
    : fwd_(params, prefix + ".fwd", input_size, hidden, rng),
      bwd_(params, prefix + ".bwd", input_size, hidden, rng) {}

template <typename T>
Sequence<T> BiGru<T>::forward(const ModelParams<T>& p, const Sequence<T>& x,
                              BiGruCache<T>* cache) const {
  Sequence<T> y = fwd_.forward(p, x, nullptr, nullptr, cache ? &cache->fwd : nullptr, false);
  Sequence<T> yb = bwd_.forward(p, x, nullptr, nullptr, cache ? &cache->bwd : nullptr, true);
  for (std::size_t k = 0; k < y.data.size(); ++k) y.data[k] += yb.data[k];
  return y;
}

template <typename T>
Sequence<T> BiGru<T>::backward(ModelParams<T>& p, const BiGruCache<T>& cache,
                               const Sequence<T>& dy) const {
  Sequence<T> dx = fwd_.backward(p, cache.fwd, dy);
  Sequence<T> dxb = bwd_.backward(p, cache.bwd, dy);
  for (std::size_t k = 0; k < dx.data.size(); ++k) dx.data[k] += dxb.data[k];
  return dx;
}

#define MPCRN_INSTANTIATE(T)                                                           \
  template class Conv2dCausal<T>;                                                      \
  template class TConv2dCausal<T>;                                                     \
  template class BatchNorm2d<T>;                                                       \
  template class PRelu<T>;                                                             \
  template class LayerNorm<T>;                                                         \
  template class Gru<T>;                                                               \
  template class BiGru<T>;                                                             \
  template T sigmoid<T>(T);                                                            \
  template Tensor<T> trailing_frames<T>(const Tensor<T>&, const Tensor<T>*, std::size_t);

MPCRN_INSTANTIATE(float)
MPCRN_INSTANTIATE(double)

#undef MPCRN_INSTANTIATE

}  // namespace mpcrn
