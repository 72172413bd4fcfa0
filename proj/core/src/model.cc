// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/model.h"

#include <cmath>
#include <sstream>

#include "mpcrn/error.h"
#include "mpcrn/kv_config.h"

namespace mpcrn {
namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ',';
    out += std::to_string(v[i]);
  }
  return out;
}

ConvSpec level_spec(const ModelConfig& cfg, std::size_t in, std::size_t out) {
  return ConvSpec{in, out, cfg.kernel_f, cfg.kernel_t, cfg.stride_f, cfg.pad_f};
}

// Temporal lanes: one per (batch, frequency), stepping over time.
template <typename T>
Sequence<T> to_temporal(const Tensor<T>& e) {
  const Shape4 s = e.shape();
  Sequence<T> seq(s.n * s.f, s.t, s.c);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t t = 0; t < s.t; ++t) {
        const T* src = e.plane(n, c) + t * s.f;
        for (std::size_t f = 0; f < s.f; ++f) seq.row(n * s.f + f, t)[c] = src[f];
      }
  return seq;
}

template <typename T>
Tensor<T> from_temporal(const Sequence<T>& seq, std::size_t batch, std::size_t freq) {
  const std::size_t ch = seq.width, frames = seq.steps;
  Tensor<T> out({batch, ch, frames, freq});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < frames; ++t) {
        T* dst = out.plane(n, c) + t * freq;
        for (std::size_t f = 0; f < freq; ++f) dst[f] = seq.row(n * freq + f, t)[c];
      }
  return out;
}

// Spectral lanes: one per (batch, frame), stepping over frequency.
template <typename T>
Sequence<T> to_spectral(const Tensor<T>& e) {
  const Shape4 s = e.shape();
  Sequence<T> seq(s.n * s.t, s.f, s.c);
  for (std::size_t n = 0; n < s.n; ++n)
    for (std::size_t c = 0; c < s.c; ++c)
      for (std::size_t t = 0; t < s.t; ++t) {
        const T* src = e.plane(n, c) + t * s.f;
        for (std::size_t f = 0; f < s.f; ++f) seq.row(n * s.t + t, f)[c] = src[f];
      }
  return seq;
}

template <typename T>
Tensor<T> from_spectral(const Sequence<T>& seq, std::size_t batch, std::size_t frames) {
  const std::size_t ch = seq.width, freq = seq.steps;
  Tensor<T> out({batch, ch, frames, freq});
  for (std::size_t n = 0; n < batch; ++n)
    for (std::size_t c = 0; c < ch; ++c)
      for (std::size_t t = 0; t < frames; ++t) {
        T* dst = out.plane(n, c) + t * freq;
        for (std::size_t f = 0; f < freq; ++f) dst[f] = seq.row(n * frames + t, f)[c];
      }
  return out;
}

// Layer norm + PReLU over rows of a sequence, in place.
template <typename T>
void norm_act(const ModelParams<T>& p, const LayerNorm<T>& ln, const PRelu<T>& act,
              Sequence<T>& seq, LnCache<T>* ln_cache, PreluCache<T>* act_cache) {
  AlignedVector<T> tmp(seq.data.size());
  ln.forward(p, seq.data, tmp, ln_cache);
  act.forward(p, tmp, seq.data, ChannelLayout{seq.lanes * seq.steps, seq.width, 1}, act_cache);
}

// A bias in front of train-mode batch norm is cancelled by the batch mean, so
// its gradient is exactly zero. Accumulating the roundoff instead lets RMSprop
// turn it into full-size random steps.
template <typename T, typename Conv, typename Cache>
Tensor<T> conv_backward_before_bn(ModelParams<T>& p, const Conv& conv, const Cache& cache,
                                  const BnCache<T>& bn, const Tensor<T>& dy) {
  if (bn.mode != Mode::kTrain) return conv.backward(p, cache, dy);
  AlignedVector<T>& bias_grad = p[conv.bias_id()].grad;
  const AlignedVector<T> saved = bias_grad;
  Tensor<T> dx = conv.backward(p, cache, dy);
  bias_grad = saved;
  return dx;
}

template <typename T>
void norm_act_backward(ModelParams<T>& p, const LayerNorm<T>& ln, const PRelu<T>& act,
                       Sequence<T>& grad, const LnCache<T>& ln_cache,
                       const PreluCache<T>& act_cache) {
  AlignedVector<T> tmp(grad.data.size());
  act.backward(p, act_cache, grad.data, tmp);
  ln.backward(p, ln_cache, tmp, grad.data);
}

template <typename T>
void add_into(Tensor<T>& dst, const Tensor<T>& src) {
  for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] += src.data()[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig

ModelConfig ModelConfig::toy() {
  ModelConfig cfg;
  cfg.enc_channels = {4, 8, 8, 8, 8};
  cfg.dec_channels = {8, 8, 8, 4, 3};
  cfg.psm_hidden = {8, 8, 8};
  return cfg;
}

void ModelConfig::validate() const {
  if (enc_channels.empty()) throw InvalidInput("model config: enc_channels is empty");
  if (enc_channels.size() != dec_channels.size())
    throw InvalidInput("model config: enc_channels and dec_channels differ in length");
  if (dec_channels.back() != 3)
    throw InvalidInput("model config: last decoder level must have 3 channels");
  for (auto v : enc_channels)
    if (v == 0) throw InvalidInput("model config: zero encoder channels");
  for (auto v : dec_channels)
    if (v == 0) throw InvalidInput("model config: zero decoder channels");
  for (auto v : psm_hidden)
    if (v == 0) throw InvalidInput("model config: zero PSM hidden units");
  if (input_channels != 2) throw InvalidInput("model config: input_channels must be 2");
  if (kernel_t < 1 || kernel_f < 1 || stride_f < 1)
    throw InvalidInput("model config: kernel and stride must be positive");
  (void)freq_chain();
}

std::vector<std::size_t> ModelConfig::freq_chain() const {
  std::vector<std::size_t> chain{freq_bins};
  for (std::size_t k = 0; k < enc_channels.size(); ++k) {
    const std::size_t next = conv_out_freq(chain.back(), level_spec(*this, 1, 1));
    if (next == 0) throw InvalidInput("model config: frequency axis collapses at level " +
                                      std::to_string(k));
    chain.push_back(next);
  }
  return chain;
}

std::string ModelConfig::to_text() const {
  std::ostringstream os;
  os << "enc_channels=" << join(enc_channels) << "\n"
     << "dec_channels=" << join(dec_channels) << "\n"
     << "psm_hidden=" << join(psm_hidden) << "\n"
     << "kernel_f=" << kernel_f << "\n"
     << "kernel_t=" << kernel_t << "\n"
     << "stride_f=" << stride_f << "\n"
     << "pad_f=" << pad_f << "\n"
     << "input_channels=" << input_channels << "\n"
     << "freq_bins=" << freq_bins << "\n";
  return os.str();
}

ModelConfig ModelConfig::from_text(std::string_view text) {
  const auto kv = KvConfig::parse(text);
  kv.check_known({"enc_channels", "dec_channels", "psm_hidden", "kernel_f", "kernel_t",
                  "stride_f", "pad_f", "input_channels", "freq_bins"});
  ModelConfig cfg;
  cfg.enc_channels = kv.get_sizes("enc_channels", cfg.enc_channels);
  cfg.dec_channels = kv.get_sizes("dec_channels", cfg.dec_channels);
  cfg.psm_hidden = kv.get_sizes("psm_hidden", cfg.psm_hidden);
  cfg.kernel_f = kv.get_size("kernel_f", cfg.kernel_f);
  cfg.kernel_t = kv.get_size("kernel_t", cfg.kernel_t);
  cfg.stride_f = kv.get_size("stride_f", cfg.stride_f);
  cfg.pad_f = kv.get_size("pad_f", cfg.pad_f);
  cfg.input_channels = kv.get_size("input_channels", cfg.input_channels);
  cfg.freq_bins = kv.get_size("freq_bins", cfg.freq_bins);
  cfg.validate();
  return cfg;
}

std::size_t count_params(const ModelConfig& cfg) {
  cfg.validate();
  const std::size_t k = cfg.kernel_f * cfg.kernel_t;
  std::size_t total = 0;
  // conv/tconv weight + bias, BN gamma/beta, PReLU slope
  auto block = [&](std::size_t in, std::size_t out, std::size_t taps) {
    return in * out * taps + out + 2 * out + out;
  };
  std::size_t in = cfg.input_channels;
  for (auto out : cfg.enc_channels) {
    total += block(in, out, k);
    in = out;
  }
  const std::size_t c = in;
  for (auto h : cfg.psm_hidden) {
    const std::size_t gru = 3 * h * (c + h) + 6 * h;
    total += gru;           // temporal GRU
    total += 2 * gru;       // spectral BiGRU
    total += 2 * (2 * h);   // two layer norms
    total += 2 * h;         // two PReLUs
    total += block(h, c, 1);  // 1x1 fusion conv + BN + PReLU
  }
  for (auto out : cfg.dec_channels) {
    total += block(in, out, k);
    in = out;
  }
  return total;
}

std::size_t count_macs_per_frame(const ModelConfig& cfg) {
  const auto chain = cfg.freq_chain();
  const std::size_t k = cfg.kernel_f * cfg.kernel_t;
  std::size_t macs = 0;
  std::size_t in = cfg.input_channels;
  for (std::size_t l = 0; l < cfg.enc_channels.size(); ++l) {
    macs += chain[l + 1] * in * cfg.enc_channels[l] * k;
    in = cfg.enc_channels[l];
  }
  const std::size_t c = in;
  const std::size_t f = chain.back();
  for (auto h : cfg.psm_hidden) {
    const std::size_t step = 3 * h * (c + h);
    macs += f * step;      // temporal GRU: f lanes, one step per frame
    macs += 2 * f * step;  // BiGRU: f steps per direction
    macs += f * h * c;     // 1x1 fusion conv
  }
  for (std::size_t l = 0; l < cfg.dec_channels.size(); ++l) {
    const std::size_t f_in = chain[chain.size() - 1 - l];
    macs += f_in * in * cfg.dec_channels[l] * k;
    in = cfg.dec_channels[l];
  }
  return macs;
}

double count_macs(const ModelConfig& cfg, double frames_per_second) {
  return static_cast<double>(count_macs_per_frame(cfg)) * frames_per_second;
}

// ---------------------------------------------------------------------------
// PsmBlock

template <typename T>
PsmBlock<T>::PsmBlock(ModelParams<T>& params, const std::string& prefix, std::size_t channels,
                      std::size_t hidden, Rng& rng)
    : channels_(channels),
      hidden_(hidden),
      gru_(params, prefix + ".temporal_gru", channels, hidden, rng),
      ln_t_(params, prefix + ".temporal_ln", hidden),
      act_t_(params, prefix + ".temporal_prelu", hidden),
      bigru_(params, prefix + ".spectral_bigru", channels, hidden, rng),
      ln_s_(params, prefix + ".spectral_ln", hidden),
      act_s_(params, prefix + ".spectral_prelu", hidden),
      fuse_(params, prefix + ".fuse.conv", ConvSpec{hidden, channels, 1, 1, 1, 0}, rng),
      bn_(params, prefix + ".fuse.bn", channels),
      act_(params, prefix + ".fuse.prelu", channels) {}

template <typename T>
Tensor<T> PsmBlock<T>::forward(const ModelParams<T>& p, const Tensor<T>& e, Mode mode,
                               PsmCache<T>* cache, AlignedVector<T>* temporal_state) const {
  return forward_stages(p, e, mode, cache, temporal_state, nullptr);
}

template <typename T>
Tensor<T> PsmBlock<T>::forward_stages(const ModelParams<T>& p, const Tensor<T>& e, Mode mode,
                                      PsmCache<T>* cache, AlignedVector<T>* temporal_state,
                                      Stages* stages) const {
  const Shape4 s = e.shape();
  if (s.c != channels_)
    throw ShapeError("psm: expected " + std::to_string(channels_) + " channels, got " +
                     std::to_string(s.c));
  if (temporal_state && temporal_state->size() != s.n * s.f * hidden_)
    throw ShapeError("psm: temporal state size " + std::to_string(temporal_state->size()));

  Sequence<T> yt = gru_.forward(p, to_temporal(e), temporal_state ? temporal_state->data() : nullptr,
                                temporal_state ? temporal_state->data() : nullptr,
                                cache ? &cache->gru : nullptr);
  norm_act(p, ln_t_, act_t_, yt, cache ? &cache->ln_t : nullptr, cache ? &cache->act_t : nullptr);
  Tensor<T> fused = from_temporal(yt, s.n, s.f);
  if (stages) stages->temporal = fused;

  Sequence<T> ys = bigru_.forward(p, to_spectral(e), cache ? &cache->bigru : nullptr);
  norm_act(p, ln_s_, act_s_, ys, cache ? &cache->ln_s : nullptr, cache ? &cache->act_s : nullptr);
  Tensor<T> spectral = from_spectral(ys, s.n, s.t);
  if (stages) stages->spectral = spectral;
  add_into(fused, spectral);

  Tensor<T> h = fuse_.forward(p, fused, nullptr, cache ? &cache->fuse : nullptr);
  h = bn_.forward(p, h, mode, cache ? &cache->bn : nullptr);
  h = act_.forward(p, h, cache ? &cache->act : nullptr);
  if (stages) stages->fused = h;
  if (cache) {
    cache->recorded = true;
    cache->in_shape = s;
  }
  return h;
}

template <typename T>
Tensor<T> PsmBlock<T>::backward(ModelParams<T>& p, const PsmCache<T>& cache,
                                const Tensor<T>& dy) const {
  if (!cache.recorded) throw UsageError("psm: backward without a recorded forward");
  const Shape4 s = cache.in_shape;
  Tensor<T> g = act_.backward(p, cache.act, dy);
  g = bn_.backward(p, cache.bn, g);
  const Tensor<T> d_fused = conv_backward_before_bn(p, fuse_, cache.fuse, cache.bn, g);

  Sequence<T> gt = to_temporal(d_fused);
  norm_act_backward(p, ln_t_, act_t_, gt, cache.ln_t, cache.act_t);
  Tensor<T> de = from_temporal(gru_.backward(p, cache.gru, gt), s.n, s.f);

  Sequence<T> gs = to_spectral(d_fused);
  norm_act_backward(p, ln_s_, act_s_, gs, cache.ln_s, cache.act_s);
  add_into(de, from_spectral(bigru_.backward(p, cache.bigru, gs), s.n, s.t));
  return de;
}

template <typename T>
void PsmBlock<T>::update_running(ModelParams<T>& p, const PsmCache<T>& cache) const {
  bn_.update_running(p, cache.bn);
}

template <typename T>
std::size_t PsmBlock<T>::macs_per_frame(std::size_t freq) const {
  return freq * (gru_.macs_per_step() + 2 * bigru_.forward_gru().macs_per_step() +
                 hidden_ * channels_);
}

// ---------------------------------------------------------------------------
// ModelState

template <typename T>
std::size_t ModelState<T>::bytes() const {
  std::size_t n = 0;
  for (const auto& h : enc_history) n += h.size();
  for (const auto& h : dec_history) n += h.size();
  for (const auto& s : psm_state) n += s.size();
  return n * sizeof(T);
}

template <typename T>
bool ModelState<T>::operator==(const ModelState& other) const {
  if (enc_history.size() != other.enc_history.size() ||
      dec_history.size() != other.dec_history.size() || psm_state != other.psm_state)
    return false;
  for (std::size_t i = 0; i < enc_history.size(); ++i)
    if (enc_history[i].shape() != other.enc_history[i].shape() ||
        enc_history[i].vec() != other.enc_history[i].vec())
      return false;
  for (std::size_t i = 0; i < dec_history.size(); ++i)
    if (dec_history[i].shape() != other.dec_history[i].shape() ||
        dec_history[i].vec() != other.dec_history[i].vec())
      return false;
  return true;
}

// ---------------------------------------------------------------------------
// Mpcrn

template <typename T>
Mpcrn<T>::Mpcrn(const ModelConfig& cfg, ModelParams<T>& params, std::uint64_t seed)
    : cfg_(cfg) {
  cfg_.validate();
  if (params.size() != 0) throw UsageError("Mpcrn: parameter collection must start empty");
  freq_ = cfg_.freq_chain();
  Rng rng(seed);
  std::size_t in = cfg_.input_channels;
  for (std::size_t l = 0; l < cfg_.enc_channels.size(); ++l) {
    const std::string pre = "enc" + std::to_string(l);
    const std::size_t out = cfg_.enc_channels[l];
    enc_conv_.emplace_back(params, pre + ".conv", level_spec(cfg_, in, out), rng);
    enc_bn_.emplace_back(params, pre + ".bn", out);
    enc_act_.emplace_back(params, pre + ".prelu", out);
    in = out;
  }
  for (std::size_t b = 0; b < cfg_.psm_hidden.size(); ++b)
    psm_.emplace_back(params, "psm" + std::to_string(b), in, cfg_.psm_hidden[b], rng);
  const std::size_t levels = cfg_.dec_channels.size();
  for (std::size_t l = 0; l < levels; ++l) {
    const std::string pre = "dec" + std::to_string(l);
    const std::size_t out = cfg_.dec_channels[l];
    TConvSpec spec{level_spec(cfg_, in, out), freq_[levels - 1 - l]};
    dec_conv_.emplace_back(params, pre + ".tconv", spec, rng);
    dec_bn_.emplace_back(params, pre + ".bn", out);
    dec_act_.emplace_back(params, pre + ".prelu", out);
    in = out;
  }
}

template <typename T>
ModelState<T> Mpcrn<T>::make_state(std::size_t batch) const {
  ModelState<T> st;
  const std::size_t hist = cfg_.kernel_t - 1;
  std::size_t in = cfg_.input_channels;
  for (std::size_t l = 0; l < enc_conv_.size(); ++l) {
    st.enc_history.emplace_back(Shape4{batch, in, hist, freq_[l]});
    in = cfg_.enc_channels[l];
  }
  for (const auto& b : psm_) st.psm_state.emplace_back(batch * freq_.back() * b.hidden(), T(0));
  const std::size_t levels = dec_conv_.size();
  for (std::size_t l = 0; l < levels; ++l) {
    st.dec_history.emplace_back(Shape4{batch, in, hist, freq_[levels - l]});
    in = cfg_.dec_channels[l];
  }
  return st;
}

template <typename T>
Tensor<T> Mpcrn<T>::forward(const ModelParams<T>& p, const Tensor<T>& x, Mode mode,
                            ModelTape<T>* tape, ModelState<T>* state) const {
  return run(p, x, mode, tape, state, nullptr);
}

template <typename T>
std::string Mpcrn<T>::first_non_finite_stage(const ModelParams<T>& p, const Tensor<T>& x,
                                             Mode mode) const {
  std::string bad;
  run(p, x, mode, nullptr, nullptr, &bad);
  return bad;
}

template <typename T>
Tensor<T> Mpcrn<T>::run(const ModelParams<T>& p, const Tensor<T>& x, Mode mode,
                        ModelTape<T>* tape, ModelState<T>* state, std::string* bad_stage) const {
  const Shape4 s = x.shape();
  if (s.c != cfg_.input_channels || s.f != cfg_.freq_bins)
    throw ShapeError("model input: expected (N, " + std::to_string(cfg_.input_channels) +
                     ", T, " + std::to_string(cfg_.freq_bins) + "), got " + s.str());
  if (state && (state->enc_history.size() != enc_conv_.size() ||
                state->dec_history.size() != dec_conv_.size() ||
                state->psm_state.size() != psm_.size()))
    throw ShapeError("model state does not match the model");
  if (tape) {
    tape->recorded = true;
    tape->mode = mode;
    tape->enc_conv.assign(enc_conv_.size(), {});
    tape->enc_bn.assign(enc_bn_.size(), {});
    tape->enc_act.assign(enc_act_.size(), {});
    tape->psm.assign(psm_.size(), {});
    tape->dec_conv.assign(dec_conv_.size(), {});
    tape->dec_bn.assign(dec_bn_.size(), {});
    tape->dec_act.assign(dec_act_.size(), {});
  }
  auto check = [&](const Tensor<T>& t, const std::string& name) {
    if (bad_stage && bad_stage->empty() && !t.all_finite()) *bad_stage = name;
  };
  auto staged = [&](const std::string& name, auto&& fn) {
    try {
      return fn();
    } catch (const ShapeError& e) {
      throw ShapeError(name + ": " + e.what());
    }
  };
  check(x, "input");

  const std::size_t hist = cfg_.kernel_t - 1;
  Tensor<T> h = x;
  for (std::size_t l = 0; l < enc_conv_.size(); ++l) {
    const std::string name = "enc" + std::to_string(l);
    const Tensor<T>* history = state ? &state->enc_history[l] : nullptr;
    Tensor<T> next_history;
    if (state) next_history = trailing_frames(h, history, hist);
    h = staged(name + ".conv", [&] {
      return enc_conv_[l].forward(p, h, history, tape ? &tape->enc_conv[l] : nullptr);
    });
    if (state) state->enc_history[l] = std::move(next_history);
    check(h, name + ".conv");
    h = staged(name + ".bn",
               [&] { return enc_bn_[l].forward(p, h, mode, tape ? &tape->enc_bn[l] : nullptr); });
    check(h, name + ".bn");
    h = enc_act_[l].forward(p, h, tape ? &tape->enc_act[l] : nullptr);
    check(h, name + ".prelu");
  }
  for (std::size_t b = 0; b < psm_.size(); ++b) {
    const std::string name = "psm" + std::to_string(b);
    typename PsmBlock<T>::Stages stages;
    h = staged(name, [&] {
      return psm_[b].forward_stages(p, h, mode, tape ? &tape->psm[b] : nullptr,
                                    state ? &state->psm_state[b] : nullptr,
                                    bad_stage ? &stages : nullptr);
    });
    if (bad_stage) {
      check(stages.temporal, name + ".temporal");
      check(stages.spectral, name + ".spectral");
      check(stages.fused, name + ".fuse");
    }
  }
  for (std::size_t l = 0; l < dec_conv_.size(); ++l) {
    const std::string name = "dec" + std::to_string(l);
    const Tensor<T>* history = state ? &state->dec_history[l] : nullptr;
    Tensor<T> next_history;
    if (state) next_history = trailing_frames(h, history, hist);
    h = staged(name + ".tconv", [&] {
      return dec_conv_[l].forward(p, h, history, tape ? &tape->dec_conv[l] : nullptr);
    });
    if (state) state->dec_history[l] = std::move(next_history);
    check(h, name + ".tconv");
    h = staged(name + ".bn",
               [&] { return dec_bn_[l].forward(p, h, mode, tape ? &tape->dec_bn[l] : nullptr); });
    check(h, name + ".bn");
    h = dec_act_[l].forward(p, h, tape ? &tape->dec_act[l] : nullptr);
    check(h, name + ".prelu");
  }

  const Shape4 hs = h.shape();
  if (hs.c != 3 || hs.t != s.t || hs.f != s.f)
    throw ShapeError("mask_head: decoder produced " + hs.str());
  const std::size_t plane = hs.t * hs.f;
  for (std::size_t n = 0; n < hs.n; ++n) {
    T* mag = h.plane(n, 0);
    for (std::size_t k = 0; k < plane; ++k) mag[k] = sigmoid(mag[k]);
    for (std::size_t c = 1; c < 3; ++c) {
      T* ph = h.plane(n, c);
      for (std::size_t k = 0; k < plane; ++k) ph[k] = std::tanh(ph[k]);
    }
  }
  check(h, "mask_head");
  if (tape) tape->output = h;
  return h;
}

template <typename T>
void Mpcrn<T>::update_running(ModelParams<T>& p, const ModelTape<T>& tape) const {
  if (!tape.recorded) throw UsageError("model: update_running without a recorded forward");
  if (tape.mode != Mode::kTrain) return;
  for (std::size_t l = 0; l < enc_bn_.size(); ++l) enc_bn_[l].update_running(p, tape.enc_bn[l]);
  for (std::size_t b = 0; b < psm_.size(); ++b) psm_[b].update_running(p, tape.psm[b]);
  for (std::size_t l = 0; l < dec_bn_.size(); ++l) dec_bn_[l].update_running(p, tape.dec_bn[l]);
}

template <typename T>
Tensor<T> Mpcrn<T>::backward(ModelParams<T>& p, const ModelTape<T>& tape,
                             const Tensor<T>& d_out) const {
  if (!tape.recorded) throw UsageError("model: backward without a recorded forward");
  const Tensor<T>& y = tape.output;
  if (d_out.shape() != y.shape())
    throw ShapeError("model backward: gradient shape " + d_out.shape().str() + " vs output " +
                     y.shape().str());
  const Shape4 s = y.shape();
  const std::size_t plane = s.t * s.f;
  Tensor<T> g(s);
  for (std::size_t n = 0; n < s.n; ++n) {
    for (std::size_t k = 0; k < plane; ++k) {
      const T m = y.plane(n, 0)[k];
      g.plane(n, 0)[k] = d_out.plane(n, 0)[k] * m * (T(1) - m);
    }
    for (std::size_t c = 1; c < 3; ++c)
      for (std::size_t k = 0; k < plane; ++k) {
        const T v = y.plane(n, c)[k];
        g.plane(n, c)[k] = d_out.plane(n, c)[k] * (T(1) - v * v);
      }
  }
  for (std::size_t l = dec_conv_.size(); l-- > 0;) {
    g = dec_act_[l].backward(p, tape.dec_act[l], g);
    g = dec_bn_[l].backward(p, tape.dec_bn[l], g);
    g = conv_backward_before_bn(p, dec_conv_[l], tape.dec_conv[l], tape.dec_bn[l], g);
  }
  for (std::size_t b = psm_.size(); b-- > 0;) g = psm_[b].backward(p, tape.psm[b], g);
  for (std::size_t l = enc_conv_.size(); l-- > 0;) {
    g = enc_act_[l].backward(p, tape.enc_act[l], g);
    g = enc_bn_[l].backward(p, tape.enc_bn[l], g);
    g = conv_backward_before_bn(p, enc_conv_[l], tape.enc_conv[l], tape.enc_bn[l], g);
  }
  return g;
}

template <typename T>
Tensor<T> spectrogram_to_input(const ComplexSpectrogram& spec) {
  const std::size_t frames = spec.frames(), bins = spec.bins();
  Tensor<T> x({1, 2, frames, bins});
  for (std::size_t t = 0; t < frames; ++t)
    for (std::size_t f = 0; f < bins; ++f) {
      x(0, 0, t, f) = static_cast<T>(spec.real(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)));
      x(0, 1, t, f) = static_cast<T>(spec.imag(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(f)));
    }
  return x;
}

template <typename T>
MaskTriple mask_triple(const Tensor<T>& out, std::size_t n) {
  const Shape4 s = out.shape();
  if (s.c != 3 || n >= s.n) throw ShapeError("mask_triple: output shape " + s.str());
  MaskTriple m;
  const auto rows = static_cast<Eigen::Index>(s.t), cols = static_cast<Eigen::Index>(s.f);
  m.mag_mask.resize(rows, cols);
  m.cirm_real.resize(rows, cols);
  m.cirm_imag.resize(rows, cols);
  for (Eigen::Index t = 0; t < rows; ++t)
    for (Eigen::Index f = 0; f < cols; ++f) {
      const auto ut = static_cast<std::size_t>(t), uf = static_cast<std::size_t>(f);
      m.mag_mask(t, f) = out(n, 0, ut, uf);
      m.cirm_real(t, f) = out(n, 1, ut, uf);
      m.cirm_imag(t, f) = out(n, 2, ut, uf);
    }
  return m;
}

template class PsmBlock<float>;
template class PsmBlock<double>;
template struct ModelState<float>;
template struct ModelState<double>;
template class Mpcrn<float>;
template class Mpcrn<double>;
template Tensor<float> spectrogram_to_input<float>(const ComplexSpectrogram&);
template Tensor<double> spectrogram_to_input<double>(const ComplexSpectrogram&);
template MaskTriple mask_triple<float>(const Tensor<float>&, std::size_t);
template MaskTriple mask_triple<double>(const Tensor<double>&, std::size_t);

}  // namespace mpcrn
