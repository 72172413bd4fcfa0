// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/trainer.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "mpcrn/checkpoint.h"
#include "mpcrn/error.h"
#include "mpcrn/metrics.h"
#include "mpcrn/pipeline.h"

namespace mpcrn {
namespace {

template <typename T>
struct Prepared {
  std::vector<ComplexSpectrogram> noisy, clean;
  Tensor<T> input;
};

template <typename T>
Prepared<T> prepare(const std::vector<MixPair>& batch) {
  if (batch.empty()) throw InvalidInput("train: empty batch");
  Prepared<T> p;
  const std::size_t len = batch.front().noisy.size();
  for (const auto& pair : batch) {
    if (pair.noisy.size() != len || pair.clean.size() != len)
      throw InvalidInput("train: batch items differ in length");
    p.noisy.push_back(stft(Waveform{pair.noisy, 16000}));
    p.clean.push_back(stft(Waveform{pair.clean, 16000}));
  }
  const std::size_t n = batch.size(), frames = p.noisy.front().frames(),
                    bins = p.noisy.front().bins();
  p.input = Tensor<T>({n, 2, frames, bins});
  for (std::size_t b = 0; b < n; ++b) {
    const auto& x = p.noisy[b];
    for (std::size_t t = 0; t < frames; ++t)
      for (std::size_t f = 0; f < bins; ++f) {
        const auto r = static_cast<Eigen::Index>(t), c = static_cast<Eigen::Index>(f);
        p.input(b, 0, t, f) = static_cast<T>(x.real(r, c));
        p.input(b, 1, t, f) = static_cast<T>(x.imag(r, c));
      }
  }
  return p;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto b = item.find_first_not_of(" \t");
    const auto e = item.find_last_not_of(" \t");
    if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
  }
  return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// Optimizer and scheduler

template <typename T>
void RmsProp<T>::step(ModelParams<T>& params, double lr) {
  if (v_.empty()) {
    for (const auto& p : params) v_.emplace_back(p.size(), T(0));
  }
  if (v_.size() != params.size()) throw UsageError("rmsprop: parameter set changed");
  std::size_t k = 0;
  for (auto& p : params) {
    auto& v = v_[k++];
    if (!p.trainable) continue;
    if (p.grad.size() != p.value.size() || v.size() != p.value.size())
      throw UsageError("rmsprop: missing gradient for " + p.name);
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i];
      if (!std::isfinite(g)) throw NumericalError("rmsprop: non-finite gradient in " + p.name);
      const double vi = alpha_ * v[i] + (1.0 - alpha_) * g * g;
      v[i] = static_cast<T>(vi);
      p.value[i] = static_cast<T>(p.value[i] - lr * g / (std::sqrt(vi) + eps_));
    }
  }
}

template class RmsProp<float>;
template class RmsProp<double>;

PlateauScheduler::PlateauScheduler(double lr, std::size_t patience, double decay)
    : lr_(lr), patience_(patience), decay_(decay) {
  if (!(lr >= 0.0)) throw InvalidInput("scheduler: lr must be non-negative");
  if (patience == 0) throw InvalidInput("scheduler: patience must be at least 1");
  if (!(decay > 0.0 && decay < 1.0)) throw InvalidInput("scheduler: decay must be in (0, 1)");
}

double PlateauScheduler::observe(double val_loss) {
  if (val_loss < best_) {
    best_ = val_loss;
    bad_ = 0;
  } else if (++bad_ >= patience_) {
    lr_ *= decay_;
    ++decays_;
    bad_ = 0;
  }
  return lr_;
}

// ---------------------------------------------------------------------------
// Configuration

void TrainConfig::validate() const {
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw InvalidInput("train: lr must be >= 0");
  if (!(rmsprop_alpha > 0.0 && rmsprop_alpha < 1.0))
    throw InvalidInput("train: rmsprop_alpha must be in (0, 1)");
  if (!(rmsprop_eps >= 0.0)) throw InvalidInput("train: rmsprop_eps must be >= 0");
  if (batch_size == 0) throw InvalidInput("train: batch_size must be positive");
  if (plateau_patience == 0) throw InvalidInput("train: plateau_patience must be >= 1");
  if (!(lr_decay > 0.0 && lr_decay < 1.0)) throw InvalidInput("train: lr_decay must be in (0, 1)");
  if (!(chunk_seconds > 0.0)) throw InvalidInput("train: chunk_seconds must be positive");
  if (train_utterances == 0) throw InvalidInput("train: train_utterances must be positive");
  if (val_utterances == 0) throw InvalidInput("train: val_utterances must be positive");
  weights.validate();
}

TrainJob parse_train_job(const KvConfig& kv) {
  kv.check_known({"model", "enc_channels", "dec_channels", "psm_hidden", "lr", "rmsprop_alpha",
                  "rmsprop_eps", "batch_size", "epochs", "max_steps", "plateau_patience",
                  "lr_decay", "chunk_seconds", "seed", "train_utterances", "val_utterances",
                  "utterance_seconds", "recon", "alpha_mag", "alpha_ri", "checkpoint_every",
                  "checkpoint", "curve", "snr_db", "noise", "min_harmonics", "max_harmonics",
                  "min_f0", "max_f0"});
  auto fail = [&](const std::string& key, const std::exception& e) -> ParseError {
    const auto it = kv.entries().find(key);
    const int line = it == kv.entries().end() ? 0 : it->second.second;
    return ParseError("line " + std::to_string(line) + ": " + key + ": " + e.what());
  };
  TrainJob job;
  const std::string base = kv.get_string("model", "default");
  if (base == "toy") {
    job.model = ModelConfig::toy();
  } else if (base != "default") {
    const auto it = kv.entries().find("model");
    throw ParseError("line " + std::to_string(it->second.second) +
                     ": model must be 'default' or 'toy'");
  }
  job.model.enc_channels = kv.get_sizes("enc_channels", job.model.enc_channels);
  job.model.dec_channels = kv.get_sizes("dec_channels", job.model.dec_channels);
  job.model.psm_hidden = kv.get_sizes("psm_hidden", job.model.psm_hidden);

  TrainConfig& t = job.train;
  t.lr = kv.get_double("lr", t.lr);
  t.rmsprop_alpha = kv.get_double("rmsprop_alpha", t.rmsprop_alpha);
  t.rmsprop_eps = kv.get_double("rmsprop_eps", t.rmsprop_eps);
  t.batch_size = kv.get_size("batch_size", t.batch_size);
  t.epochs = kv.get_size("epochs", t.epochs);
  t.max_steps = kv.get_size("max_steps", t.max_steps);
  t.plateau_patience = kv.get_size("plateau_patience", t.plateau_patience);
  t.lr_decay = kv.get_double("lr_decay", t.lr_decay);
  t.chunk_seconds = kv.get_double("chunk_seconds", t.chunk_seconds);
  t.seed = static_cast<std::uint64_t>(kv.get_size("seed", t.seed));
  t.train_utterances = kv.get_size("train_utterances", t.train_utterances);
  t.val_utterances = kv.get_size("val_utterances", t.val_utterances);
  t.utterance_seconds = kv.get_double("utterance_seconds", t.utterance_seconds);
  t.weights.alpha_mag = kv.get_double("alpha_mag", t.weights.alpha_mag);
  t.weights.alpha_ri = kv.get_double("alpha_ri", t.weights.alpha_ri);
  t.checkpoint_every = kv.get_size("checkpoint_every", t.checkpoint_every);
  t.checkpoint_path = kv.get_string("checkpoint", t.checkpoint_path);
  t.curve_path = kv.get_string("curve", t.curve_path);
  try {
    t.recon = parse_mode(kv.get_string("recon", "polar"));
  } catch (const InvalidInput& e) {
    throw fail("recon", e);
  }

  SynthMixSpec& d = job.data;
  d.snr_db = kv.get_doubles("snr_db", d.snr_db);
  if (kv.has("noise")) {
    d.noise.clear();
    try {
      for (const auto& name : split_list(kv.get_string("noise", ""))) d.noise.push_back(parse_noise(name));
    } catch (const InvalidInput& e) {
      throw fail("noise", e);
    }
  }
  d.min_harmonics = kv.get_size("min_harmonics", d.min_harmonics);
  d.max_harmonics = kv.get_size("max_harmonics", d.max_harmonics);
  d.min_f0 = kv.get_double("min_f0", d.min_f0);
  d.max_f0 = kv.get_double("max_f0", d.max_f0);
  d.seed = t.seed;

  try {
    job.model.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("model configuration: ") + e.what());
  }
  try {
    t.validate();
    d.validate();
  } catch (const InvalidInput& e) {
    throw ParseError(std::string("training configuration: ") + e.what());
  }
  return job;
}

TrainJob load_train_job(const std::string& path) { return parse_train_job(KvConfig::load(path)); }

void write_curve_csv(std::ostream& os, const std::vector<StepRecord>& curve) {
  os << "step,train_loss,val_loss,lr\n";
  os << std::setprecision(9);
  for (const auto& r : curve) {
    os << r.step << ',' << r.train_loss << ',';
    if (!std::isnan(r.val_loss)) os << r.val_loss;
    os << ',' << r.lr << '\n';
  }
}

void save_curve_csv(const std::string& path, const std::vector<StepRecord>& curve) {
  std::ofstream os(path);
  if (!os) throw InvalidInput("cannot open " + path + " for writing");
  write_curve_csv(os, curve);
}

template <typename T>
EvalReport evaluate_si_sdr(const Mpcrn<T>& model, const ModelParams<T>& params,
                           const std::vector<MixPair>& pairs, ReconstructionMode mode) {
  if (pairs.empty()) throw InvalidInput("evaluate: no utterances");
  EvalReport r;
  for (const auto& pair : pairs) {
    const Waveform noisy{pair.noisy, 16000};
    const Waveform enhanced = enhance_offline(model, params, noisy, mode);
    r.noisy_si_sdr += si_sdr(pair.noisy, pair.clean);
    r.enhanced_si_sdr += si_sdr(enhanced.samples, pair.clean);
  }
  r.noisy_si_sdr /= static_cast<double>(pairs.size());
  r.enhanced_si_sdr /= static_cast<double>(pairs.size());
  return r;
}

// ---------------------------------------------------------------------------
// Trainer

template <typename T>
BasicTrainer<T>::BasicTrainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
                              const SynthMixSpec& data)
    : model_cfg_(model_cfg),
      cfg_(train_cfg),
      data_(data),
      model_(model_cfg, params_, train_cfg.seed),
      opt_(train_cfg.rmsprop_alpha, train_cfg.rmsprop_eps),
      scheduler_(train_cfg.lr, train_cfg.plateau_patience, train_cfg.lr_decay),
      rng_(train_cfg.seed ^ 0x9e3779b97f4a7c15ULL) {
  cfg_.validate();
  SynthMixSpec train_spec = data_;
  train_spec.count = cfg_.train_utterances;
  train_spec.duration_s = std::max(cfg_.utterance_seconds, cfg_.chunk_seconds);
  train_spec.seed = data_.seed * 2 + 1;
  train_pool_ = synth_batch(train_spec);
  SynthMixSpec val_spec = data_;
  val_spec.count = cfg_.val_utterances;
  val_spec.duration_s = cfg_.chunk_seconds;
  val_spec.seed = data_.seed * 2 + 2;
  val_pool_ = synth_batch(val_spec);
}

template <typename T>
double BasicTrainer<T>::batch_loss(const std::vector<MixPair>& batch, Mode mode) const {
  const Prepared<T> p = prepare<T>(batch);
  const Tensor<T> out = model_.forward(params_, p.input, mode);
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b)
    loss += loss_total(apply_reconstruction(out, b, cfg_.recon, p.noisy[b]), p.clean[b],
                       cfg_.weights);
  return loss / static_cast<double>(batch.size());
}

template <typename T>
double BasicTrainer<T>::train_step(const std::vector<MixPair>& batch, double lr) {
  const Prepared<T> p = prepare<T>(batch);
  ModelTape<T> tape;
  const Tensor<T> out = model_.forward(params_, p.input, Mode::kTrain, &tape);
  const std::size_t n = batch.size();
  const double scale = 1.0 / static_cast<double>(n);
  Tensor<T> d_out(out.shape());
  double loss = 0.0;
  bool recon_ok = true;
  for (std::size_t b = 0; b < n; ++b) {
    const ComplexSpectrogram s_hat = apply_reconstruction(out, b, cfg_.recon, p.noisy[b]);
    if (!s_hat.real.allFinite() || !s_hat.imag.allFinite()) recon_ok = false;
    LossValue lv = loss_total_grad(s_hat, p.clean[b], cfg_.weights);
    loss += lv.value * scale;
    lv.d_real *= scale;
    lv.d_imag *= scale;
    const std::size_t frames = out.shape().t, bins = out.shape().f;
    auto store = [&](std::size_t c, const Plane& g) {
      T* dst = d_out.plane(b, c);
      for (std::size_t k = 0; k < frames * bins; ++k) dst[k] = static_cast<T>(g.data()[k]);
    };
    if (cfg_.recon == ReconstructionMode::kPolar) {
      const MaskTriple g =
          reconstruct_polar_backward(mask_triple(out, b), p.noisy[b], lv.d_real, lv.d_imag);
      store(0, g.mag_mask);
      store(1, g.cirm_real);
      store(2, g.cirm_imag);
    } else {
      const CartesianMask g = reconstruct_cartesian_backward(
          cfg_.recon, cartesian_mask(out, b), p.noisy[b], lv.d_real, lv.d_imag);
      store(1, g.real);
      store(2, g.imag);
    }
  }
  if (!std::isfinite(loss)) {
    std::string stage = model_.first_non_finite_stage(params_, p.input, Mode::kTrain);
    if (stage.empty()) stage = recon_ok ? "loss" : "reconstruction";
    throw NumericalError("non-finite value first produced at stage '" + stage + "'");
  }
  params_.zero_grad();
  model_.backward(params_, tape, d_out);
  model_.update_running(params_, tape);
  opt_.step(params_, lr);
  return loss;
}

template <typename T>
double BasicTrainer<T>::validation_loss() const {
  double total = 0.0;
  for (std::size_t start = 0; start < val_pool_.size(); start += cfg_.batch_size) {
    const std::size_t end = std::min(val_pool_.size(), start + cfg_.batch_size);
    const std::vector<MixPair> batch(val_pool_.begin() + static_cast<long>(start),
                                     val_pool_.begin() + static_cast<long>(end));
    total += batch_loss(batch, Mode::kEval) * static_cast<double>(batch.size());
  }
  return total / static_cast<double>(val_pool_.size());
}

template <typename T>
std::vector<MixPair> BasicTrainer<T>::crop_batch(const std::vector<std::size_t>& idx) {
  const auto len = static_cast<std::size_t>(std::llround(cfg_.chunk_seconds * data_.sample_rate));
  std::vector<MixPair> batch;
  for (auto i : idx) {
    const MixPair& src = train_pool_[i];
    const std::size_t off = rng_.below(src.clean.size() - len + 1);
    MixPair c;
    c.snr_db = src.snr_db;
    c.noise = src.noise;
    c.noisy.assign(src.noisy.begin() + static_cast<long>(off),
                   src.noisy.begin() + static_cast<long>(off + len));
    c.clean.assign(src.clean.begin() + static_cast<long>(off),
                   src.clean.begin() + static_cast<long>(off + len));
    batch.push_back(std::move(c));
  }
  return batch;
}

template <typename T>
void BasicTrainer<T>::save_checkpoint_now() const {
  if (!cfg_.checkpoint_path.empty())
    save_checkpoint(cfg_.checkpoint_path, make_checkpoint(model_cfg_, params_));
}

template <typename T>
std::vector<StepRecord> BasicTrainer<T>::run(const std::function<void(const StepRecord&)>& on_step) {
  std::vector<StepRecord> curve;
  std::size_t step = 0;
  double last_val = std::numeric_limits<double>::quiet_NaN();
  bool done = cfg_.max_steps != 0 && step >= cfg_.max_steps;
  for (std::size_t epoch = 0; epoch < cfg_.epochs && !done; ++epoch) {
    std::vector<std::size_t> order(train_pool_.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng_.below(i)]);
    for (std::size_t start = 0; start < order.size() && !done; start += cfg_.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg_.batch_size);
      const std::vector<std::size_t> idx(order.begin() + static_cast<long>(start),
                                         order.begin() + static_cast<long>(end));
      const double lr = scheduler_.lr();
      StepRecord rec;
      rec.step = ++step;
      rec.lr = lr;
      rec.train_loss = train_step(crop_batch(idx), lr);
      rec.val_loss = last_val;
      done = cfg_.max_steps != 0 && step >= cfg_.max_steps;
      const bool epoch_end = end == order.size() || done;
      if (epoch_end) {
        last_val = validation_loss();
        rec.val_loss = last_val;
        scheduler_.observe(last_val);
      }
      curve.push_back(rec);
      if (on_step) on_step(rec);
      if (cfg_.checkpoint_every && step % cfg_.checkpoint_every == 0) save_checkpoint_now();
    }
  }
  save_checkpoint_now();
  if (!cfg_.curve_path.empty()) save_curve_csv(cfg_.curve_path, curve);
  return curve;
}

namespace {

template <typename T>
AblationEntry ablate_one(const ModelConfig& model, const TrainConfig& cfg, const SynthMixSpec& data,
                         const std::vector<MixPair>& eval_set,
                         const std::function<void(const StepRecord&)>& on_step) {
  BasicTrainer<T> trainer(model, cfg, data);
  const auto curve = trainer.run(on_step);
  AblationEntry e;
  e.mode = cfg.recon;
  e.steps = curve.size();
  if (!curve.empty()) {
    e.first_loss = curve.front().train_loss;
    e.final_loss = curve.back().train_loss;
  }
  e.eval = evaluate_si_sdr(trainer.model(), trainer.params(), eval_set, cfg.recon);
  return e;
}

}  // namespace

std::vector<AblationEntry> run_ablation(
    const AblationOptions& opt,
    const std::function<void(ReconstructionMode, const StepRecord&)>& on_step) {
  if (opt.eval_utterances == 0) throw InvalidInput("ablation: eval_utterances must be positive");
  SynthMixSpec eval_spec = opt.data;
  eval_spec.count = opt.eval_utterances;
  eval_spec.duration_s = opt.train.chunk_seconds;
  eval_spec.seed = opt.data.seed * 2 + 3;
  const std::vector<MixPair> eval_set = synth_batch(eval_spec);
  std::vector<AblationEntry> out;
  for (const auto mode : opt.modes) {
    TrainConfig cfg = opt.train;
    cfg.recon = mode;
    cfg.checkpoint_path.clear();
    cfg.curve_path.clear();
    const auto report = [&](ReconstructionMode m) {
      return [&, m](const StepRecord& r) {
        if (on_step) on_step(m, r);
      };
    };
    out.push_back(opt.double_precision
                      ? ablate_one<double>(opt.model, cfg, opt.data, eval_set, report(mode))
                      : ablate_one<float>(opt.model, cfg, opt.data, eval_set, report(mode)));
  }
  return out;
}

template class BasicTrainer<float>;
template class BasicTrainer<double>;
template EvalReport evaluate_si_sdr(const Mpcrn<float>&, const ModelParams<float>&,
                                    const std::vector<MixPair>&, ReconstructionMode);
template EvalReport evaluate_si_sdr(const Mpcrn<double>&, const ModelParams<double>&,
                                    const std::vector<MixPair>&, ReconstructionMode);

}  // namespace mpcrn
