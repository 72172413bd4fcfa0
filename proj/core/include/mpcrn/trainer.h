// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <limits>
#include <string>
#include <string_view>
#include <vector>

#include "mpcrn/kv_config.h"
#include "mpcrn/loss.h"
#include "mpcrn/model.h"
#include "mpcrn/reconstruction.h"
#include "mpcrn/synth.h"

namespace mpcrn {

// v <- alpha v + (1 - alpha) g^2;  theta <- theta - lr g / (sqrt(v) + eps).
// Only trainable parameters are touched.
template <typename T>
class RmsProp {
 public:
  RmsProp(double alpha = 0.99, double eps = 1e-8) : alpha_(alpha), eps_(eps) {}

  // Throws UsageError if a gradient buffer does not match its parameter and
  // NumericalError on non-finite gradients.
  void step(ModelParams<T>& params, double lr);
  const std::vector<AlignedVector<T>>& square_avg() const { return v_; }

 private:
  double alpha_, eps_;
  std::vector<AlignedVector<T>> v_;
};

// Multiplies the learning rate by `decay` once the best validation loss has
// not strictly improved for `patience` consecutive observations.
class PlateauScheduler {
 public:
  PlateauScheduler(double lr, std::size_t patience = 6, double decay = 0.5);

  // Records one epoch's validation loss and returns the learning rate to use next.
  double observe(double val_loss);
  double lr() const { return lr_; }
  std::size_t decays() const { return decays_; }
  double best() const { return best_; }

 private:
  double lr_;
  std::size_t patience_;
  double decay_;
  double best_ = std::numeric_limits<double>::infinity();
  std::size_t bad_ = 0;
  std::size_t decays_ = 0;
};

struct TrainConfig {
  double lr = 2e-4;
  double rmsprop_alpha = 0.99;
  double rmsprop_eps = 1e-8;
  std::size_t batch_size = 16;
  std::size_t epochs = 100;
  std::size_t max_steps = 0;  // 0: no limit
  std::size_t plateau_patience = 6;
  double lr_decay = 0.5;
  double chunk_seconds = 3.0;
  std::uint64_t seed = 0;
  // Utterance pools drawn from the synthetic generator.
  std::size_t train_utterances = 64;
  std::size_t val_utterances = 8;
  double utterance_seconds = 4.0;
  ReconstructionMode recon = ReconstructionMode::kPolar;
  LossWeights weights;
  std::size_t checkpoint_every = 0;  // steps; 0: only at the end
  std::string checkpoint_path;
  std::string curve_path;

  // Throws InvalidInput when a field is out of range.
  void validate() const;
};

// Everything a training run needs, parsed from one key=value file.
struct TrainJob {
  ModelConfig model;
  TrainConfig train;
  SynthMixSpec data;
};

// Keys: model (default|toy), enc_channels, dec_channels, psm_hidden, the
// TrainConfig field names, recon, alpha_mag, alpha_ri, checkpoint, curve,
// snr_db, noise, min_harmonics, max_harmonics, min_f0, max_f0. Unknown keys and
// malformed values throw ParseError with the line number.
TrainJob parse_train_job(const KvConfig& kv);
TrainJob load_train_job(const std::string& path);

struct StepRecord {
  std::size_t step = 0;
  double train_loss = 0.0;
  // NaN until the first validation pass.
  double val_loss = std::numeric_limits<double>::quiet_NaN();
  double lr = 0.0;
};

void write_curve_csv(std::ostream& os, const std::vector<StepRecord>& curve);
void save_curve_csv(const std::string& path, const std::vector<StepRecord>& curve);

struct EvalReport {
  double noisy_si_sdr = 0.0;     // mean over utterances
  double enhanced_si_sdr = 0.0;
  double improvement() const { return enhanced_si_sdr - noisy_si_sdr; }
};

template <typename T>
EvalReport evaluate_si_sdr(const Mpcrn<T>& model, const ModelParams<T>& params,
                           const std::vector<MixPair>& pairs, ReconstructionMode mode);

// T is the network precision (float or double); spectra, losses and
// reconstructions are always computed in double.
template <typename T>
class BasicTrainer {
 public:
  // Builds the model (initialized from train.seed) and the train/validation pools.
  BasicTrainer(const ModelConfig& model_cfg, const TrainConfig& train_cfg,
               const SynthMixSpec& data);

  const Mpcrn<T>& model() const { return model_; }
  ModelParams<T>& params() { return params_; }
  const ModelParams<T>& params() const { return params_; }
  const TrainConfig& config() const { return cfg_; }
  const std::vector<MixPair>& train_pool() const { return train_pool_; }
  const std::vector<MixPair>& val_pool() const { return val_pool_; }
  double lr() const { return scheduler_.lr(); }

  // Loss on a batch of equal-length pairs without touching parameters.
  double batch_loss(const std::vector<MixPair>& batch, Mode mode) const;
  // One optimizer step; returns the loss before the update. Throws
  // NumericalError naming the first stage that produced NaN/Inf.
  double train_step(const std::vector<MixPair>& batch, double lr);
  double validation_loss() const;

  // Runs epochs until cfg.epochs or cfg.max_steps, writing the curve and
  // checkpoints when paths are configured. `on_step` may be empty.
  std::vector<StepRecord> run(const std::function<void(const StepRecord&)>& on_step = {});

 private:
  std::vector<MixPair> crop_batch(const std::vector<std::size_t>& idx);
  void save_checkpoint_now() const;

  ModelConfig model_cfg_;
  TrainConfig cfg_;
  SynthMixSpec data_;
  ModelParams<T> params_;
  Mpcrn<T> model_;
  RmsProp<T> opt_;
  PlateauScheduler scheduler_;
  Rng rng_;
  std::vector<MixPair> train_pool_;
  std::vector<MixPair> val_pool_;
};

using Trainer = BasicTrainer<float>;

// Trains one model per reconstruction mode from the same initialization and
// data, then scores each on a held-out synthetic set.
struct AblationOptions {
  ModelConfig model = ModelConfig::toy();
  TrainConfig train;
  SynthMixSpec data;
  std::size_t eval_utterances = 8;
  // Trains the networks in double instead of float.
  bool double_precision = false;
  std::vector<ReconstructionMode> modes{ReconstructionMode::kPolar, ReconstructionMode::kR,
                                        ReconstructionMode::kC, ReconstructionMode::kE};
};

struct AblationEntry {
  ReconstructionMode mode = ReconstructionMode::kPolar;
  std::size_t steps = 0;
  double first_loss = 0.0;
  double final_loss = 0.0;
  EvalReport eval;
};

std::vector<AblationEntry> run_ablation(
    const AblationOptions& opt,
    const std::function<void(ReconstructionMode, const StepRecord&)>& on_step = {});

}  // namespace mpcrn
