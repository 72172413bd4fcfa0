// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn_tools/cli.h"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <istream>
#include <json.hpp>
#include <ostream>
#include <sstream>

#include "mpcrn/checkpoint.h"
#include "mpcrn/error.h"
#include "mpcrn/gradcheck.h"
#include "mpcrn/metrics.h"
#include "mpcrn/pipeline.h"
#include "mpcrn/stream.h"
#include "mpcrn/trainer.h"
#include "mpcrn_tools/wav.h"

namespace mpcrn::tools {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

// NaN is not representable in JSON.
json num(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

ModelConfig model_by_name(const std::string& name) {
  if (name == "default") return ModelConfig{};
  if (name == "toy") return ModelConfig::toy();
  throw InvalidInput("unknown model '" + name + "' (expected default or toy)");
}

void write_f64(const std::string& path, const std::vector<double>& x) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("cannot create " + path);
  for (const double v : x) {
    std::uint64_t bits;
    std::memcpy(&bits, &v, sizeof bits);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>(bits >> (8 * i));
    os.write(b, 8);
  }
  if (!os) throw InvalidInput("write failed: " + path);
}

// ---------------------------------------------------------------------------

struct EnhanceArgs {
  std::string input, output, checkpoint, mode = "offline", recon = "polar", clean, raw_out;
  bool identity = false;
};

int cmd_enhance(const EnhanceArgs& a, std::ostream& out, std::ostream& err) {
  const ReconstructionMode recon = parse_mode(a.recon);
  if (a.mode != "offline" && a.mode != "stream")
    throw InvalidInput("--mode must be offline or stream");
  const Waveform in = read_wav(a.input);
  if (in.samples.empty()) throw InvalidInput(a.input + " contains no samples");

  const auto t0 = Clock::now();
  Waveform enhanced;
  if (a.identity) {
    if (a.mode != "offline") throw InvalidInput("--identity-mask runs offline only");
    enhanced = enhance_identity(in);
  } else {
    if (a.checkpoint.empty()) throw InvalidInput("--checkpoint is required without --identity-mask");
    const LoadedModel m = load_model(a.checkpoint);
    if (a.mode == "offline") {
      enhanced = enhance_offline(m.model, m.params, in, recon);
    } else {
      StreamEnhancer<float> stream(m.model, m.params, recon);
      enhanced = stream.run(in);
    }
  }
  const double elapsed = seconds_since(t0);
  for (const double v : enhanced.samples)
    if (!std::isfinite(v)) throw NumericalError("enhance: output contains NaN/Inf");
  write_wav(a.output, enhanced);
  if (!a.raw_out.empty()) write_f64(a.raw_out, enhanced.samples);

  const double audio = static_cast<double>(in.samples.size()) / in.sample_rate;
  json r = {{"command", "enhance"},
            {"input", a.input},
            {"output", a.output},
            {"samples", enhanced.samples.size()},
            {"mode", a.mode},
            {"recon", a.identity ? "identity" : std::string(mode_name(recon))},
            {"seconds", elapsed},
            {"rtf", elapsed / audio}};
  err << "enhanced " << a.input << " -> " << a.output << " (" << enhanced.samples.size()
      << " samples, " << a.mode << ", rtf " << std::setprecision(3) << elapsed / audio << ")\n";
  if (!a.clean.empty()) {
    const Waveform ref = read_wav(a.clean);
    if (ref.samples.size() != in.samples.size())
      throw InvalidInput("--clean reference length differs from the input");
    const double before = si_sdr(in, ref), after = si_sdr(enhanced, ref);
    r["si_sdr_noisy"] = before;
    r["si_sdr_enhanced"] = after;
    r["si_sdr_improvement"] = after - before;
    err << "SI-SDR " << std::fixed << std::setprecision(2) << before << " dB -> " << after
        << " dB\n";
  }
  out << r.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_stream(const std::string& checkpoint, const std::string& recon_text, std::istream& in,
               std::ostream& out, std::ostream& err) {
  const ReconstructionMode recon = parse_mode(recon_text);
  const LoadedModel m = load_model(checkpoint);
  StreamEnhancer<float> stream(m.model, m.params, recon);
  const std::size_t hop = stream.hop(), prime = stream.prime_size();
  const double latency_ms = 1000.0 * static_cast<double>(prime + hop) / 16000.0;
  err << json{{"event", "start"}, {"sample_rate", 16000}, {"hop", hop}, {"prime", prime},
              {"latency_ms", latency_ms}}.dump()
      << "\n";

  std::size_t read_total = 0, written = 0;
  double busy = 0.0;
  auto emit = [&](const std::vector<double>& y, std::size_t limit) {
    for (const double v : y) {
      if (written >= limit) break;
      const auto s = static_cast<std::uint16_t>(to_pcm16(v));
      const char b[2] = {static_cast<char>(s), static_cast<char>(s >> 8)};
      out.write(b, 2);
      ++written;
    }
    out.flush();
  };
  auto read_chunk = [&](std::vector<double>& buf) {
    std::size_t got = 0;
    char b[2];
    while (got < buf.size() && in.read(b, 2)) {
      const auto v = static_cast<std::int16_t>(static_cast<unsigned char>(b[0]) |
                                               static_cast<unsigned char>(b[1]) << 8);
      buf[got++] = from_pcm16(v);
    }
    std::fill(buf.begin() + static_cast<long>(got), buf.end(), 0.0);
    read_total += got;
    return got;
  };

  std::vector<double> head(prime), chunk(hop);
  const bool short_input = read_chunk(head) < prime;
  stream.prime(head);
  bool eof = short_input;
  const auto no_limit = static_cast<std::size_t>(-1);
  while (!eof) {
    const std::size_t got = read_chunk(chunk);
    if (got == 0) break;
    eof = got < hop;
    const auto t0 = Clock::now();
    const auto y = stream.process_frame(chunk);
    busy += seconds_since(t0);
    emit(y, no_limit);
    if (stream.frames_processed() % 125 == 0) {
      const double audio = static_cast<double>(stream.frames_processed() * hop) / 16000.0;
      err << json{{"event", "progress"}, {"frames", stream.frames_processed()},
                  {"rtf", busy / audio}}.dump()
          << "\n";
    }
  }
  if (stream.frames_processed() == 0) {
    std::fill(chunk.begin(), chunk.end(), 0.0);
    emit(stream.process_frame(chunk), read_total);
  }
  emit(stream.flush(), read_total);
  const double audio = static_cast<double>(read_total) / 16000.0;
  err << json{{"event", "end"}, {"frames", stream.frames_processed()},
              {"samples", written}, {"rtf", audio > 0 ? num(busy / audio) : json(nullptr)},
              {"latency_ms", latency_ms}}.dump()
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

struct TrainArgs {
  std::string config, seed, checkpoint, curve;
};

int cmd_train(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  const KvConfig kv = KvConfig::load(a.config);
  TrainJob job = parse_train_job(kv);
  if (!a.seed.empty() || !kv.has("seed")) {
    job.train.seed = resolve_seed(a.seed);
    job.data.seed = job.train.seed;
  }
  if (!a.checkpoint.empty()) job.train.checkpoint_path = a.checkpoint;
  if (!a.curve.empty()) job.train.curve_path = a.curve;

  const auto t0 = Clock::now();
  Trainer trainer(job.model, job.train, job.data);
  err << "training " << count_params(job.model) << " parameters, " << job.train.epochs
      << " epochs, batch " << job.train.batch_size << ", recon "
      << mode_name(job.train.recon) << "\n";
  const auto curve = trainer.run([&](const StepRecord& r) {
    if (r.step % 10 == 0 || r.step == 1)
      err << "step " << r.step << " loss " << std::setprecision(6) << r.train_loss << " lr "
          << r.lr << "\n";
  });
  json r = {{"command", "train"},
            {"steps", curve.size()},
            {"params", count_params(job.model)},
            {"seed", job.train.seed},
            {"final_lr", trainer.lr()},
            {"seconds", seconds_since(t0)},
            {"checkpoint", job.train.checkpoint_path},
            {"curve", job.train.curve_path}};
  if (!curve.empty()) {
    r["first_loss"] = num(curve.front().train_loss);
    r["final_loss"] = num(curve.back().train_loss);
    r["final_val_loss"] = num(curve.back().val_loss);
  }
  out << r.dump() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_gradcheck(const std::vector<std::string>& layers, const GradcheckOptions& opt,
                  std::ostream& out, std::ostream& err) {
  std::vector<GradcheckResult> results;
  if (layers.empty()) {
    results = gradcheck_all(opt);
  } else {
    for (const auto& l : layers) {
      auto r = gradcheck_layer(l, opt);
      results.insert(results.end(), r.begin(), r.end());
    }
  }
  bool all = true;
  json rows = json::array();
  for (const auto& r : results) {
    all = all && r.passed;
    rows.push_back({{"layer", r.layer},
                    {"shape", r.shape},
                    {"checked", r.checked},
                    {"max_rel_err", num(r.max_rel_err)},
                    {"worst", r.worst},
                    {"passed", r.passed}});
    err << (r.passed ? "ok   " : "FAIL ") << std::left << std::setw(24) << r.layer << " "
        << std::setw(36) << r.shape << " max rel err " << std::scientific << std::setprecision(2)
        << r.max_rel_err << std::defaultfloat << "\n";
  }
  out << json{{"command", "gradcheck"},
              {"tolerance", opt.tolerance},
              {"seed", opt.seed},
              {"passed", all},
              {"results", rows}}.dump()
      << "\n";
  return all ? kExitOk : kExitNumerical;
}

// ---------------------------------------------------------------------------

struct AblateArgs {
  std::size_t steps = 200, batch = 4, train_utterances = 32, eval_utterances = 8;
  double lr = 2e-4;
  std::vector<double> snr{0.0};
  std::string noise = "white", seed;
};

int cmd_ablate(const AblateArgs& a, std::ostream& out, std::ostream& err) {
  AblationOptions opt;
  const std::uint64_t seed = resolve_seed(a.seed);
  opt.train.lr = a.lr;
  opt.train.batch_size = a.batch;
  opt.train.max_steps = a.steps;
  opt.train.epochs = a.steps;  // max_steps ends the run first
  opt.train.train_utterances = a.train_utterances;
  opt.train.val_utterances = 4;
  opt.train.seed = seed;
  opt.data.snr_db = a.snr;
  opt.data.noise = {parse_noise(a.noise)};
  opt.data.seed = seed;
  opt.eval_utterances = a.eval_utterances;
  opt.train.validate();

  const auto t0 = Clock::now();
  const auto entries = run_ablation(opt, [&](ReconstructionMode m, const StepRecord& r) {
    if (r.step % 50 == 0)
      err << mode_name(m) << " step " << r.step << " loss " << std::setprecision(6)
          << r.train_loss << "\n";
  });
  json rows = json::array();
  double c = NAN, e = NAN;
  err << "mode    noisy SI-SDR  enhanced SI-SDR  improvement\n";
  for (const auto& en : entries) {
    rows.push_back({{"mode", mode_name(en.mode)},
                    {"steps", en.steps},
                    {"first_loss", num(en.first_loss)},
                    {"final_loss", num(en.final_loss)},
                    {"noisy_si_sdr", num(en.eval.noisy_si_sdr)},
                    {"enhanced_si_sdr", num(en.eval.enhanced_si_sdr)},
                    {"improvement", num(en.eval.improvement())}});
    if (en.mode == ReconstructionMode::kC) c = en.eval.enhanced_si_sdr;
    if (en.mode == ReconstructionMode::kE) e = en.eval.enhanced_si_sdr;
    err << std::left << std::setw(8) << mode_name(en.mode) << std::right << std::fixed
        << std::setprecision(2) << std::setw(12) << en.eval.noisy_si_sdr << std::setw(17)
        << en.eval.enhanced_si_sdr << std::setw(13) << en.eval.improvement()
        << std::defaultfloat << "\n";
  }
  out << json{{"command", "ablate"},
              {"seed", seed},
              {"steps", a.steps},
              {"batch", a.batch},
              {"lr", a.lr},
              {"seconds", seconds_since(t0)},
              {"modes", rows},
              {"c_e_gap_db", num(std::fabs(c - e))}}.dump()
      << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_bench(const std::string& model_name, double duration, std::size_t runs,
              const std::string& seed_text, std::ostream& out, std::ostream& err) {
  const ModelConfig cfg = model_by_name(model_name);
  const std::uint64_t seed = resolve_seed(seed_text);
  const RtfReport rep = benchmark_rtf(cfg, duration, runs, seed);
  const std::size_t params = count_params(cfg);
  const std::size_t macs_frame = count_macs_per_frame(cfg);
  const double macs_s = count_macs(cfg);
  out << json{{"command", "bench"},
              {"model", model_name},
              {"threads", 1},
              {"audio_seconds", rep.audio_seconds},
              {"run_seconds", rep.run_seconds},
              {"median_seconds", rep.median_seconds},
              {"rtf", rep.rtf},
              {"params", params},
              {"macs_per_frame", macs_frame},
              {"gmacs_per_second", macs_s / 1e9},
              {"caveats",
               {"PSM branch layout (GRU/BiGRU widths, LayerNorm+PReLU per branch, 1x1 fusion) "
                "is inferred; params and MACs depend on it",
                "MACs count multiply-accumulates of conv, transposed conv, GRU and fusion layers; "
                "normalization, activations, STFT and reconstruction are excluded",
                "frame rate 125 frames/s (8 ms hop at 16 kHz)",
                "RTF is single-threaded and specific to this machine"}}}
             .dump()
      << "\n";
  err << model_name << ": " << params << " params, " << std::setprecision(4) << macs_s / 1e9
      << " GMACs/s, RTF " << rep.rtf << " (median of " << rep.run_seconds.size() << " runs over "
      << rep.audio_seconds << " s)\n";
  return kExitOk;
}

int cmd_metrics(const std::string& estimate, const std::string& reference, std::ostream& out,
                std::ostream& err) {
  const Waveform est = read_wav(estimate), ref = read_wav(reference);
  const double s = si_sdr(est, ref), g = seg_snr(est, ref);
  out << json{{"command", "metrics"}, {"si_sdr", s}, {"seg_snr", g}}.dump() << "\n";
  err << "SI-SDR " << std::fixed << std::setprecision(2) << s << " dB, segSNR " << g << " dB\n";
  return kExitOk;
}

int cmd_init(const std::string& path, const std::string& model_name, const std::string& seed_text,
             std::ostream& out, std::ostream& err) {
  const ModelConfig cfg = model_by_name(model_name);
  const std::uint64_t seed = resolve_seed(seed_text);
  ModelParams<float> params;
  const Mpcrn<float> model(cfg, params, seed);
  save_checkpoint(path, make_checkpoint(cfg, params));
  out << json{{"command", "init"}, {"checkpoint", path}, {"model", model_name},
              {"seed", seed}, {"params", params.trainable_count()}}.dump()
      << "\n";
  err << "wrote " << path << "\n";
  return kExitOk;
}

}  // namespace

std::uint64_t resolve_seed(const std::string& flag_value) {
  std::string text = flag_value;
  const char* source = "--seed";
  if (text.empty()) {
    const char* env = std::getenv("MPCRN_SEED");
    if (env == nullptr || *env == '\0') return 0;
    text = env;
    source = "MPCRN_SEED";
  }
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    if (text.front() == '-') throw std::invalid_argument("negative");
    v = std::stoull(text, &pos, 10);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != text.size())
    throw InvalidInput(std::string(source) + " must be a non-negative integer, got '" + text +
                       "'");
  return v;
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
            std::ostream& err) {
  CLI::App app{"Speech enhancement with a causal convolutional-recurrent network"};
  app.name("mpcrn");
  app.require_subcommand(1);

  EnhanceArgs ea;
  auto* enhance = app.add_subcommand("enhance", "Enhance a 16 kHz mono PCM16 WAV file");
  enhance->add_option("-i,--input", ea.input, "Noisy input WAV")->required();
  enhance->add_option("-o,--output", ea.output, "Enhanced output WAV")->required();
  enhance->add_option("-c,--checkpoint", ea.checkpoint, "Model checkpoint");
  enhance->add_option("--mode", ea.mode, "offline or stream")->capture_default_str();
  enhance->add_option("--recon", ea.recon, "polar, r, c or e")->capture_default_str();
  enhance->add_option("--clean", ea.clean, "Clean reference WAV for SI-SDR");
  enhance->add_option("--raw-out", ea.raw_out, "Also write float64 LE samples before quantization");
  enhance->add_flag("--identity-mask", ea.identity, "Pass-through masks instead of a network");

  std::string stream_ckpt, stream_recon = "polar";
  auto* stream = app.add_subcommand("stream", "Raw PCM16 stdin -> stdout, JSON lines on stderr");
  stream->add_option("-c,--checkpoint", stream_ckpt, "Model checkpoint")->required();
  stream->add_option("--recon", stream_recon, "polar, r, c or e")->capture_default_str();

  TrainArgs ta;
  auto* train = app.add_subcommand("train", "Train on synthetic mixtures from a config file");
  train->add_option("config", ta.config, "key=value config file")->required();
  train->add_option("--seed", ta.seed, "Overrides the config seed");
  train->add_option("--checkpoint", ta.checkpoint, "Overrides the checkpoint path");
  train->add_option("--curve", ta.curve, "Overrides the loss-curve CSV path");

  std::vector<std::string> gc_layers;
  GradcheckOptions gc;
  std::string gc_seed;
  auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every backward pass");
  gradcheck->add_option("--layer", gc_layers, "Restrict to these layers");
  gradcheck->add_option("--shapes", gc.shapes, "Random shapes per layer")->capture_default_str();
  gradcheck->add_option("--tolerance", gc.tolerance, "Relative error threshold")
      ->capture_default_str();
  gradcheck->add_option("--seed", gc_seed, "Random seed");

  AblateArgs aa;
  auto* ablate = app.add_subcommand("ablate", "Train a toy model per reconstruction mode");
  ablate->add_option("--steps", aa.steps, "Training steps per mode")->capture_default_str();
  ablate->add_option("--batch", aa.batch, "Batch size")->capture_default_str();
  ablate->add_option("--lr", aa.lr, "Learning rate")->capture_default_str();
  ablate->add_option("--train-utterances", aa.train_utterances)->capture_default_str();
  ablate->add_option("--eval-utterances", aa.eval_utterances)->capture_default_str();
  ablate->add_option("--snr", aa.snr, "Mixture SNRs in dB")->capture_default_str();
  ablate->add_option("--noise", aa.noise, "white, pink or band")->capture_default_str();
  ablate->add_option("--seed", aa.seed, "Random seed");

  std::string bench_model = "default", bench_seed;
  double bench_duration = 3.0;
  std::size_t bench_runs = 5;
  auto* bench = app.add_subcommand("bench", "Real-time factor and model accounting");
  bench->add_option("--model", bench_model, "default or toy")->capture_default_str();
  bench->add_option("--duration", bench_duration, "Seconds of audio")->capture_default_str();
  bench->add_option("--runs", bench_runs, "Timed runs (at least 5)")->capture_default_str();
  bench->add_option("--seed", bench_seed, "Random seed");

  std::string m_est, m_ref;
  auto* metrics = app.add_subcommand("metrics", "SI-SDR and segmental SNR of two WAV files");
  metrics->add_option("estimate", m_est)->required();
  metrics->add_option("reference", m_ref)->required();

  std::string init_out, init_model = "default", init_seed;
  auto* init = app.add_subcommand("init", "Write a randomly initialized checkpoint");
  init->add_option("-o,--output", init_out, "Checkpoint path")->required();
  init->add_option("--model", init_model, "default or toy")->capture_default_str();
  init->add_option("--seed", init_seed, "Random seed");

  std::vector<std::string> argv_store{"mpcrn"};
  argv_store.insert(argv_store.end(), args.begin(), args.end());
  std::vector<const char*> argv;
  for (const auto& s : argv_store) argv.push_back(s.c_str());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    if (*enhance) return cmd_enhance(ea, out, err);
    if (*stream) return cmd_stream(stream_ckpt, stream_recon, in, out, err);
    if (*train) return cmd_train(ta, out, err);
    if (*gradcheck) {
      gc.seed = resolve_seed(gc_seed);
      return cmd_gradcheck(gc_layers, gc, out, err);
    }
    if (*ablate) return cmd_ablate(aa, out, err);
    if (*bench) return cmd_bench(bench_model, bench_duration, bench_runs, bench_seed, out, err);
    if (*metrics) return cmd_metrics(m_est, m_ref, out, err);
    if (*init) return cmd_init(init_out, init_model, init_seed, out, err);
  } catch (const NumericalError& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumerical;
  } catch (const InvalidInput& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const ShapeError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}

}  // namespace mpcrn::tools
