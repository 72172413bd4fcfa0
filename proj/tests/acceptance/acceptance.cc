// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// End-to-end acceptance suite. Prints one PASS/FAIL line per criterion and
// exits nonzero if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mpcrn/dsp.h"
#include "mpcrn/gradcheck.h"
#include "mpcrn/model.h"
#include "mpcrn/pipeline.h"
#include "mpcrn/reconstruction.h"
#include "mpcrn/stream.h"
#include "mpcrn_tools/cli.h"

namespace mpcrn {
namespace {

using Clock = std::chrono::steady_clock;
using json = nlohmann::json;

struct Outcome {
  bool pass = false;
  std::string detail;
};

Waveform noise(std::size_t n, Rng& rng, double scale) {
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = scale * rng.normal();
  return w;
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, f, a, b, c);
  return buf;
}

Outcome stft_round_trip() {
  Rng rng(101);
  const StftConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Waveform w = noise(48000, rng, rng.uniform(0.01, 1.0));
    const Waveform y = istft(stft(w, cfg));
    for (std::size_t n = cfg.win_len; n + cfg.win_len < w.samples.size(); ++n)
      worst = std::max(worst, std::fabs(y.samples[n] - w.samples[n]));
  }
  return {worst < 1e-6, fmt("max interior error %.3g over 100 signals", worst)};
}

Outcome oracle_masks() {
  Rng rng(102);
  StftConfig cfg;
  double worst = 0.0;
  for (int i = 0; i < 20; ++i) {
    const Waveform clean_w = noise(16000, rng, 0.1);
    Waveform noisy_w = clean_w;
    for (auto& v : noisy_w.samples) v += 0.1 * rng.normal();
    const auto s = stft(clean_w, cfg), x = stft(noisy_w, cfg);
    const auto rows = static_cast<Eigen::Index>(x.frames()), cols = static_cast<Eigen::Index>(x.bins());
    MaskTriple m{Plane(rows, cols), Plane(rows, cols), Plane(rows, cols)};
    for (Eigen::Index k = 0; k < x.real.size(); ++k) {
      const double ax = std::hypot(x.real.data()[k], x.imag.data()[k]);
      const double as = std::hypot(s.real.data()[k], s.imag.data()[k]);
      const double d = std::atan2(s.imag.data()[k], s.real.data()[k]) -
                       std::atan2(x.imag.data()[k], x.real.data()[k]);
      m.mag_mask.data()[k] = as / ax;
      m.cirm_real.data()[k] = std::cos(d);
      m.cirm_imag.data()[k] = std::sin(d);
    }
    const auto y = reconstruct_polar(m, x);
    worst = std::max({worst, (y.real - s.real).abs().maxCoeff(), (y.imag - s.imag).abs().maxCoeff()});
  }
  return {worst < 1e-9, fmt("max error %.3g over 20 mixtures", worst)};
}

Outcome triangle() {
  Rng rng(103);
  double worst = 0.0;
  for (int i = 0; i < 1000000; ++i) {
    double a, b;
    switch (i % 4) {
      case 0: a = rng.uniform(-1, 1), b = rng.uniform(-1, 1); break;
      case 1: a = 1e-12 * rng.normal(), b = 1e-12 * rng.normal(); break;
      case 2: a = std::ldexp(rng.normal(), -static_cast<int>(rng.uniform(0, 1000))), b = 0.0; break;
      default: a = (i % 8 == 3) ? 0.0 : 1e-300, b = (i % 16 == 3) ? 0.0 : -1e-300; break;
    }
    const auto [c, s] = triangle_correct(a, b);
    worst = std::max(worst, std::fabs(std::hypot(c, s) - 1.0));
  }
  return {worst < 1e-9, fmt("max |modulus - 1| %.3g over 1e6 inputs", worst)};
}

Outcome pattern_equivalence() {
  Rng rng(104);
  const int frames = 100, bins = 1000;
  ComplexSpectrogram x;
  x.real = Plane(frames, bins);
  x.imag = Plane(frames, bins);
  CartesianMask m{Plane(frames, bins), Plane(frames, bins)};
  for (Eigen::Index k = 0; k < x.real.size(); ++k) {
    x.real.data()[k] = rng.normal();
    x.imag.data()[k] = rng.normal();
    m.real.data()[k] = rng.uniform(-1, 1);
    m.imag.data()[k] = rng.uniform(-1, 1);
  }
  const auto c = reconstruct_cartesian(ReconstructionMode::kC, m, x);
  const auto e = reconstruct_cartesian(ReconstructionMode::kE, m, x);
  const double worst = std::max((c.real - e.real).abs().maxCoeff(), (c.imag - e.imag).abs().maxCoeff());
  return {worst < 1e-9, fmt("max |C - E| %.3g over 1e5 bins", worst)};
}

Outcome gradients() {
  const auto results = gradcheck_all();
  bool ok = true;
  double worst = 0.0;
  std::string failures;
  for (const auto& layer : gradcheck_layers()) {
    std::set<std::string> shapes;
    for (const auto& r : results)
      if (r.layer == layer) {
        shapes.insert(r.shape);
        worst = std::max(worst, r.max_rel_err);
        if (!r.passed || !(r.max_rel_err < 1e-4)) {
          ok = false;
          failures += " " + layer + "(" + r.shape + ")";
        }
      }
    if (shapes.size() < 3) {
      ok = false;
      failures += " " + layer + "(<3 shapes)";
    }
  }
  return {ok, fmt("%.0f layers, %.0f checks, max rel err %.3g", static_cast<double>(gradcheck_layers().size()),
                  static_cast<double>(results.size()), worst) + failures};
}

Outcome causality() {
  ModelParams<float> p;
  const ModelConfig cfg;
  const Mpcrn<float> model(cfg, p, 105);
  Rng rng(106);
  const std::size_t frames = 24;
  std::size_t compared = 0;
  for (int trial = 0; trial < 20; ++trial) {
    Tensor<float> x({1, 2, frames, cfg.freq_bins});
    for (auto& v : x.vec()) v = static_cast<float>(rng.normal());
    const auto t = static_cast<std::size_t>(rng.uniform(0, frames - 1));
    const auto y0 = model.forward(p, x, Mode::kEval);
    for (std::size_t c = 0; c < 2; ++c)
      for (std::size_t tt = t + 1; tt < frames; ++tt)
        for (std::size_t f = 0; f < cfg.freq_bins; ++f) x(0, c, tt, f) += static_cast<float>(rng.normal());
    const auto y1 = model.forward(p, x, Mode::kEval);
    bool later_changed = false;
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t tt = 0; tt < frames; ++tt)
        for (std::size_t f = 0; f < cfg.freq_bins; ++f) {
          if (tt <= t) {
            ++compared;
            if (y0(0, c, tt, f) != y1(0, c, tt, f))
              return {false, fmt("frame %.0f changed after perturbing frames > %.0f", double(tt), double(t))};
          } else if (y0(0, c, tt, f) != y1(0, c, tt, f)) {
            later_changed = true;
          }
        }
    if (t + 1 < frames && !later_changed) return {false, "perturbation had no effect"};
  }
  return {true, fmt("20 pairs, %.0f outputs identical", static_cast<double>(compared))};
}

Outcome streaming() {
  ModelParams<float> p;
  const Mpcrn<float> model(ModelConfig{}, p, 107);
  Rng rng(108);
  double worst = 0.0;
  StreamEnhancer<float> stream(model, p);
  for (int i = 0; i < 10; ++i) {
    const Waveform w = noise(48000, rng, 0.1);
    const Waveform a = stream.run(w), b = enhance_offline(model, p, w);
    if (a.samples.size() != b.samples.size()) return {false, "length mismatch"};
    for (std::size_t n = 0; n < a.samples.size(); ++n)
      worst = std::max(worst, std::fabs(a.samples[n] - b.samples[n]));
  }
  return {worst < 1e-5, fmt("max |stream - offline| %.3g over 10 signals", worst)};
}

// Shared by the training and ablation criteria: one ablate run with the
// default toy settings (200 steps per mode).
json ablation_report(std::string& error) {
  static json report;
  static std::string err_text;
  static bool done = false;
  if (!done) {
    done = true;
    std::istringstream in;
    std::ostringstream out, err;
    const int code = tools::run_cli({"ablate", "--seed", "1"}, in, out, err);
    if (code != 0) {
      err_text = "ablate exited with " + std::to_string(code) + ": " + err.str();
    } else {
      report = json::parse(out.str());
    }
  }
  error = err_text;
  return report;
}

Outcome toy_training() {
  std::string error;
  const json r = ablation_report(error);
  if (!error.empty()) return {false, error};
  for (const auto& m : r["modes"]) {
    if (m["mode"] != "polar") continue;
    if (m["final_loss"].is_null() || m["improvement"].is_null()) return {false, "non-finite result"};
    const double ratio = m["final_loss"].get<double>() / m["first_loss"].get<double>();
    const double gain = m["improvement"].get<double>();
    return {m["steps"] == 200 && ratio <= 0.5 && gain >= 3.0,
            fmt("%.0f steps, loss ratio %.3f, SI-SDR improvement %+.2f dB",
                m["steps"].get<double>(), ratio, gain)};
  }
  return {false, "polar mode missing from ablation"};
}

Outcome ablation() {
  std::string error;
  const json r = ablation_report(error);
  if (!error.empty()) return {false, error};
  std::set<std::string> seen;
  std::string detail;
  for (const auto& m : r["modes"]) {
    for (const char* key : {"first_loss", "final_loss", "noisy_si_sdr", "enhanced_si_sdr", "improvement"})
      if (m[key].is_null()) return {false, m["mode"].get<std::string>() + " has a non-finite " + key};
    seen.insert(m["mode"].get<std::string>());
    detail += m["mode"].get<std::string>() + fmt(" %+.3f dB, ", m["improvement"].get<double>());
  }
  if (seen != std::set<std::string>{"polar", "r", "c", "e"}) return {false, "missing modes"};
  if (r["c_e_gap_db"].is_null()) return {false, "C/E gap is not finite"};
  const double gap = r["c_e_gap_db"].get<double>();
  return {gap <= 0.01, detail + fmt("C/E gap %.3g dB", gap)};
}

Outcome accounting() {
  const ModelConfig cfg;
  const double params = static_cast<double>(count_params(cfg));
  const double gmacs = count_macs(cfg) / 1e9;
  const bool ok = params >= 1.6e6 && params <= 2.6e6 && std::fabs(gmacs - 2.02) <= 0.25 * 2.02;
  return {ok, fmt("%.0f parameters, %.3f GMACs/s (PSM branch widths and fusion are design choices)",
                  params, gmacs)};
}

Outcome real_time() {
  const RtfReport r = benchmark_rtf(ModelConfig{}, 3.0, 5, 109);
  return {r.rtf < 1.0, fmt("RTF %.3f (median of 5 runs, single thread)", r.rtf)};
}

}  // namespace
}  // namespace mpcrn

int main() {
  using namespace mpcrn;
  struct Criterion {
    const char* name;
    std::function<Outcome()> run;
  };
  const std::vector<Criterion> criteria{
      {"1 stft round trip", stft_round_trip},
      {"2 oracle masks", oracle_masks},
      {"3 triangle correction", triangle},
      {"4 C/E equivalence", pattern_equivalence},
      {"5 gradient checks", gradients},
      {"6 causality", causality},
      {"7 streaming equivalence", streaming},
      {"8 toy training", toy_training},
      {"9 ablation", ablation},
      {"10 model accounting", accounting},
      {"11 real time", real_time},
  };
  int failed = 0;
  for (const auto& c : criteria) {
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("%s  %-26s %s [%.1f s]\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str(), s);
    std::fflush(stdout);
    failed += o.pass ? 0 : 1;
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
