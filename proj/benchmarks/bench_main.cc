// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include <benchmark/benchmark.h>

#include <vector>

#include "mpcrn/dsp.h"
#include "mpcrn/layers.h"
#include "mpcrn/loss.h"
#include "mpcrn/model.h"
#include "mpcrn/pipeline.h"
#include "mpcrn/reconstruction.h"
#include "mpcrn/stream.h"

namespace {

using namespace mpcrn;

Waveform noise(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Waveform w;
  w.samples.resize(n);
  for (auto& v : w.samples) v = 0.1 * rng.normal();
  return w;
}

template <typename T>
Tensor<T> random_tensor(Shape4 s, Rng& rng) {
  Tensor<T> x(s);
  for (auto& v : x.vec()) v = static_cast<T>(rng.normal());
  return x;
}

void BM_Stft(benchmark::State& state) {
  const Waveform w = noise(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(stft(w));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_Stft)->Arg(16000)->Arg(48000);

void BM_StftRoundTrip(benchmark::State& state) {
  const Waveform w = noise(48000, 2);
  for (auto _ : state) benchmark::DoNotOptimize(istft(stft(w)));
}
BENCHMARK(BM_StftRoundTrip);

void BM_Conv2dCausal(benchmark::State& state) {
  ModelParams<float> p;
  Rng rng(3);
  const auto ch = static_cast<std::size_t>(state.range(0));
  const Conv2dCausal<float> conv(p, "c", ConvSpec{ch, 2 * ch, 5, 2, 2, 2}, rng);
  const auto x = random_tensor<float>({1, ch, 64, 129}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(conv.forward(p, x));
}
BENCHMARK(BM_Conv2dCausal)->Arg(4)->Arg(16)->Arg(64);

void BM_TConv2dCausal(benchmark::State& state) {
  ModelParams<float> p;
  Rng rng(4);
  const auto ch = static_cast<std::size_t>(state.range(0));
  const TConv2dCausal<float> tconv(p, "t", TConvSpec{ConvSpec{2 * ch, ch, 5, 2, 2, 2}, 129}, rng);
  const auto x = random_tensor<float>({1, 2 * ch, 64, 65}, rng);
  for (auto _ : state) benchmark::DoNotOptimize(tconv.forward(p, x));
}
BENCHMARK(BM_TConv2dCausal)->Arg(4)->Arg(16)->Arg(64);

void BM_GruStep(benchmark::State& state) {
  ModelParams<float> p;
  Rng rng(5);
  const auto h = static_cast<std::size_t>(state.range(0));
  const Gru<float> gru(p, "g", 256, h, rng);
  Sequence<float> x(1, 1, 256);
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  std::vector<float> h0(h, 0.1f), h1(h);
  for (auto _ : state) {
    benchmark::DoNotOptimize(gru.forward(p, x, h0.data(), h1.data()));
    std::swap(h0, h1);
  }
}
BENCHMARK(BM_GruStep)->Arg(32)->Arg(128);

void BM_BiGruSpectral(benchmark::State& state) {
  ModelParams<float> p;
  Rng rng(6);
  const BiGru<float> bigru(p, "b", 256, 64, rng);
  Sequence<float> x(1, 9, 256);
  for (auto& v : x.data) v = static_cast<float>(rng.normal());
  for (auto _ : state) benchmark::DoNotOptimize(bigru.forward(p, x));
}
BENCHMARK(BM_BiGruSpectral);

void BM_ReconstructPolar(benchmark::State& state) {
  const Waveform w = noise(48000, 7);
  const ComplexSpectrogram x = stft(w);
  const MaskTriple m = identity_mask(x.frames(), x.bins());
  for (auto _ : state) benchmark::DoNotOptimize(reconstruct_polar(m, x));
}
BENCHMARK(BM_ReconstructPolar);

void BM_StreamFrame(benchmark::State& state) {
  const ModelConfig cfg = state.range(0) ? ModelConfig{} : ModelConfig::toy();
  ModelParams<float> params;
  const Mpcrn<float> model(cfg, params, 8);
  StreamEnhancer<float> stream(model, params);
  const Waveform w = noise(384 + 128 * 64, 9);
  stream.prime(std::span(w.samples.data(), 384));
  std::size_t pos = 384;
  for (auto _ : state) {
    if (pos + 128 > w.samples.size()) pos = 384;
    benchmark::DoNotOptimize(stream.process_frame(std::span(w.samples.data() + pos, 128)));
    pos += 128;
  }
  state.counters["rtf"] = benchmark::Counter(
      static_cast<double>(state.iterations()) * 128.0 / 16000.0,
      benchmark::Counter::kIsRate | benchmark::Counter::kInvert);
}
BENCHMARK(BM_StreamFrame)->Arg(0)->Arg(1)->Unit(benchmark::kMicrosecond);

void BM_EnhanceOffline(benchmark::State& state) {
  ModelParams<float> params;
  const Mpcrn<float> model(ModelConfig::toy(), params, 10);
  const Waveform w = noise(48000, 11);
  for (auto _ : state) benchmark::DoNotOptimize(enhance_offline(model, params, w));
}
BENCHMARK(BM_EnhanceOffline)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
