// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
//
// RIFF/WAVE PCM16 I/O. Samples map to doubles as v / 32768.

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "mpcrn/dsp.h"

namespace mpcrn::tools {

struct WavData {
  int sample_rate = 0;
  int channels = 0;
  std::vector<std::int16_t> pcm;  // interleaved
};

// Accepts PCM16 (format 1 or WAVE_FORMAT_EXTENSIBLE with PCM subformat).
// Truncated or inconsistent files throw ParseError; other encodings throw
// InvalidInput.
WavData read_wav_pcm(std::istream& is);
void write_wav_pcm(std::ostream& os, const WavData& wav);

// Mono 16 kHz only: anything else throws InvalidInput. Nothing is resampled.
Waveform read_wav(const std::string& path, int expected_rate = 16000);
void write_wav(const std::string& path, const Waveform& w);

std::int16_t to_pcm16(double x);
double from_pcm16(std::int16_t v);
std::vector<std::int16_t> quantize(const std::vector<double>& x);

}  // namespace mpcrn::tools
