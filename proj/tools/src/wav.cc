// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn_tools/wav.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "mpcrn/error.h"

namespace mpcrn::tools {
namespace {

std::uint32_t le32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | static_cast<std::uint32_t>(p[1]) << 8 |
         static_cast<std::uint32_t>(p[2]) << 16 | static_cast<std::uint32_t>(p[3]) << 24;
}
std::uint16_t le16(const unsigned char* p) {
  return static_cast<std::uint16_t>(p[0] | p[1] << 8);
}

void put32(std::ostream& os, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v), static_cast<char>(v >> 8), static_cast<char>(v >> 16),
                     static_cast<char>(v >> 24)};
  os.write(b, 4);
}
void put16(std::ostream& os, std::uint16_t v) {
  const char b[2] = {static_cast<char>(v), static_cast<char>(v >> 8)};
  os.write(b, 2);
}

void read_exact(std::istream& is, unsigned char* dst, std::size_t n, const char* what) {
  is.read(reinterpret_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw ParseError(std::string("wav: truncated ") + what);
}

// KSDATAFORMAT_SUBTYPE_PCM after the leading format tag.
constexpr std::array<unsigned char, 14> kPcmGuidTail = {0x00, 0x00, 0x00, 0x00, 0x10, 0x00, 0x80,
                                                        0x00, 0x00, 0xAA, 0x00, 0x38, 0x9B, 0x71};

}  // namespace

WavData read_wav_pcm(std::istream& is) {
  unsigned char hdr[12];
  read_exact(is, hdr, 12, "RIFF header");
  if (std::memcmp(hdr, "RIFF", 4) != 0 || std::memcmp(hdr + 8, "WAVE", 4) != 0)
    throw ParseError("wav: not a RIFF/WAVE file");

  WavData wav;
  bool have_fmt = false;
  int bits = 0;
  std::size_t block_align = 0;
  for (;;) {
    unsigned char ch[8];
    is.read(reinterpret_cast<char*>(ch), 8);
    if (is.gcount() == 0) break;
    if (is.gcount() != 8) throw ParseError("wav: truncated chunk header");
    const std::uint32_t size = le32(ch + 4);
    if (std::memcmp(ch, "fmt ", 4) == 0) {
      if (size < 16 || size > 1024) throw ParseError("wav: bad fmt chunk size");
      std::vector<unsigned char> f(size + (size & 1));
      read_exact(is, f.data(), f.size(), "fmt chunk");
      std::uint16_t format = le16(f.data());
      wav.channels = le16(f.data() + 2);
      wav.sample_rate = static_cast<int>(le32(f.data() + 4));
      block_align = le16(f.data() + 12);
      bits = le16(f.data() + 14);
      if (format == 0xFFFE) {
        if (size < 40) throw ParseError("wav: short WAVE_FORMAT_EXTENSIBLE header");
        format = le16(f.data() + 24);
        if (!std::equal(kPcmGuidTail.begin(), kPcmGuidTail.end(), f.begin() + 26))
          throw InvalidInput("wav: unsupported extensible subformat");
      }
      if (format != 1) throw InvalidInput("wav: only PCM encoding is supported");
      if (bits != 16)
        throw InvalidInput("wav: only 16-bit samples are supported, got " + std::to_string(bits));
      if (wav.channels <= 0) throw ParseError("wav: zero channels");
      if (block_align != static_cast<std::size_t>(wav.channels) * 2)
        throw ParseError("wav: inconsistent block alignment");
      have_fmt = true;
    } else if (std::memcmp(ch, "data", 4) == 0) {
      if (!have_fmt) throw ParseError("wav: data chunk before fmt chunk");
      if (size % block_align != 0) throw ParseError("wav: data size not a whole number of frames");
      std::vector<unsigned char> raw(size);
      read_exact(is, raw.data(), size, "data chunk");
      wav.pcm.resize(size / 2);
      for (std::size_t i = 0; i < wav.pcm.size(); ++i)
        wav.pcm[i] = static_cast<std::int16_t>(le16(raw.data() + 2 * i));
      return wav;
    } else {
      is.ignore(static_cast<std::streamsize>(size) + (size & 1));
      if (!is) throw ParseError("wav: truncated chunk");
    }
  }
  throw ParseError(have_fmt ? "wav: missing data chunk" : "wav: missing fmt chunk");
}

void write_wav_pcm(std::ostream& os, const WavData& wav) {
  if (wav.channels <= 0 || wav.sample_rate <= 0)
    throw InvalidInput("wav: channels and sample rate must be positive");
  const std::uint64_t data = wav.pcm.size() * 2;
  if (data + 36 > 0xFFFFFFFFULL) throw InvalidInput("wav: too large for RIFF");
  const auto ch = static_cast<std::uint16_t>(wav.channels);
  os.write("RIFF", 4);
  put32(os, static_cast<std::uint32_t>(36 + data));
  os.write("WAVEfmt ", 8);
  put32(os, 16);
  put16(os, 1);
  put16(os, ch);
  put32(os, static_cast<std::uint32_t>(wav.sample_rate));
  put32(os, static_cast<std::uint32_t>(wav.sample_rate) * ch * 2);
  put16(os, static_cast<std::uint16_t>(ch * 2));
  put16(os, 16);
  os.write("data", 4);
  put32(os, static_cast<std::uint32_t>(data));
  for (const auto v : wav.pcm) put16(os, static_cast<std::uint16_t>(v));
  if (!os) throw InvalidInput("wav: write failed");
}

Waveform read_wav(const std::string& path, int expected_rate) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("wav: cannot open " + path);
  const WavData wav = read_wav_pcm(is);
  if (wav.channels != 1)
    throw InvalidInput("wav: " + path + " has " + std::to_string(wav.channels) +
                       " channels; only mono is supported");
  if (wav.sample_rate != expected_rate)
    throw InvalidInput("wav: " + path + " is " + std::to_string(wav.sample_rate) +
                       " Hz; expected " + std::to_string(expected_rate) + " Hz (no resampling)");
  Waveform w;
  w.sample_rate = wav.sample_rate;
  w.samples.resize(wav.pcm.size());
  std::transform(wav.pcm.begin(), wav.pcm.end(), w.samples.begin(), from_pcm16);
  return w;
}

void write_wav(const std::string& path, const Waveform& w) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw InvalidInput("wav: cannot create " + path);
  write_wav_pcm(os, WavData{w.sample_rate, 1, quantize(w.samples)});
}

std::int16_t to_pcm16(double x) {
  if (!std::isfinite(x)) throw NumericalError("wav: non-finite sample");
  const double v = std::nearbyint(x * 32768.0);
  return static_cast<std::int16_t>(std::clamp(v, -32768.0, 32767.0));
}

double from_pcm16(std::int16_t v) { return v / 32768.0; }

std::vector<std::int16_t> quantize(const std::vector<double>& x) {
  std::vector<std::int16_t> out(x.size());
  std::transform(x.begin(), x.end(), out.begin(), to_pcm16);
  return out;
}

}  // namespace mpcrn::tools
