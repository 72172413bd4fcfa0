// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

constexpr char kMagic[7] = {'M', 'P', 'C', 'R', 'N', '1', '\0'};
// Sanity bounds so a corrupt length field cannot trigger a huge allocation.
constexpr std::uint64_t kMaxText = 1 << 20;
constexpr std::uint64_t kMaxRank = 8;
constexpr std::uint64_t kMaxValues = std::uint64_t(1) << 32;

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

void put_f32(std::ostream& os, float f) {
  const auto u = std::bit_cast<std::uint32_t>(f);
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(u >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 4);
}

void read_exact(std::istream& is, void* dst, std::size_t n, const char* what) {
  is.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw ParseError(std::string("checkpoint: truncated while reading ") + what);
}

std::uint64_t get_u64(std::istream& is, const char* what) {
  unsigned char b[8];
  read_exact(is, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

std::string get_text(std::istream& is, std::uint64_t len, const char* what) {
  if (len > kMaxText) throw ParseError(std::string("checkpoint: implausible ") + what + " length");
  std::string s(len, '\0');
  if (len) read_exact(is, s.data(), len, what);
  return s;
}

}  // namespace

template <typename T>
Checkpoint make_checkpoint(const ModelConfig& cfg, const ModelParams<T>& params) {
  Checkpoint ckpt;
  ckpt.config = cfg;
  for (const auto& p : params) {
    CheckpointRecord r{p.name, p.shape, {}};
    r.values.reserve(p.size());
    for (const T& v : p.value) r.values.push_back(static_cast<float>(v));
    ckpt.records.push_back(std::move(r));
  }
  return ckpt;
}

template <typename T>
void apply_checkpoint(const Checkpoint& ckpt, ModelParams<T>& params) {
  std::set<std::string> seen;
  for (const auto& r : ckpt.records) {
    if (!params.contains(r.name)) throw ParseError("checkpoint: unknown parameter " + r.name);
    auto& p = params.at(r.name);
    if (p.shape != r.shape) throw ParseError("checkpoint: shape mismatch for " + r.name);
    for (std::size_t i = 0; i < r.values.size(); ++i) p.value[i] = static_cast<T>(r.values[i]);
    seen.insert(r.name);
  }
  for (const auto& p : params)
    if (!seen.count(p.name)) throw ParseError("checkpoint: missing parameter " + p.name);
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os.write(kMagic, sizeof kMagic);
  const std::string text = ckpt.config.to_text();
  put_u64(os, text.size());
  os.write(text.data(), static_cast<std::streamsize>(text.size()));
  put_u64(os, ckpt.records.size());
  for (const auto& r : ckpt.records) {
    put_u64(os, r.name.size());
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    put_u64(os, r.shape.size());
    for (auto d : r.shape) put_u64(os, d);
    for (float v : r.values) put_f32(os, v);
  }
}

Checkpoint read_checkpoint(std::istream& is) {
  char magic[sizeof kMagic];
  read_exact(is, magic, sizeof magic, "magic");
  if (std::memcmp(magic, kMagic, sizeof kMagic) != 0)
    throw ParseError("checkpoint: bad magic (not an MPCRN1 file)");
  Checkpoint ckpt;
  const std::string text = get_text(is, get_u64(is, "config length"), "config");
  try {
    ckpt.config = ModelConfig::from_text(text);
  } catch (const std::exception& e) {
    throw ParseError(std::string("checkpoint: bad model config: ") + e.what());
  }
  const std::uint64_t count = get_u64(is, "record count");
  if (count > kMaxText) throw ParseError("checkpoint: implausible record count");
  for (std::uint64_t k = 0; k < count; ++k) {
    CheckpointRecord r;
    r.name = get_text(is, get_u64(is, "name length"), "name");
    const std::uint64_t rank = get_u64(is, "rank");
    if (rank > kMaxRank) throw ParseError("checkpoint: implausible rank for " + r.name);
    std::uint64_t total = 1;
    for (std::uint64_t d = 0; d < rank; ++d) {
      const std::uint64_t dim = get_u64(is, "shape");
      total *= dim;
      if (total > kMaxValues) throw ParseError("checkpoint: implausible size for " + r.name);
      r.shape.push_back(static_cast<std::size_t>(dim));
    }
    r.values.resize(total);
    std::vector<unsigned char> raw(total * 4);
    if (total) read_exact(is, raw.data(), raw.size(), "values");
    for (std::size_t i = 0; i < total; ++i) {
      std::uint32_t u = 0;
      for (int b = 0; b < 4; ++b) u |= std::uint32_t(raw[4 * i + b]) << (8 * b);
      r.values[i] = std::bit_cast<float>(u);
    }
    ckpt.records.push_back(std::move(r));
  }
  if (is.peek() != std::char_traits<char>::eof())
    throw ParseError("checkpoint: trailing bytes after last record");
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ParseError("cannot open " + path + " for writing");
  write_checkpoint(os, ckpt);
  if (!os) throw ParseError("failed writing " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open checkpoint " + path);
  return read_checkpoint(is);
}

LoadedModel model_from_checkpoint(const Checkpoint& ckpt) {
  LoadedModel out;
  out.model = Mpcrn<float>(ckpt.config, out.params, 0);
  apply_checkpoint(ckpt, out.params);
  return out;
}

LoadedModel load_model(const std::string& path) {
  return model_from_checkpoint(load_checkpoint(path));
}

template Checkpoint make_checkpoint<float>(const ModelConfig&, const ModelParams<float>&);
template Checkpoint make_checkpoint<double>(const ModelConfig&, const ModelParams<double>&);
template void apply_checkpoint<float>(const Checkpoint&, ModelParams<float>&);
template void apply_checkpoint<double>(const Checkpoint&, ModelParams<double>&);

}  // namespace mpcrn
