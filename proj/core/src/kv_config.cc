// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "mpcrn/kv_config.h"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mpcrn/error.h"

namespace mpcrn {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    const auto item = trim(s.substr(0, comma));
    if (!item.empty()) out.push_back(item);
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

template <typename V>
bool parse_number(std::string_view s, V& out) {
  const auto* end = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(s.data(), end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

KvConfig KvConfig::parse(std::string_view text) {
  KvConfig cfg;
  int line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected key=value");
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty()) throw ParseError("line " + std::to_string(line_no) + ": empty key");
    if (cfg.entries_.count(std::string(key)))
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" +
                       std::string(key) + "'");
    cfg.entries_[std::string(key)] = {std::string(value), line_no};
  }
  return cfg;
}

KvConfig KvConfig::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open config file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

void KvConfig::fail(const std::string& key, const std::string& what) const {
  const auto it = entries_.find(key);
  const int line = it == entries_.end() ? 0 : it->second.second;
  throw ParseError("line " + std::to_string(line) + ": key '" + key + "': " + what);
}

std::string KvConfig::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = entries_.find(key);
  return it == entries_.end() ? fallback : it->second.first;
}

double KvConfig::get_double(const std::string& key, double fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  double v = 0;
  if (!parse_number(std::string_view(it->second.first), v)) fail(key, "expected a number");
  return v;
}

long long KvConfig::get_int(const std::string& key, long long fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  long long v = 0;
  if (!parse_number(std::string_view(it->second.first), v)) fail(key, "expected an integer");
  return v;
}

std::size_t KvConfig::get_size(const std::string& key, std::size_t fallback) const {
  const long long v = get_int(key, static_cast<long long>(fallback));
  if (v < 0) fail(key, "expected a non-negative integer");
  return static_cast<std::size_t>(v);
}

bool KvConfig::get_bool(const std::string& key, bool fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  const auto& v = it->second.first;
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  fail(key, "expected a boolean");
}

std::vector<std::size_t> KvConfig::get_sizes(const std::string& key,
                                             const std::vector<std::size_t>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<std::size_t> out;
  for (auto item : split_list(it->second.first)) {
    std::size_t v = 0;
    if (!parse_number(item, v)) fail(key, "expected a comma-separated list of integers");
    out.push_back(v);
  }
  return out;
}

std::vector<double> KvConfig::get_doubles(const std::string& key,
                                          const std::vector<double>& fallback) const {
  const auto it = entries_.find(key);
  if (it == entries_.end()) return fallback;
  std::vector<double> out;
  for (auto item : split_list(it->second.first)) {
    double v = 0;
    if (!parse_number(item, v)) fail(key, "expected a comma-separated list of numbers");
    out.push_back(v);
  }
  return out;
}

void KvConfig::check_known(const std::set<std::string>& known) const {
  for (const auto& [key, entry] : entries_)
    if (!known.count(key))
      throw ParseError("line " + std::to_string(entry.second) + ": unknown key '" + key + "'");
}

}  // namespace mpcrn
