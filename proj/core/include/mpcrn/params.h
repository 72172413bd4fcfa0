// Copyright 2026 The mpcrn Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "mpcrn/error.h"
#include "mpcrn/tensor.h"

namespace mpcrn {

template <typename T>
struct Param {
  std::string name;
  std::vector<std::size_t> shape;
  AlignedVector<T> value;
  AlignedVector<T> grad;
  // Running statistics are stored here too but never touched by the optimizer.
  bool trainable = true;

  std::size_t size() const { return value.size(); }
};

using ParamId = std::size_t;

// Named parameter collection. Iteration follows insertion order, which the
// model fixes at construction, so checkpoints and optimizer updates are
// deterministic.
template <typename T>
class ModelParams {
 public:
  ParamId add(std::string name, std::vector<std::size_t> shape, bool trainable = true) {
    if (index_.count(name)) throw UsageError("duplicate parameter name: " + name);
    std::size_t count = 1;
    for (auto d : shape) count *= d;
    Param<T> p;
    p.name = name;
    p.shape = std::move(shape);
    p.value.assign(count, T(0));
    p.grad.assign(count, T(0));
    p.trainable = trainable;
    entries_.push_back(std::move(p));
    index_.emplace(std::move(name), entries_.size() - 1);
    return entries_.size() - 1;
  }

  Param<T>& operator[](ParamId id) { return entries_[id]; }
  const Param<T>& operator[](ParamId id) const { return entries_[id]; }

  Param<T>& at(std::string_view name) { return entries_[find(name)]; }
  const Param<T>& at(std::string_view name) const { return entries_[find(name)]; }
  bool contains(std::string_view name) const { return index_.count(std::string(name)) != 0; }

  std::size_t size() const { return entries_.size(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

  void zero_grad() {
    for (auto& p : entries_) std::fill(p.grad.begin(), p.grad.end(), T(0));
  }

  std::size_t trainable_count() const {
    std::size_t n = 0;
    for (const auto& p : entries_)
      if (p.trainable) n += p.size();
    return n;
  }

  template <typename U>
  ModelParams<U> cast() const {
    ModelParams<U> out;
    for (const auto& p : entries_) {
      auto id = out.add(p.name, p.shape, p.trainable);
      for (std::size_t i = 0; i < p.size(); ++i) {
        out[id].value[i] = static_cast<U>(p.value[i]);
        out[id].grad[i] = static_cast<U>(p.grad[i]);
      }
    }
    return out;
  }

 private:
  std::size_t find(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) throw UsageError("unknown parameter: " + std::string(name));
    return it->second;
  }

  std::vector<Param<T>> entries_;
  std::map<std::string, std::size_t> index_;
};

// std::mt19937_64 with a portable double conversion: std:: distributions are
// implementation-defined, this keeps initialization identical across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  std::size_t below(std::size_t n) { return static_cast<std::size_t>(engine_() % n); }
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    spare_ = r * std::sin(2.0 * std::numbers::pi * u2);
    have_spare_ = true;
    return r * std::cos(2.0 * std::numbers::pi * u2);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace mpcrn
