// Copyright (c) 2026 deflow-cpp contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <string>
#include <unordered_map>

#include "deflow/error.hpp"
#include "deflow/types.hpp"

namespace deflow {

template <typename T>
struct ParamBlock {
  std::string name;
  MatrixX<T> value;
  MatrixX<T> grad;
};

// Owns every learnable array of a model. Registration order is the canonical
// order for serialization and optimizer state; lookups go by name. Blocks live
// in a deque so pointers handed to layers stay valid as more are added.
template <typename T>
class ParamRegistry {
 public:
  ParamBlock<T>* add(const std::string& name, Eigen::Index rows, Eigen::Index cols) {
    if (index_.count(name)) throw InternalError("duplicate parameter name: " + name);
    blocks_.push_back({name, MatrixX<T>::Zero(rows, cols), MatrixX<T>::Zero(rows, cols)});
    index_[name] = blocks_.size() - 1;
    return &blocks_.back();
  }

  ParamBlock<T>& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter name: " + name);
    return blocks_[it->second];
  }

  const ParamBlock<T>& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ValidationError("unknown parameter name: " + name);
    return blocks_[it->second];
  }

  bool contains(const std::string& name) const { return index_.count(name) > 0; }

  size_t count() const { return blocks_.size(); }
  ParamBlock<T>& block(size_t i) { return blocks_[i]; }
  const ParamBlock<T>& block(size_t i) const { return blocks_[i]; }

  void zero_grads() {
    for (auto& b : blocks_) b.grad.setZero();
  }

  Eigen::Index scalar_count() const {
    Eigen::Index n = 0;
    for (const auto& b : blocks_) n += b.value.size();
    return n;
  }

 private:
  std::deque<ParamBlock<T>> blocks_;
  std::unordered_map<std::string, size_t> index_;
};

}  // namespace deflow
