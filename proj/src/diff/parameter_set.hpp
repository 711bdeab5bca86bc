// Copyright 2026 The NCSL Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "diff/tensor.hpp"

namespace ncsl::diff {

// Owns parameters and buffers in registration order. Addresses are stable
// for the lifetime of the set, so graph nodes may hold raw pointers.
template <class T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet&) = delete;
  ParameterSet& operator=(const ParameterSet&) = delete;
  ParameterSet(ParameterSet&&) noexcept = default;
  ParameterSet& operator=(ParameterSet&&) noexcept = default;

  Parameter<T>& add(const std::string& name, Tensor<T> value, bool trainable = true) {
    NCSL_CHECK(!index_.contains(name), InvalidArgument, "duplicate parameter name '", name, "'");
    index_[name] = items_.size();
    items_.push_back(std::make_unique<Parameter<T>>(name, std::move(value), trainable));
    return *items_.back();
  }

  std::size_t size() const { return items_.size(); }
  Parameter<T>& operator[](std::size_t i) { return *items_[i]; }
  const Parameter<T>& operator[](std::size_t i) const { return *items_[i]; }

  Parameter<T>* find(const std::string& name) {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].get();
  }
  const Parameter<T>* find(const std::string& name) const {
    auto it = index_.find(name);
    return it == index_.end() ? nullptr : items_[it->second].get();
  }
  Parameter<T>& at(const std::string& name) {
    auto* p = find(name);
    NCSL_CHECK(p != nullptr, InvalidArgument, "no parameter named '", name, "'");
    return *p;
  }

  std::vector<Parameter<T>*> all() {
    std::vector<Parameter<T>*> out;
    for (auto& p : items_) out.push_back(p.get());
    return out;
  }
  std::vector<Parameter<T>*> trainable() {
    std::vector<Parameter<T>*> out;
    for (auto& p : items_)
      if (p->requires_grad) out.push_back(p.get());
    return out;
  }

  // Number of trainable scalars.
  std::int64_t num_trainable() const {
    std::int64_t n = 0;
    for (auto& p : items_)
      if (p->requires_grad) n += static_cast<std::int64_t>(p->value.size());
    return n;
  }

  void zero_grad() {
    for (auto& p : items_) p->zero_grad();
  }

  // Copies every value from a set with identical layout.
  void copy_values_from(const ParameterSet& other) {
    NCSL_CHECK(other.size() == size(), ShapeError, "parameter set sizes differ: ", size(), " vs ",
               other.size());
    for (std::size_t i = 0; i < size(); ++i) {
      NCSL_CHECK(items_[i]->value.same_shape(other[i].value), ShapeError, "shape mismatch for '",
                 items_[i]->name, "'");
      items_[i]->value = other[i].value;
    }
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> items_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace ncsl::diff
