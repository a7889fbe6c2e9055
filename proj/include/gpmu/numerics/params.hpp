#pragma once

#include <map>
#include <string>
#include <vector>

#include "gpmu/errors.hpp"
#include "gpmu/numerics/tensor.hpp"
#include "gpmu/rng.hpp"

namespace gpmu {

// Glorot-uniform initialization: entries drawn from
// [-sqrt(6/(fan_in+fan_out)), +sqrt(6/(fan_in+fan_out))].
template <class S>
TensorT<S> glorot_uniform(Index rows, Index cols, rng::Stream& g) {
  if (rows <= 0 || cols <= 0) {
    throw ContractError("glorot_uniform: shape " + shape_str(rows, cols) +
                        " has an empty dimension");
  }
  double bound = std::sqrt(6.0 / static_cast<double>(rows + cols));
  TensorT<S> t(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) {
      t(i, j) = static_cast<S>(g.uniform(-bound, bound));
    }
  }
  return t;
}

// Named tensors in stable insertion order. Iteration order is the order the
// parameters were added, so serialization and optimizer sweeps are
// deterministic.
template <class S>
class ParamSetT {
 public:
  using Tensor = TensorT<S>;

  void add(const std::string& name, Tensor value) {
    if (index_.count(name)) {
      throw ContractError("parameter " + name + " already exists");
    }
    index_.emplace(name, names_.size());
    names_.push_back(name);
    values_.push_back(std::move(value));
  }

  bool has(const std::string& name) const { return index_.count(name) != 0; }

  Tensor& at(const std::string& name) {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("no parameter " + name);
    return values_[it->second];
  }

  const Tensor& at(const std::string& name) const {
    auto it = index_.find(name);
    if (it == index_.end()) throw ContractError("no parameter " + name);
    return values_[it->second];
  }

  std::size_t size() const { return names_.size(); }
  const std::string& name(std::size_t i) const { return names_[i]; }
  Tensor& value(std::size_t i) { return values_[i]; }
  const Tensor& value(std::size_t i) const { return values_[i]; }

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> values_;
  std::map<std::string, std::size_t> index_;
};

using ParamSet = ParamSetT<double>;

}  // namespace gpmu
