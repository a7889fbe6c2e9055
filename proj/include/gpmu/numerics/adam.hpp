#pragma once

#include <cmath>
#include <cstdint>
#include <map>

#include "gpmu/errors.hpp"
#include "gpmu/numerics/params.hpp"
#include "gpmu/numerics/tensor.hpp"

namespace gpmu {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Bias-corrected Adam over a ParamSet. Moment tensors are allocated on the
// first step and track the parameter order; a parameter with no gradient
// entry is treated as having a zero gradient.
template <class S>
class AdamStateT {
 public:
  using Tensor = TensorT<S>;

  std::int64_t step_count() const { return t_; }

  void step(ParamSetT<S>& params, const std::map<std::string, Tensor>& grads,
            const AdamConfig& cfg) {
    if (!init_) {
      m_.resize(params.size());
      v_.resize(params.size());
      for (std::size_t i = 0; i < params.size(); ++i) {
        m_[i] = Tensor::Zero(params.value(i).rows(), params.value(i).cols());
        v_[i] = Tensor::Zero(params.value(i).rows(), params.value(i).cols());
      }
      init_ = true;
    }
    if (m_.size() != params.size()) {
      throw ContractError("adam state tracks " + std::to_string(m_.size()) +
                          " parameters, set has " +
                          std::to_string(params.size()));
    }
    ++t_;
    S b1 = static_cast<S>(cfg.beta1);
    S b2 = static_cast<S>(cfg.beta2);
    S c1 = S(1) / (S(1) - static_cast<S>(std::pow(cfg.beta1, t_)));
    S c2 = S(1) / (S(1) - static_cast<S>(std::pow(cfg.beta2, t_)));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = params.value(i);
      auto it = grads.find(params.name(i));
      if (it != grads.end()) {
        const Tensor& g = it->second;
        if (g.rows() != p.rows() || g.cols() != p.cols()) {
          throw ShapeError("gradient for " + params.name(i) + " has shape " +
                           shape_str(g) + ", parameter is " + shape_str(p));
        }
        m_[i] = b1 * m_[i] + (S(1) - b1) * g;
        v_[i].array() = b2 * v_[i].array() + (S(1) - b2) * g.array().square();
      } else {
        m_[i] *= b1;
        v_[i] *= b2;
      }
      p.array() -= static_cast<S>(cfg.lr) * (m_[i].array() * c1) /
                   ((v_[i].array() * c2).sqrt() + static_cast<S>(cfg.eps));
    }
  }

 private:
  std::int64_t t_ = 0;
  bool init_ = false;
  std::vector<Tensor> m_, v_;
};

using AdamState = AdamStateT<double>;

}  // namespace gpmu
