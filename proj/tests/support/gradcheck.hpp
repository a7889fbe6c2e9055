#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "gpmu/numerics/params.hpp"
#include "gpmu/numerics/tape.hpp"

namespace testsupport {

using LossFn =
    std::function<gpmu::ad::Var(gpmu::ad::Tape&, const gpmu::ParamSet&)>;

inline double eval_loss(const LossFn& fn, const gpmu::ParamSet& ps) {
  gpmu::ad::Tape tape;
  return fn(tape, ps).value()(0, 0);
}

inline double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1e-6, std::abs(a), std::abs(b)});
}

// Central-difference check of every parameter element against the tape
// gradient. Returns the worst relative error seen.
inline double grad_check(const LossFn& fn, gpmu::ParamSet ps,
                         double h = 1e-5) {
  gpmu::ad::Tape tape;
  auto loss = fn(tape, ps);
  auto grads = tape.backward(loss);
  double worst = 0.0;
  for (std::size_t p = 0; p < ps.size(); ++p) {
    const std::string& name = ps.name(p);
    gpmu::Tensor& val = ps.value(p);
    const gpmu::Tensor& analytic = grads.at(name);
    for (gpmu::Index i = 0; i < val.rows(); ++i) {
      for (gpmu::Index j = 0; j < val.cols(); ++j) {
        double keep = val(i, j);
        val(i, j) = keep + h;
        double up = eval_loss(fn, ps);
        val(i, j) = keep - h;
        double down = eval_loss(fn, ps);
        val(i, j) = keep;
        double numeric = (up - down) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic(i, j), numeric));
      }
    }
  }
  return worst;
}

inline gpmu::Tensor random_tensor(gpmu::Index rows, gpmu::Index cols,
                                  gpmu::rng::Stream& g, double lo = -1.0,
                                  double hi = 1.0) {
  gpmu::Tensor t(rows, cols);
  for (gpmu::Index i = 0; i < rows; ++i) {
    for (gpmu::Index j = 0; j < cols; ++j) {
      t(i, j) = g.uniform(lo, hi);
    }
  }
  return t;
}

}  // namespace testsupport
