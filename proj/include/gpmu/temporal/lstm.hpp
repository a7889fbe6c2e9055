#pragma once

#include <string>

#include "gpmu/numerics/params.hpp"
#include "gpmu/numerics/tape.hpp"
#include "gpmu/rng.hpp"

namespace gpmu::temporal {

using ad::Tape;
using ad::Var;

// One recurrent layer's weights under `prefix`: combined gate matrices
// `.wx` (in x 4u), `.wh` (u x 4u) and bias `.b` (1 x 4u), gate column
// order input, forget, cell, output. Forget-gate bias starts at 1 so early
// training does not wipe the cell state.
inline void add_lstm_params(ParamSet& ps, const std::string& prefix, Index in,
                            Index units, rng::Stream& g) {
  rng::Stream sx = g.fork(prefix + ".wx");
  rng::Stream sh = g.fork(prefix + ".wh");
  ps.add(prefix + ".wx", glorot_uniform<double>(in, 4 * units, sx));
  ps.add(prefix + ".wh", glorot_uniform<double>(units, 4 * units, sh));
  Tensor b = Tensor::Zero(1, 4 * units);
  b.block(0, units, 1, units).setOnes();
  ps.add(prefix + ".b", std::move(b));
}

struct LstmVars {
  Var wx, wh, b;
  Index units = 0;
};

inline LstmVars lstm_vars(Tape& t, const ParamSet& ps,
                          const std::string& prefix) {
  LstmVars v{t.param(prefix + ".wx", ps.at(prefix + ".wx")),
             t.param(prefix + ".wh", ps.at(prefix + ".wh")),
             t.param(prefix + ".b", ps.at(prefix + ".b")), 0};
  v.units = v.wh.rows();
  return v;
}

struct LstmState {
  Var h, c;
};

inline LstmState lstm_zero_state(Tape& t, Index batch, Index units) {
  Var z = t.constant(Tensor::Zero(batch, units));
  return {z, z};
}

inline LstmState lstm_step(const LstmVars& w, Var x, LstmState s) {
  Var gates = add_rowvec(add(matmul(x, w.wx), matmul(s.h, w.wh)), w.b);
  Var i = sigmoid(slice_cols(gates, 0, w.units));
  Var f = sigmoid(slice_cols(gates, w.units, w.units));
  Var g = tanh_op(slice_cols(gates, 2 * w.units, w.units));
  Var o = sigmoid(slice_cols(gates, 3 * w.units, w.units));
  Var c = add(mul(f, s.c), mul(i, g));
  Var h = mul(o, tanh_op(c));
  return {h, c};
}

}  // namespace gpmu::temporal
