#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numbers>

#include "gpmu/numerics/adam.hpp"
#include "gpmu/numerics/params.hpp"
#include "gpmu/numerics/tape.hpp"
#include "gpmu/numerics/tensor.hpp"
#include "gpmu/rng.hpp"
#include "support/gradcheck.hpp"

using namespace gpmu;
using namespace gpmu::ad;
using testsupport::grad_check;
using testsupport::random_tensor;

TEST_CASE("rng streams are keyed by seed and name") {
  rng::Stream a(7, "weights");
  rng::Stream b(7, "weights");
  rng::Stream c(7, "noise");
  rng::Stream d(8, "weights");
  CHECK(a.next_u64() == b.next_u64());
  CHECK(a.next_u64() == b.next_u64());
  rng::Stream a2(7, "weights");
  CHECK(a2.next_u64() != c.next_u64());
  rng::Stream a3(7, "weights");
  rng::Stream d2(8, "weights");
  CHECK(a3.next_u64() != d2.next_u64());
}

TEST_CASE("rng forks are stable no matter how much the parent has drawn") {
  rng::Stream parent(42, "events");
  rng::Stream child_before = parent.fork(3);
  for (int i = 0; i < 100; ++i) parent.next_u64();
  rng::Stream child_after = parent.fork(3);
  CHECK(child_before.next_u64() == child_after.next_u64());

  rng::Stream named1 = parent.fork("aug");
  rng::Stream named2 = parent.fork("aug");
  CHECK(named1.next_u64() == named2.next_u64());
  CHECK(parent.fork("aug").next_u64() != parent.fork("shift").next_u64());
}

TEST_CASE("rng uniform and normal look sane") {
  rng::Stream g(11, "dist");
  double sum = 0.0, sumsq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    double u = g.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
    sum += u;
  }
  CHECK(std::abs(sum / n - 0.5) < 0.01);
  sum = 0.0;
  for (int i = 0; i < n; ++i) {
    double z = g.normal();
    sum += z;
    sumsq += z * z;
  }
  CHECK(std::abs(sum / n) < 0.03);
  CHECK(std::abs(sumsq / n - 1.0) < 0.05);
}

TEST_CASE("matmul matches the hand-computed product") {
  Tape tape;
  Tensor a(2, 2);
  a << 1, 2, 3, 4;
  Tensor b(2, 1);
  b << 5, 6;
  auto v = matmul(tape.constant(a), tape.constant(b));
  CHECK(v.value()(0, 0) == 17.0);
  CHECK(v.value()(1, 0) == 39.0);
}

TEST_CASE("multiplying by the identity changes nothing") {
  rng::Stream g(3, "ident");
  Tensor a = random_tensor(4, 4, g);
  Tensor b = random_tensor(4, 3, g);
  Tape tape;
  auto va = tape.constant(a);
  auto vi = tape.constant(Tensor::Identity(4, 4));
  auto vb = tape.constant(b);
  Tensor lhs = matmul(matmul(va, vi), vb).value();
  Tensor rhs = matmul(va, vb).value();
  CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("shape mismatches name both operand shapes") {
  Tape tape;
  auto a = tape.constant(Tensor::Zero(2, 3));
  auto b = tape.constant(Tensor::Zero(4, 1));
  try {
    matmul(a, b);
    FAIL("matmul accepted mismatched shapes");
  } catch (const ShapeError& e) {
    std::string msg = e.what();
    CHECK(msg.find("2x3") != std::string::npos);
    CHECK(msg.find("4x1") != std::string::npos);
  }
  CHECK_THROWS_AS(add(a, b), ShapeError);
  CHECK_THROWS_AS(mul(a, b), ShapeError);
  CHECK_THROWS_AS(mse(a, b), ShapeError);
}

TEST_CASE("activation values at anchor points") {
  Tape tape;
  Tensor x(1, 7);
  x << 0.0, 1.0, -1.0, 30.0, -30.0, 700.0, -700.0;
  auto v = tape.constant(x);

  Tensor sp = softplus(v).value();
  CHECK(sp(0, 0) == doctest::Approx(std::numbers::ln2).epsilon(1e-12));
  for (Index j = 0; j < x.cols(); ++j) {
    CHECK(sp(0, j) > 0.0);
    double slack = sp(0, j) - std::max(x(0, j), 0.0);
    CHECK(slack >= 0.0);
    CHECK(slack <= std::numbers::ln2 + 1e-12);
    CHECK(std::isfinite(sp(0, j)));
  }

  Tensor sg = sigmoid(v).value();
  CHECK(sg(0, 0) == doctest::Approx(0.5).epsilon(1e-12));
  for (Index j = 0; j < x.cols(); ++j) {
    CHECK(sg(0, j) > 0.0);
    CHECK(sg(0, j) <= 1.0);
  }

  Tensor th = tanh_op(v).value();
  CHECK(th(0, 0) == 0.0);
  CHECK(th(0, 5) == doctest::Approx(1.0));

  Tensor lk = leaky_relu(v, 0.2).value();
  CHECK(lk(0, 1) == 1.0);
  CHECK(lk(0, 2) == doctest::Approx(-0.2));
  CHECK(lk(0, 0) == 0.0);
}

TEST_CASE("a parameter used twice gets double the gradient") {
  Tape tape;
  Tensor w = Tensor::Constant(2, 2, 1.5);
  auto vw = tape.param("w", w);
  auto loss = sum(add(vw, vw));
  auto grads = tape.backward(loss);
  CHECK((grads.at("w").array() == 2.0).all());
}

TEST_CASE("parameters off the loss path get exact zeros") {
  Tape tape;
  auto used = tape.param("used", Tensor::Constant(1, 3, 2.0));
  auto unused = tape.param("unused", Tensor::Constant(2, 2, 5.0));
  (void)unused;
  auto loss = sum(used);
  auto grads = tape.backward(loss);
  CHECK((grads.at("used").array() == 1.0).all());
  CHECK(grads.at("unused").rows() == 2);
  CHECK((grads.at("unused").array() == 0.0).all());
}

TEST_CASE("backward insists on a scalar loss") {
  Tape tape;
  auto w = tape.param("w", Tensor::Constant(2, 2, 1.0));
  CHECK_THROWS_AS(tape.backward(w), ContractError);
}

TEST_CASE("registering a parameter twice reuses one tape node") {
  Tape tape;
  Tensor w = Tensor::Constant(1, 2, 3.0);
  auto v1 = tape.param("w", w);
  auto v2 = tape.param("w", w);
  CHECK(v1.id == v2.id);
  auto loss = sum(add(v1, v2));
  auto grads = tape.backward(loss);
  CHECK((grads.at("w").array() == 2.0).all());
}

TEST_CASE("finite differences agree with the tape for every op") {
  rng::Stream g(17, "gradcheck");

  auto check = [&](const char* what, testsupport::LossFn fn, ParamSet ps) {
    double err = grad_check(fn, std::move(ps));
    INFO(what);
    CHECK(err < 1e-4);
  };

  {
    ParamSet ps;
    ps.add("a", random_tensor(2, 3, g));
    ps.add("b", random_tensor(3, 4, g));
    check("matmul", [](Tape& t, const ParamSet& p) {
      return sum(matmul(t.param("a", p.at("a")), t.param("b", p.at("b"))));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(3, 3, g));
    ps.add("b", random_tensor(3, 3, g));
    check("add/sub/mul", [](Tape& t, const ParamSet& p) {
      auto a = t.param("a", p.at("a"));
      auto b = t.param("b", p.at("b"));
      return sum(mul(sub(a, b), add(a, b)));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(2, 5, g));
    check("scale/neg", [](Tape& t, const ParamSet& p) {
      return sum(neg(scale(t.param("a", p.at("a")), 0.37)));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("m", random_tensor(4, 3, g));
    ps.add("v", random_tensor(1, 3, g));
    check("add_rowvec", [](Tape& t, const ParamSet& p) {
      return sum(add_rowvec(t.param("m", p.at("m")), t.param("v", p.at("v"))));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("x", random_tensor(3, 4, g, -2.0, 2.0));
    check("leaky_relu", [](Tape& t, const ParamSet& p) {
      return sum(leaky_relu(t.param("x", p.at("x")), 0.2));
    }, ps);
    check("sigmoid", [](Tape& t, const ParamSet& p) {
      return sum(sigmoid(t.param("x", p.at("x"))));
    }, ps);
    check("tanh", [](Tape& t, const ParamSet& p) {
      return sum(tanh_op(t.param("x", p.at("x"))));
    }, ps);
    check("softplus", [](Tape& t, const ParamSet& p) {
      return sum(softplus(t.param("x", p.at("x"))));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(3, 2, g));
    ps.add("b", random_tensor(3, 4, g));
    check("concat_cols", [](Tape& t, const ParamSet& p) {
      auto cat = concat_cols(t.param("a", p.at("a")), t.param("b", p.at("b")));
      return sum(mul(cat, cat));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(3, 6, g));
    check("slice_cols", [](Tape& t, const ParamSet& p) {
      auto s = slice_cols(t.param("a", p.at("a")), 2, 3);
      return sum(mul(s, s));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(5, 3, g));
    check("mean_rows", [](Tape& t, const ParamSet& p) {
      auto m = mean_rows(t.param("a", p.at("a")));
      return sum(mul(m, m));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("v", random_tensor(1, 4, g));
    ps.add("m", random_tensor(5, 4, g));
    check("tile_rows", [](Tape& t, const ParamSet& p) {
      auto tiles = tile_rows(t.param("v", p.at("v")), 5);
      return sum(mul(tiles, t.param("m", p.at("m"))));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(4, 3, g));
    ps.add("b", random_tensor(4, 3, g));
    check("mse", [](Tape& t, const ParamSet& p) {
      return mse(t.param("a", p.at("a")), t.param("b", p.at("b")));
    }, ps);
  }
  {
    ParamSet ps;
    ps.add("a", random_tensor(2, 5, g));
    check("transpose", [](Tape& t, const ParamSet& p) {
      auto at = transpose(t.param("a", p.at("a")));
      return sum(matmul(at, t.param("a", p.at("a"))));
    }, ps);
  }
}

TEST_CASE("composed expressions still gradient-check") {
  rng::Stream g(23, "composed");
  ParamSet ps;
  ps.add("w1", random_tensor(4, 6, g));
  ps.add("b1", random_tensor(1, 6, g));
  ps.add("w2", random_tensor(6, 2, g));
  ps.add("x", random_tensor(3, 4, g));
  double err = grad_check(
      [](Tape& t, const ParamSet& p) {
        auto h = leaky_relu(
            add_rowvec(matmul(t.param("x", p.at("x")), t.param("w1", p.at("w1"))),
                       t.param("b1", p.at("b1"))),
            0.2);
        auto out = sigmoid(matmul(h, t.param("w2", p.at("w2"))));
        auto target = t.constant(Tensor::Constant(3, 2, 0.3));
        return mse(out, target);
      },
      ps);
  CHECK(err < 1e-3);
}

TEST_CASE("adam takes the textbook bias-corrected first step") {
  ParamSet ps;
  ps.add("w", Tensor::Constant(1, 1, 2.0));
  AdamState opt;
  AdamConfig cfg;
  std::map<std::string, Tensor> grads;
  grads["w"] = Tensor::Constant(1, 1, 1.0);
  opt.step(ps, grads, cfg);
  CHECK(opt.step_count() == 1);
  CHECK(ps.at("w")(0, 0) == doctest::Approx(2.0 - cfg.lr).epsilon(1e-6));
}

TEST_CASE("adam drives a quadratic toward zero") {
  ParamSet ps;
  ps.add("w", Tensor::Constant(1, 1, 1.0));
  AdamState opt;
  AdamConfig cfg;
  cfg.lr = 0.05;
  for (int step = 0; step < 200; ++step) {
    Tape tape;
    auto w = tape.param("w", ps.at("w"));
    auto loss = mul(w, w);
    auto grads = tape.backward(loss);
    opt.step(ps, grads, cfg);
  }
  CHECK(std::abs(ps.at("w")(0, 0)) < 0.1);
}

TEST_CASE("adam descends early at the default step size") {
  ParamSet ps;
  ps.add("w", Tensor::Constant(1, 1, 1.0));
  AdamState opt;
  AdamConfig cfg;
  double prev = 1.0;
  for (int step = 0; step < 50; ++step) {
    Tape tape;
    auto w = tape.param("w", ps.at("w"));
    auto grads = tape.backward(mul(w, w));
    opt.step(ps, grads, cfg);
    CHECK(ps.at("w")(0, 0) < prev);
    prev = ps.at("w")(0, 0);
  }
}

TEST_CASE("adam leaves parameters alone when gradients are zero") {
  ParamSet ps;
  ps.add("w", Tensor::Constant(2, 2, 0.7));
  AdamState opt;
  AdamConfig cfg;
  std::map<std::string, Tensor> grads;
  grads["w"] = Tensor::Zero(2, 2);
  for (int i = 0; i < 10; ++i) opt.step(ps, grads, cfg);
  CHECK((ps.at("w").array() == 0.7).all());
}

TEST_CASE("adam rejects gradient shape mismatches") {
  ParamSet ps;
  ps.add("w", Tensor::Zero(2, 2));
  AdamState opt;
  std::map<std::string, Tensor> grads;
  grads["w"] = Tensor::Zero(1, 4);
  CHECK_THROWS_AS(opt.step(ps, grads, AdamConfig{}), ShapeError);
}

TEST_CASE("glorot init respects the fan bound and the seed") {
  rng::Stream g1(5, "init");
  Tensor w = glorot_uniform<double>(100, 100, g1);
  double bound = std::sqrt(6.0 / 200.0);
  CHECK(w.cwiseAbs().maxCoeff() <= bound);
  CHECK(w.cwiseAbs().maxCoeff() > 0.5 * bound);
  rng::Stream g2(5, "init");
  Tensor w2 = glorot_uniform<double>(100, 100, g2);
  CHECK((w - w2).cwiseAbs().maxCoeff() == 0.0);

  rng::Stream g3(5, "init");
  CHECK_THROWS_AS(glorot_uniform<double>(0, 4, g3), ContractError);
  CHECK_THROWS_AS(glorot_uniform<double>(3, -1, g3), ContractError);
}
