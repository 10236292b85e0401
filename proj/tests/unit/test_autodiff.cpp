#include <doctest.h>

#include <set>

#include <cmath>

#include "gacdr/random.hpp"
#include "gacdr/matrix.hpp"
#include "gacdr/autodiff.hpp"
#include "gacdr/error.hpp"

using namespace gacdr;
using namespace gacdr::ad;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

/// Central differences of `f` at every entry of `name`, independent of the library's checker.
Matrix numeric_grad(const std::function<double(const ParamStore&)>& f, ParamStore store, const std::string& name,
                    double h = 1e-6) {
  Matrix& x = store.value(name);
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const double orig = x(r, c);
      x(r, c) = orig + h;
      const double up = f(store);
      x(r, c) = orig - h;
      const double down = f(store);
      x(r, c) = orig;
      g(r, c) = (up - down) / (2 * h);
    }
  return g;
}

double max_rel(const Matrix& a, const Matrix& b) {
  double worst = 0;
  for (Eigen::Index i = 0; i < a.size(); ++i) {
    const double d = std::abs(a.data()[i] - b.data()[i]);
    worst = std::max(worst, d / std::max({std::abs(a.data()[i]), std::abs(b.data()[i]), 1e-8}));
  }
  return worst;
}

}  // namespace

TEST_CASE("x squared at 3 has gradient 6") {
  ParamStore s;
  s.add("x", scalar(3.0));
  Tape t;
  Var x = t.param(s, "x");
  auto g = t.backward(mul(x, x));
  CHECK(g.at("x")(0, 0) == doctest::Approx(6.0));
}

TEST_CASE("dead ReLU passes no gradient, including exactly at zero") {
  ParamStore s;
  s.add("w", scalar(1.7));
  s.add("z", scalar(0.0));
  Tape t;
  Var out = add(mul(relu(t.constant(scalar(-2.0))), t.param(s, "w")), relu(t.param(s, "z")));
  auto g = t.backward(out);
  CHECK(g.at("w")(0, 0) == 0.0);
  CHECK(g.at("z")(0, 0) == 0.0);
}

TEST_CASE("unreachable parameters get zero gradients") {
  ParamStore s;
  s.add("used", Matrix::Ones(2, 2));
  s.add("unused", Matrix::Ones(3, 1));
  Tape t;
  Var used = t.param(s, "used");
  t.param(s, "unused");
  auto g = t.backward(sum(used));
  REQUIRE(g.count("unused") == 1);
  CHECK(g.at("unused").isZero(0));
  CHECK(g.at("used").isOnes(0));
}

TEST_CASE("every op matches central differences") {
  ParamStore s;
  s.add("a", Matrix::Random(4, 3) + Matrix::Constant(4, 3, 1.5));  // positive for log
  s.add("b", Matrix::Random(3, 2));
  s.add("r", Matrix::Random(1, 3));
  s.add("l", Matrix::Random(3, 3));
  auto build = [](Tape& t, const ParamStore& st) {
    Var a = t.param(st, "a"), b = t.param(st, "b"), r = t.param(st, "r"), l = t.param(st, "l");
    Var m = matmul(mul_row(a, r), b);                               // 4 x 2
    Var e = exp(scale(m, 0.3));
    Var lg = log(add_scalar(a, 0.1));
    Var cl = clamp(sub(a, scale(a, 0.5)), -0.4, 0.6);
    Var soft = softmax_over_rows(l);
    Var g = gather_rows(a, {3, 0, 3});
    Var sc = scatter_rows(g, {1, 0, 2}, 5);
    Var st2 = stack_rows({r, gather_rows(a, {1})});
    Var cos = row_cosine(gather_rows(a, {0, 1}), gather_rows(a, {2, 3}));
    Var p = clamp(cos, 1e-7, 1 - 1e-7);
    Var bce = soft_bce(p, {0.8, 0.2});
    Var total = add(sum(e), sum(lg));
    total = add(total, sum_squares(cl));
    total = add(total, sum(mul(soft, soft)));
    total = add(total, sum_squares(sc));
    total = add(total, sum(mul(st2, st2)));
    total = add(total, bce);
    return total;
  };
  auto value = [&](const ParamStore& st) {
    Tape t;
    return build(t, st).scalar();
  };
  Tape t;
  auto grads = t.backward(build(t, s));
  for (const char* name : {"a", "b", "r", "l"}) CHECK(max_rel(grads.at(name), numeric_grad(value, s, name)) < 1e-6);
}

TEST_CASE("softmax logit gradients sum to zero per column") {
  ParamStore s;
  s.add("l", Matrix::Random(3, 4));
  s.add("t", Matrix::Random(3, 4));
  Tape t;
  Var out = sum(mul(softmax_over_rows(t.param(s, "l")), t.constant(s.value("t"))));
  auto g = t.backward(out);
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(std::abs(g.at("l").col(c).sum()) < 1e-14);
  Matrix sm = softmax_columns(s.value("l"));
  for (Eigen::Index c = 0; c < 4; ++c) CHECK(sm.col(c).sum() == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("non-finite gradients are reported") {
  ParamStore s;
  s.add("x", scalar(0.0));
  Tape t;
  Var l = log(t.param(s, "x"));
  CHECK_THROWS_AS(t.backward(l), NonFinite);
}

TEST_CASE("adam first step and zero gradients") {
  ParamStore s;
  s.add("x", scalar(2.0));
  s.add("y", scalar(-1.0));
  Gradients g{{"x", scalar(1.0)}, {"y", scalar(0.0)}};
  adam_step(s, g, AdamConfig{});
  // m_hat = 1, v_hat = 1 after bias correction: step = lr / (1 + eps).
  CHECK(s.value("x")(0, 0) == doctest::Approx(2.0 - 0.001 / (1.0 + 1e-8)).epsilon(1e-14));
  CHECK(s.value("y")(0, 0) == -1.0);
  CHECK(s.adam("x").step == 1);
  Gradients bad{{"x", Matrix::Ones(2, 1)}};
  CHECK_THROWS_AS(adam_step(s, bad, AdamConfig{}), ShapeMismatch);
}

TEST_CASE("adam first-step direction is scale equivariant") {
  Matrix g0 = Matrix::Random(3, 3);
  ParamStore a, b;
  a.add("w", Matrix::Zero(3, 3));
  b.add("w", Matrix::Zero(3, 3));
  adam_step(a, {{"w", g0}}, AdamConfig{});
  adam_step(b, {{"w", g0 * 10.0}}, AdamConfig{});
  CHECK((a.value("w") - b.value("w")).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("adam is an exact closed form over several steps") {
  ParamStore s;
  s.add("x", scalar(0.0));
  const AdamConfig cfg;
  double m = 0, v = 0, x = 0;
  const std::vector<double> gs{0.5, -1.0, 2.0, 0.25};
  for (std::size_t t = 1; t <= gs.size(); ++t) {
    adam_step(s, {{"x", scalar(gs[t - 1])}}, cfg);
    m = cfg.beta1 * m + (1 - cfg.beta1) * gs[t - 1];
    v = cfg.beta2 * v + (1 - cfg.beta2) * gs[t - 1] * gs[t - 1];
    const double mh = m / (1 - std::pow(cfg.beta1, static_cast<double>(t)));
    const double vh = v / (1 - std::pow(cfg.beta2, static_cast<double>(t)));
    x -= cfg.lr * mh / (std::sqrt(vh) + cfg.eps);
    CHECK(s.value("x")(0, 0) == doctest::Approx(x).epsilon(1e-12));
  }
}

TEST_CASE("finite difference checker: linear exact, quadratic small") {
  ParamStore s;
  s.add("t", Matrix::Random(3, 3));
  auto linear = [](Tape& t, const ParamStore& st) { return sum(t.param(st, "t")); };
  CHECK(finite_diff_check(linear, s, 0, 1e-5).max_rel_error_overall < 1e-10);
  auto quad = [](Tape& t, const ParamStore& st) { return sum_squares(t.param(st, "t")); };
  auto rep = finite_diff_check(quad, s, 5, 1e-4);
  CHECK(rep.coordinates == 5);
  CHECK(rep.max_rel_error_overall < 1e-8);
}

TEST_CASE("shape errors") {
  Tape t;
  Var a = t.constant(Matrix::Ones(2, 3));
  Var b = t.constant(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(add(a, b), ShapeMismatch);
  CHECK_THROWS_AS(matmul(a, b), ShapeMismatch);
}
