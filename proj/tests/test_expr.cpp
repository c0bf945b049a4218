#include <doctest.h>

#include <cmath>

#include "dhs/expr.hpp"
#include "dhs/simulate.hpp"

using namespace dhs;

namespace {
double eval_at(const ExprPtr& e, double x, double xd, double w, double t = 0.0) {
  EvalContext ctx{&x, &xd, &w, 1, 1, t};
  return eval(e, ctx);
}
}  // namespace

TEST_CASE("parser handles the model expressions") {
  auto e = parse_expression("0.2*xd1*(1 + x1) - x1^2/100");
  CHECK(eval_at(e, 2.0, 3.0, 0.0) == doctest::Approx(0.2 * 3.0 * 3.0 - 4.0 / 100.0));
  auto trig = parse_expression("sin(x1) + cos(t) - exp(-x1)");
  CHECK(eval_at(trig, 0.5, 0.0, 0.0, 1.0) ==
        doctest::Approx(std::sin(0.5) + std::cos(1.0) - std::exp(-0.5)));
  CHECK_THROWS_AS(parse_expression("x1 +"), std::invalid_argument);
  CHECK_THROWS_AS(parse_expression("foo(x1)"), std::invalid_argument);
  CHECK_THROWS_AS(parse_expression("x0"), std::invalid_argument);
}

TEST_CASE("differentiation with constant folding") {
  auto e = parse_expression("x1^2/100 + 0.2*xd1*x1");
  auto dx = fold(differentiate(e, ExprKind::VarX, 0));
  CHECK(eval_at(dx, 0.0, 0.0, 0.0) == doctest::Approx(0.0));
  CHECK(eval_at(dx, 1.0, 2.0, 0.0) == doctest::Approx(2.0 / 100.0 + 0.4));
  auto dxd = fold(differentiate(e, ExprKind::VarXd, 0));
  CHECK(eval_at(dxd, 3.0, 0.0, 0.0) == doctest::Approx(0.6));

  // d/dx sin(x) at 0 = 1, cross-checked by finite differences
  auto s = parse_expression("sin(x1)");
  auto ds = fold(differentiate(s, ExprKind::VarX, 0));
  const double h = 1e-6;
  const double fd = (eval_at(s, h, 0, 0) - eval_at(s, -h, 0, 0)) / (2.0 * h);
  CHECK(eval_at(ds, 0.0, 0.0, 0.0) == doctest::Approx(1.0));
  CHECK(eval_at(ds, 0.0, 0.0, 0.0) == doctest::Approx(fd).epsilon(1e-6));
}

TEST_CASE("affinity detection") {
  CHECK(is_affine(fold(parse_expression("8"))));
  CHECK(is_affine(fold(parse_expression("3*x1 - 2*xd1 + 1"))));
  CHECK(!is_affine(fold(parse_expression("x1^2"))));
  CHECK(!is_affine(fold(parse_expression("0.2*xd1*x1"))));
  CHECK(!is_affine(fold(parse_expression("sin(x1)"))));
}

TEST_CASE("interval evaluation dominates dense sampling") {
  Rng rng(42);
  auto e = parse_expression("x1^2/100 + 0.2*xd1*x1 - cos(x1)*w1");
  for (int trial = 0; trial < 50; ++trial) {
    const double xlo = rng.uniform(-2, 2), xhi = xlo + rng.uniform(0, 2);
    const double dlo = rng.uniform(-2, 2), dhi = dlo + rng.uniform(0, 2);
    const double wb = rng.uniform(0, 1);
    Interval xi(xlo, xhi), di(dlo, dhi), wi(-wb, wb);
    IntervalContext ctx{&xi, &di, &wi, 1, 1, Interval(0.0)};
    const Interval enc = eval_interval(e, ctx);
    for (int k = 0; k < 200; ++k) {
      const double x = rng.uniform(xlo, xhi);
      const double xd = rng.uniform(dlo, dhi);
      const double w = rng.uniform(-wb, wb);
      const double v = eval_at(e, x, xd, w);
      CHECK(v >= enc.lo - 1e-12);
      CHECK(v <= enc.hi + 1e-12);
    }
  }
}

TEST_CASE("interval powers are tight around zero") {
  Interval x(-0.2, 0.2);
  const Interval sq = pow_int(x, 2);
  CHECK(sq.lo == doctest::Approx(0.0));
  CHECK(sq.hi == doctest::Approx(0.04));
  const Interval cube = pow_int(x, 3);
  CHECK(cube.lo == doctest::Approx(-0.008));
  CHECK(cube.hi == doctest::Approx(0.008));
}

TEST_CASE("interval trig scans critical points") {
  const Interval s = sin(Interval(0.0, 4.0));  // max 1 at pi/2, min sin(4)
  CHECK(s.hi == doctest::Approx(1.0));
  CHECK(s.lo == doctest::Approx(std::sin(4.0)));
  const Interval c = cos(Interval(-0.5, 0.5));
  CHECK(c.hi == doctest::Approx(1.0));
  CHECK(c.lo == doctest::Approx(std::cos(0.5)));
}
