#include <doctest.h>

#include <cmath>

#include "dhs/growth.hpp"
#include "dhs/simulate.hpp"

using namespace dhs;

namespace {
std::string models_dir() { return DHS_MODELS_DIR; }

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

/* High-order long-double Taylor oracle for e^{at} in 1-D. */
double exp_scalar_oracle(double a, double t) {
  long double acc = 1.0L, term = 1.0L;
  const long double x = (long double)a * t;
  for (int k = 1; k <= 60; ++k) {
    term *= x / k;
    acc += term;
  }
  return (double)acc;
}

/* Fine-grained trapezoid quadrature oracle for the scalar growth recursion
 * Lambda(rho, t) = e^{Lt} rho + int_0^t e^{L(t-s)} |B| Lambda(rho, s-r) ds,
 * evaluated independently of the GrowthBoundTable marching. */
double lambda_oracle_1d(double L, double Babs, double r, double rho, double t, double h) {
  const int n = (int)std::ceil(t / h);
  h = t / n;
  std::vector<double> lam(n + 1);
  lam[0] = rho;
  for (int k = 1; k <= n; ++k) {
    const double tk = h * k;
    double integral = 0.0;
    auto lagged = [&](double s) {
      const double u = s - r;
      if (u <= 0.0) return rho;
      const int j = std::min((int)(u / h), k - 1);
      return lam[j];  // piecewise-constant lower reading; fine at small h
    };
    for (int j = 0; j < k; ++j) {
      const double s0 = h * j, s1 = h * (j + 1);
      const double f0 = std::exp(L * (tk - s0)) * Babs * lagged(s0);
      const double f1 = std::exp(L * (tk - s1)) * Babs * lagged(s1);
      integral += 0.5 * h * (f0 + f1);
    }
    lam[k] = std::exp(L * tk) * rho + integral;
  }
  return lam[n];
}

DdeDynamics heating_q1_dyn() {
  DdeDynamics dyn;
  dyn.A = Mat::Constant(1, 1, -0.25);
  dyn.B = Mat::Constant(1, 1, 0.15);
  dyn.C = Mat::Constant(1, 1, 1.0);
  dyn.delay = 1.0;
  dyn.nonlinear.assign(1, nullptr);
  return dyn;
}
}  // namespace

TEST_CASE("build_L applies the definition") {
  CHECK(build_L(Mat::Constant(1, 1, -0.25))(0, 0) == doctest::Approx(-0.25));
  Mat A(2, 2);
  A << -1.0, -2.0, 3.0, -4.0;
  Mat L = build_L(A);
  CHECK(L(0, 0) == doctest::Approx(-1.0));
  CHECK(L(0, 1) == doctest::Approx(2.0));
  CHECK(L(1, 0) == doctest::Approx(3.0));
  CHECK(L(1, 1) == doctest::Approx(-4.0));
  CHECK(build_L(Mat::Zero(2, 2)).norm() == doctest::Approx(0.0));
}

TEST_CASE("matrix exponential with certified truncation") {
  CHECK((matrix_exp(Mat::Zero(3, 3), 1.0) - Mat::Identity(3, 3)).lpNorm<Eigen::Infinity>() <=
        1e-12);
  CHECK(matrix_exp(Mat::Constant(1, 1, -0.25), 1.0)(0, 0) ==
        doctest::Approx(exp_scalar_oracle(-0.25, 1.0)).epsilon(1e-12));
  Mat D = Mat::Zero(2, 2);
  D(0, 0) = -3.0;
  D(1, 1) = 1.7;
  const Mat E = matrix_exp(D, 2.0);
  CHECK(E(0, 0) == doctest::Approx(std::exp(-6.0)).epsilon(1e-12));
  CHECK(E(1, 1) == doctest::Approx(std::exp(3.4)).epsilon(1e-12));
  CHECK(E(0, 1) == doctest::Approx(0.0));
  // a rotation-like Metzler-patterned matrix against the series oracle
  Mat M(2, 2);
  M << -1.0, 0.5, 0.25, -2.0;
  const Mat E2 = matrix_exp(M, 1.5);
  // cross-check via squaring a finer exponential
  const Mat Ehalf = matrix_exp(M, 0.75);
  CHECK((E2 - Ehalf * Ehalf).lpNorm<Eigen::Infinity>() <= 1e-11);
}

TEST_CASE("growth bound basics") {
  auto dyn = heating_q1_dyn();
  const Box dom(v1(20.0), v1(90.0));
  GrowthBoundTable table(dyn, 0.5, 0.1, 2.0, dom);
  // t = 0 -> rho
  CHECK(table.growth_bound(v1(0.1), 0.0)[0] == doctest::Approx(0.1));
  // B = 0 -> exactly e^{Lt} rho
  DdeDynamics nodelay = dyn;
  nodelay.B.setZero();
  GrowthBoundTable t2(nodelay, 0.5, 0.1, 1.0, dom);
  CHECK(t2.growth_bound(v1(0.2), 1.0)[0] ==
        doctest::Approx(0.2 * std::exp(-0.25)).epsilon(1e-9));
}

TEST_CASE("growth bound dominates the fine quadrature oracle within 2%") {
  auto dyn = heating_q1_dyn();
  const Box dom(v1(20.0), v1(90.0));
  GrowthBoundTable table(dyn, 0.5, 0.1, 2.0, dom);
  for (double t : {0.5, 1.0, 1.5, 2.0}) {
    const double mine = table.growth_bound(v1(0.1), t)[0];
    const double oracle = lambda_oracle_1d(-0.25, 0.15, 1.0, 0.1, t, 1e-4);
    CHECK(mine >= oracle - 1e-9);
    CHECK(mine <= oracle * 1.02);
  }
}

TEST_CASE("disturbance tube: zero cases and the 1-D closed form") {
  auto dyn = heating_q1_dyn();
  const Box dom(v1(20.0), v1(90.0));
  GrowthBoundTable nod(dyn, 0.0, 0.1, 1.0, dom);
  CHECK(nod.disturbance_tube(1.0)[0] == doctest::Approx(0.0));
  GrowthBoundTable table(dyn, 0.5, 0.1, 2.0, dom);
  CHECK(table.disturbance_tube(0.0)[0] == doctest::Approx(0.0));

  DdeDynamics d1;
  d1.A = Mat::Constant(1, 1, -1.0);
  d1.B = Mat::Zero(1, 1);
  d1.C = Mat::Constant(1, 1, 1.0);
  d1.delay = 1.0;
  d1.nonlinear.assign(1, nullptr);
  GrowthBoundTable t1(d1, 0.5, 0.1, 2.0, Box(v1(-2), v1(2)));
  const double closed = 0.5 * (1.0 - std::exp(-2.0));
  const double mine = t1.disturbance_tube(2.0)[0];
  CHECK(mine >= closed - 1e-9);
  CHECK(mine <= closed * 1.05);
  CHECK(mine <= 0.5 + 1e-9);  // t -> inf limit
}

TEST_CASE("growth bound is monotone in rho") {
  auto dyn = heating_q1_dyn();
  GrowthBoundTable table(dyn, 0.5, 0.1, 2.0, Box(v1(20.0), v1(90.0)));
  Rng rng(17);
  for (int k = 0; k < 100; ++k) {
    const double r1 = rng.uniform(0.0, 1.0);
    const double r2 = r1 + rng.uniform(0.0, 1.0);
    const double t = rng.uniform(0.0, 2.0);
    CHECK(table.growth_bound(v1(r1), t)[0] <= table.growth_bound(v1(r2), t)[0] + 1e-12);
  }
}

TEST_CASE("halving the quadrature substep never increases the bound") {
  auto dyn = heating_q1_dyn();
  const Box dom(v1(20.0), v1(90.0));
  GrowthBoundTable coarse(dyn, 0.5, 0.1, 2.0, dom, 16);
  GrowthBoundTable fine(dyn, 0.5, 0.1, 2.0, dom, 32);
  for (double t : {0.2, 0.5, 1.0, 1.7, 2.0}) {
    CHECK(fine.growth_bound(v1(0.3), t)[0] <= coarse.growth_bound(v1(0.3), t)[0] + 1e-12);
    CHECK(fine.disturbance_tube(t)[0] <= coarse.disturbance_tube(t)[0] + 1e-12);
  }
}

TEST_CASE("nonlinear modes widen L to the Jacobian range") {
  DdeDynamics dyn;
  dyn.A = Mat::Constant(1, 1, -1.0);
  dyn.B = Mat::Constant(1, 1, 0.2);
  dyn.C = Mat::Constant(1, 1, 1.0);
  dyn.delay = 0.1;
  dyn.nonlinear = {fold(parse_expression("x1^2/100"))};
  const Box dom(v1(-0.5), v1(0.5));
  GrowthBoundTable table(dyn, 0.0, 0.05, 0.5, dom);
  // dL = sup over dom of -1 + x/50 = -1 + 0.01
  CHECK(table.L()(0, 0) == doctest::Approx(-0.99));
  CHECK(table.B_abs()(0, 0) == doctest::Approx(0.2));
}
