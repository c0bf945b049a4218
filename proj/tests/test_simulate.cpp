#include <doctest.h>

#include <cmath>

#include "dhs/simulate.hpp"

using namespace dhs;

namespace {
Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

DdeDynamics decay_ode() {  // xdot = -x, delay term absent (B = 0)
  DdeDynamics dyn;
  dyn.A = Mat::Constant(1, 1, -1.0);
  dyn.B = Mat::Zero(1, 1);
  dyn.C = Mat::Zero(1, 1);
  dyn.delay = 1.0;
  dyn.nonlinear.assign(1, nullptr);
  return dyn;
}

DdeDynamics pure_delay() {  // xdot = -x(t-1)
  DdeDynamics dyn;
  dyn.A = Mat::Zero(1, 1);
  dyn.B = Mat::Constant(1, 1, -1.0);
  dyn.C = Mat::Zero(1, 1);
  dyn.delay = 1.0;
  dyn.nonlinear.assign(1, nullptr);
  return dyn;
}
}  // namespace

TEST_CASE("exponential decay hits the closed form") {
  auto dyn = decay_ode();
  auto hist = HistorySegment::constant(1.0, v1(1.0), 0.125);
  auto tr = simulate_mode(dyn, hist, DisturbanceSignal::zero(1), 1.0, 0.125);
  CHECK(tr.samples.back().t == doctest::Approx(1.0));
  CHECK(tr.samples.back().x[0] == doctest::Approx(std::exp(-1.0)).epsilon(1e-6));
}

TEST_CASE("method of steps: xdot = -x(t-1) from phi == 1 gives x(1) = 0") {
  auto dyn = pure_delay();
  auto hist = HistorySegment::constant(1.0, v1(1.0), 0.125);
  auto tr = simulate_mode(dyn, hist, DisturbanceSignal::zero(1), 1.0, 0.25);
  // x(t) = 1 - t on [0, 1]
  for (const auto& s : tr.samples)
    CHECK(s.x[0] == doctest::Approx(1.0 - s.t).epsilon(1e-12));
  CHECK(std::fabs(tr.samples.back().x[0]) <= 1e-12);
}

TEST_CASE("zero dynamics give a constant trace") {
  DdeDynamics dyn;
  dyn.A = Mat::Zero(1, 1);
  dyn.B = Mat::Zero(1, 1);
  dyn.C = Mat::Zero(1, 1);
  dyn.delay = 0.4;
  dyn.nonlinear.assign(1, nullptr);
  auto hist = HistorySegment::constant(0.4, v1(3.25), 0.05);
  auto tr = simulate_mode(dyn, hist, DisturbanceSignal::zero(1), 2.0, 0.1);
  for (const auto& s : tr.samples) CHECK(s.x[0] == doctest::Approx(3.25));
}

TEST_CASE("fourth-order convergence: halving tau_sim cuts error by >= 8x") {
  auto dyn = decay_ode();
  const double huge_tol = 1e9;  // disable step control to expose the raw order
  auto run = [&](double ts) {
    auto hist = HistorySegment::constant(1.0, v1(1.0), ts);
    auto tr = simulate_mode(dyn, hist, DisturbanceSignal::zero(1), 1.0, ts, huge_tol);
    return std::fabs(tr.samples.back().x[0] - std::exp(-1.0));
  };
  const double e1 = run(0.25);
  const double e2 = run(0.125);
  CHECK(e1 / e2 >= 8.0);
}

TEST_CASE("fixed seed reproduces traces bit for bit") {
  auto dyn = decay_ode();
  dyn.C = Mat::Constant(1, 1, 1.0);
  auto hist = HistorySegment::constant(1.0, v1(0.7), 0.125);
  auto w1 = DisturbanceSignal::piecewise(1, 0.5, 99, 0.3);
  auto w2 = DisturbanceSignal::piecewise(1, 0.5, 99, 0.3);
  auto t1 = simulate_mode(dyn, hist, w1, 5.0, 0.125);
  auto t2 = simulate_mode(dyn, hist, w2, 5.0, 0.125);
  REQUIRE(t1.samples.size() == t2.samples.size());
  for (std::size_t i = 0; i < t1.samples.size(); ++i)
    CHECK(t1.samples[i].x[0] == t2.samples[i].x[0]);  // exact equality
  auto w3 = DisturbanceSignal::piecewise(1, 0.5, 100, 0.3);
  auto t3 = simulate_mode(dyn, hist, w3, 5.0, 0.125);
  bool any_diff = false;
  for (std::size_t i = 0; i < t1.samples.size(); ++i)
    any_diff = any_diff || t1.samples[i].x[0] != t3.samples[i].x[0];
  CHECK(any_diff);
}

TEST_CASE("disturbance signals respect the bound") {
  Rng rng(4);
  auto w = DisturbanceSignal::piecewise(2, 0.7, 5, 0.25);
  for (int k = 0; k < 1000; ++k) {
    const Vec v = w.at(rng.uniform(0.0, 50.0));
    CHECK(v.lpNorm<Eigen::Infinity>() <= 0.7 + 1e-12);
  }
  auto s = DisturbanceSignal::sinusoid(1, 0.5, 1.0, 0.0, 0.5);
  CHECK(s.at(M_PI / 2.0)[0] == doctest::Approx(0.5));
  CHECK_THROWS_AS(DisturbanceSignal::sinusoid(1, 0.6, 1.0, 0.0, 0.5), std::invalid_argument);
}

TEST_CASE("tau_sim preconditions are enforced") {
  auto dyn = decay_ode();
  auto hist = HistorySegment::constant(1.0, v1(1.0), 0.125);
  CHECK_THROWS_AS(simulate_mode(dyn, hist, DisturbanceSignal::zero(1), 1.0, 0.3),
                  std::invalid_argument);  // > r/4
  CHECK_THROWS_AS(simulate_mode(dyn, hist, DisturbanceSignal::zero(1), 1.0, 0.23),
                  std::invalid_argument);  // does not divide r
}

TEST_CASE("random histories range inside their box") {
  Rng rng(8);
  const Box box(v1(-2.0), v1(3.0));
  for (int k = 0; k < 50; ++k) {
    auto hist = HistorySegment::random_in_box(1.0, box, 0.1, rng);
    CHECK(hist.ranges_in(box, 1e-12));
    // the sampling margin absorbs the cubic overshoot entirely
    for (double th = -1.0; th <= 0.0; th += 0.01) {
      const double v = hist.at(th)[0];
      CHECK(v >= box.lo[0] - 1e-9);
      CHECK(v <= box.hi[0] + 1e-9);
    }
  }
}
