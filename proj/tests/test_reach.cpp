#include <doctest.h>

#include <cmath>
#include <functional>

#include "dhs/reach.hpp"
#include "dhs/simulate.hpp"

using namespace dhs;

namespace {
std::string models_dir() { return DHS_MODELS_DIR; }

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}

Mode mode_1d(double a, double b, double c, double delay, Box domain, Box init) {
  Mode m;
  m.name = "m";
  m.dynamics.A = Mat::Constant(1, 1, a);
  m.dynamics.B = Mat::Constant(1, 1, b);
  m.dynamics.C = Mat::Constant(1, 1, c);
  m.dynamics.delay = delay;
  m.dynamics.nonlinear.assign(1, nullptr);
  m.invariant = domain;
  m.safe = domain;
  m.initial = init;
  return m;
}

ReachConfig config_1d(double rho, double tau, double eps) {
  ReachConfig rc;
  rc.rho = v1(rho);
  rc.rho_th = v1(rho / 8.0);
  rc.tau = tau;
  rc.eps = eps;
  return rc;
}
}  // namespace

TEST_CASE("step_reach: static dynamics return the cell") {
  Mode m = mode_1d(0.0, 0.0, 0.0, 1.0, Box(v1(-10), v1(10)), Box(v1(0), v1(1)));
  GrowthBoundTable growth(m.dynamics, 0.0, 0.1, 0.1, m.safe);
  const Box cell(v1(0.25), v1(0.75));
  const Box out = step_reach(cell, m.dynamics, 0.1, 0.0, growth);
  CHECK(out.lo[0] == doctest::Approx(0.25).epsilon(1e-9));
  CHECK(out.hi[0] == doctest::Approx(0.75).epsilon(1e-9));
}

TEST_CASE("step_reach: 1-D decay from a point covers the closed-form range") {
  Mode m = mode_1d(-1.0, 0.0, 0.0, 1.0, Box(v1(-10), v1(10)), Box(v1(1), v1(1)));
  GrowthBoundTable growth(m.dynamics, 0.0, 1.0, 1.0, m.safe);
  const Box cell(v1(1.0), v1(1.0));
  const Box out = step_reach(cell, m.dynamics, 1.0, 0.0, growth);
  CHECK(out.lo[0] <= std::exp(-1.0) + 1e-6);
  CHECK(out.hi[0] >= 1.0 - 1e-9);
  CHECK(out.lo[0] >= std::exp(-1.0) - 1e-3);  // and not grossly inflated
  CHECK(out.hi[0] <= 1.0 + 1e-3);
}

TEST_CASE("step_reach: Monte-Carlo containment on the heating cell") {
  auto h = load_model(models_dir() + "/heating.json");
  const auto& dyn = h.modes[0].dynamics;
  GrowthBoundTable growth(dyn, h.w_max, 0.1, 0.1,
                          *h.modes[0].invariant.intersection(h.modes[0].safe));
  const Box cell(v1(49.9), v1(50.1));
  const Box tube = step_reach(cell, dyn, 0.1, h.w_max, growth);
  Rng rng(123);
  for (int k = 0; k < 1000; ++k) {
    HistorySegment hist = HistorySegment::random_in_box(dyn.delay, cell, 0.025, rng);
    DisturbanceSignal w = DisturbanceSignal::piecewise(1, h.w_max, rng.next(), 0.03);
    auto tr = simulate_mode(dyn, hist, w, 0.1, 0.025);
    for (const auto& s : tr.samples) {
      CHECK(s.x[0] >= tube.lo[0] - 1e-9);
      CHECK(s.x[0] <= tube.hi[0] + 1e-9);
    }
  }
}

TEST_CASE("safe_r: interior cells rasterize without refinement") {
  Mode m = mode_1d(-1.0, 0.1, 0.0, 1.0, Box(v1(-2), v1(2)), Box(v1(0), v1(1)));
  ConvergenceCertificate cert = certify_mode(m, 0.0);
  ReachEngine eng(m, cert, 0.0, config_1d(0.1, 0.1, 1e-3), 0.1);
  const CellGrid r = eng.safe_r(Box(v1(0.0), v1(0.2)), v1(0.1));
  CHECK(!r.empty());
  const Box tube = step_reach(Box(v1(0.0), v1(0.2)), m.dynamics, 0.1, 0.0, eng.growth());
  CHECK(r.contains_box(tube));
}

TEST_CASE("safe_r: cells whose tube exits the safe set vanish") {
  // strong positive drift pushes everything out of a small safe box
  Mode m = mode_1d(0.0, 0.0, 0.0, 1.0, Box(v1(-1), v1(1)), Box(v1(0), v1(0.5)));
  m.dynamics.nonlinear = {fold(parse_expression("50"))};  // xdot = 50
  ConvergenceCertificate cert;  // hand-built: certification would refuse this mode
  cert.equilibrium = Vec::Zero(1);
  cert.M = Mat::Constant(1, 1, -1.0);
  cert.zeta = Vec::Ones(1);
  cert.beta = cert.eta = cert.delta = cert.gamma = 1.0;
  cert.c_max = 0.0;
  cert.linear = true;
  ReachEngine eng(m, cert, 0.0, config_1d(0.1, 0.1, 1e-3), 0.1);
  const CellGrid r = eng.safe_r(Box(v1(0.8), v1(1.0)), v1(0.1));
  CHECK(r.empty());
}

TEST_CASE("safe_r: straddling cell equals the explicit recursion oracle") {
  Mode m = mode_1d(1.0, 0.0, 0.0, 1.0, Box(v1(-1), v1(1)), Box(v1(0), v1(0.5)));
  ConvergenceCertificate cert;
  cert.equilibrium = Vec::Zero(1);
  cert.M = Mat::Constant(1, 1, 1.0);
  cert.zeta = Vec::Ones(1);
  cert.beta = cert.eta = cert.delta = cert.gamma = 1.0;
  cert.c_max = 0.0;
  cert.linear = true;
  ReachEngine eng(m, cert, 0.0, config_1d(0.2, 0.1, 1e-3), 0.1);

  // independent literal recursion over the same step primitive
  std::function<CellGrid(const Box&, const Vec&)> oracle = [&](const Box& cell,
                                                               const Vec& rho) -> CellGrid {
    CellGrid out(&eng.grid());
    const Box tube = step_reach(cell, m.dynamics, 0.1, 0.0, eng.growth());
    if (m.safe.contains_box(tube, 1e-12)) {
      out.mark_box(tube);
      return out;
    }
    if (tube.intersects(m.safe) && rho[0] / 2.0 >= eng.config().rho_th[0]) {
      const double c = cell.center()[0];
      out |= oracle(Box(cell.lo, v1(c)), rho / 2.0);
      out |= oracle(Box(v1(c), cell.hi), rho / 2.0);
    }
    return out;
  };

  // growth from xdot = x pushes the top cell over the boundary
  const Box straddler(v1(0.7), v1(1.0));
  const CellGrid mine = eng.safe_r(straddler, v1(0.15));
  const CellGrid want = oracle(straddler, v1(0.15));
  CHECK(mine == want);
  CHECK(!mine.empty());
}

TEST_CASE("d_invariant: immediate fixpoint when Xi sits inside the ball") {
  // xdot = -x + 0.2 xd + 0.2 w: r1 = 0.2 * 0.5 / 0.8 = 0.125; eps widens the
  // ball so one rasterized reach step stays inside it
  Mode m = mode_1d(-1.0, 0.2, 0.2, 1.0, Box(v1(-2), v1(2)), Box(v1(-0.05), v1(0.05)));
  ConvergenceCertificate cert = certify_mode(m, 0.5);
  ReachEngine eng(m, cert, 0.5, config_1d(0.05, 0.1, 0.1), 0.1);
  const double T_star = horizon(cert, 0.05, 0.5, 0.1).T_star;
  const InvariantResult inv = eng.d_invariant(m.initial, T_star);
  CHECK(inv.fixed_point_reached);
  CHECK(inv.iterations == 1);
}

TEST_CASE("d_invariant: Monte-Carlo under-approximation oracle in 1-D") {
  // xdot = -x + 0.5 w, Xi = [0.9, 1.1], S = [-2, 2], |w| <= 1
  Mode m = mode_1d(-1.0, 0.0, 0.5, 1.0, Box(v1(-2), v1(2)), Box(v1(0.9), v1(1.1)));
  ConvergenceCertificate cert = certify_mode(m, 1.0);
  ReachEngine eng(m, cert, 1.0, config_1d(0.05, 0.1, 1e-3), 0.1);
  const double T_star = horizon(cert, 1.1, 1.0, 1e-3).T_star;
  const InvariantResult inv = eng.d_invariant(m.initial, T_star);
  const GridRegion region = inv.region();
  Rng rng(2024);
  for (int k = 0; k < 1000; ++k) {
    HistorySegment hist = HistorySegment::random_in_box(1.0, m.initial, 0.25, rng);
    DisturbanceSignal w = DisturbanceSignal::piecewise(1, 1.0, rng.next(), 0.5);
    auto tr = simulate_mode(m.dynamics, hist, w, 3.0 * std::max(T_star, 1.0), 0.25);
    for (const auto& s : tr.samples) CHECK(region.contains_point_within(s.x, 1e-3));
  }
}

TEST_CASE("d_invariant: heating q1 stays sound and reaches the ball") {
  auto h = load_model(models_dir() + "/heating.json");
  ConvergenceCertificate cert = certify_mode(h.modes[0], h.w_max);
  ReachConfig rc = config_1d(0.5, 0.1, 1e-3);
  ReachEngine eng(h.modes[0], cert, h.w_max, rc, 2.0);
  const double pn = h.modes[0].initial.sup_norm_around(cert.equilibrium);
  const double T_star = horizon(cert, pn, h.w_max, 1e-3).T_star;
  const InvariantResult inv = eng.d_invariant(h.modes[0].initial, T_star);
  CHECK(inv.fixed_point_reached);
  const Box hull = inv.region().bounding_box();
  // the published I*(q1) = [30, 84.91] arises after the synthesis loop grows
  // K with incoming guard landings; from Xi alone the invariant must cover
  // the climb from Xi into the ball around 80 and stay within S
  CHECK(hull.lo[0] >= 20.0 - 1e-9);
  CHECK(hull.hi[0] <= 90.0 + 1e-9);
  CHECK(hull.hi[0] >= 85.0);
  MESSAGE("heating q1 invariant from Xi alone: [", hull.lo[0], ", ", hull.hi[0], "]");

  const GridRegion region = inv.region();
  Rng rng(7);
  for (int k = 0; k < 200; ++k) {
    HistorySegment hist = HistorySegment::random_in_box(1.0, h.modes[0].initial, 0.125, rng);
    DisturbanceSignal w = DisturbanceSignal::piecewise(1, h.w_max, rng.next(), 0.4);
    auto tr = simulate_mode(h.modes[0].dynamics, hist, w, 60.0, 0.125);
    for (const auto& s : tr.samples) CHECK(region.contains_point_within(s.x, 1e-3));
  }
}

TEST_CASE("d_invariant: infeasible safe set fails with EmptyInvariant") {
  auto h = load_model(models_dir() + "/heating.json");
  Mode tight = h.modes[0];
  tight.safe = Box(v1(50.0), v1(55.0));
  tight.invariant = tight.safe;
  ConvergenceCertificate cert = certify_mode(tight, h.w_max);
  // ball [75, 85] sits far outside S = [50, 55]
  ReachEngine eng(tight, cert, h.w_max, config_1d(0.5, 0.1, 1e-3), 2.0);
  CHECK_THROWS_AS(eng.d_invariant(tight.initial, 10.0), EmptyInvariantError);
}

TEST_CASE("reverify_fixpoint holds exactly on a fixed point") {
  Mode m = mode_1d(-1.0, 0.2, 0.2, 1.0, Box(v1(-2), v1(2)), Box(v1(-0.5), v1(0.5)));
  ConvergenceCertificate cert = certify_mode(m, 0.5);
  ReachEngine eng(m, cert, 0.5, config_1d(0.05, 0.1, 1e-2), 0.1);
  const double T_star = horizon(cert, 0.5, 0.5, 1e-2).T_star;
  const InvariantResult inv = eng.d_invariant(m.initial, T_star);
  REQUIRE(inv.fixed_point_reached);
  CHECK(eng.reverify_fixpoint(inv));
}

TEST_CASE("thread count does not change the occupancy") {
  auto h = load_model(models_dir() + "/heating.json");
  ConvergenceCertificate cert = certify_mode(h.modes[0], h.w_max);
  const double pn = h.modes[0].initial.sup_norm_around(cert.equilibrium);
  const double T_star = horizon(cert, pn, h.w_max, 1e-3).T_star;
  ReachConfig rc1 = config_1d(0.25, 0.1, 1e-3);
  ReachConfig rc4 = rc1;
  rc4.threads = 4;
  ReachEngine e1(h.modes[0], cert, h.w_max, rc1, 2.0);
  ReachEngine e4(h.modes[0], cert, h.w_max, rc4, 2.0);
  const InvariantResult i1 = e1.d_invariant(h.modes[0].initial, T_star);
  const InvariantResult i4 = e4.d_invariant(h.modes[0].initial, T_star);
  CHECK(i1.grid == i4.grid);
  CHECK(i1.iterations == i4.iterations);
}
