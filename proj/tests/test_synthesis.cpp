#include <doctest.h>

#include <cmath>

#include "dhs/synthesis.hpp"

using namespace dhs;

namespace {
std::string models_dir() { return DHS_MODELS_DIR; }

Vec v1(double a) {
  Vec v(1);
  v << a;
  return v;
}
}  // namespace

TEST_CASE("degenerate automaton with no edges succeeds in one iteration") {
  DelayHybridAutomaton h;
  h.name = "single";
  h.state_dim = 1;
  h.w_max = 0.1;
  Mode m;
  m.name = "only";
  m.dynamics.A = Mat::Constant(1, 1, -1.0);
  m.dynamics.B = Mat::Constant(1, 1, 0.2);
  m.dynamics.C = Mat::Constant(1, 1, 1.0);
  m.dynamics.delay = 0.4;
  m.dynamics.nonlinear.assign(1, nullptr);
  m.invariant = Box(v1(-1), v1(1));
  m.safe = m.invariant;
  m.initial = Box(v1(-0.1), v1(0.1));
  h.modes.push_back(m);
  SynthesisConfig cfg;
  cfg.rho = v1(0.05);
  cfg.tau = 0.1;
  cfg.eps = 1e-3;
  const SynthesisResult res = synthesize(h, cfg);
  REQUIRE(res.success());
  CHECK(res.iterations <= 2);  // iteration 2 only confirms the fixpoint
  CHECK(res.converged);
  const RefinementReport rep = check_refinement(h, res, 200, 0, 20.0);
  CHECK(rep.r1_safe);
  CHECK(rep.r2_refinement);
  CHECK(rep.r3_nonblocking);  // no outgoing edges: vacuously non-blocking
  CHECK(rep.c1);
  CHECK(rep.c2);  // no jumps: vacuous
}

TEST_CASE("heating synthesis succeeds and the report is clean") {
  auto h = load_model(models_dir() + "/heating.json");
  const SynthesisConfig cfg = SynthesisConfig::defaults_for(h);
  SynthesisResult res = synthesize(h, cfg);
  REQUIRE(res.success());
  CHECK(res.converged);

  // published fixtures (non-gating): report the agreement
  const Box i1 = res.modes[0].invariant.region().bounding_box();
  const Box i2 = res.modes[1].invariant.region().bounding_box();
  const Box g1 = res.edges[0].back.guard_star.bounding_box();
  const Box g2 = res.edges[1].back.guard_star.bounding_box();
  MESSAGE("I*(q1) = [", i1.lo[0], ", ", i1.hi[0], "]  (paper [30, 84.91])");
  MESSAGE("I*(q2) = [", i2.lo[0], ", ", i2.hi[0], "]  (paper [30.2056, 90])");
  MESSAGE("G*(e1) = [", g1.lo[0], ", ", g1.hi[0], "]  (paper [30, 84.30])");
  MESSAGE("G*(e2) = [", g2.lo[0], ", ", g2.hi[0], "]  (paper [34.5, 90])");
  CHECK(!res.edges[0].back.guard_star.empty());
  CHECK(!res.edges[1].back.guard_star.empty());

  // iteration monotonicity held throughout
  for (const auto& st : res.history) {
    CHECK(st.k_monotone);
    CHECK(st.i_monotone);
  }
  // hard gate: seeded hybrid campaign
  const RefinementReport rep = check_refinement(h, res, 300, 0, 200.0);
  CHECK(rep.r1_safe);
  CHECK(rep.r2_refinement);
  CHECK(rep.r3_nonblocking);
  CHECK(rep.c1);
  CHECK(rep.c2);
}

TEST_CASE("infeasibly tight safe set fails as EmptyInvariant") {
  auto h = load_model(models_dir() + "/heating.json");
  for (auto& m : h.modes) {
    m.safe = Box(v1(50.0), v1(55.0));
    m.initial = Box(v1(50.0), v1(55.0));
  }
  const SynthesisConfig cfg = SynthesisConfig::defaults_for(h);
  const SynthesisResult res = synthesize(h, cfg);
  CHECK(!res.success());
  CHECK(res.status == SynthesisStatus::EmptyInvariant);
}

TEST_CASE("mutation: widening G* beyond the computed set is caught") {
  auto h = load_model(models_dir() + "/heating.json");
  const SynthesisConfig cfg = SynthesisConfig::defaults_for(h);
  SynthesisResult res = synthesize(h, cfg);
  REQUIRE(res.success());
  // widen G*(e2) by several cells below the certified bottom
  CellGrid& g2 = res.edges[1].back.guard_star;
  const Box hull = g2.bounding_box();
  const MasterGrid& grid = res.engines[1]->grid();
  Box widened(v1(hull.lo[0] - 6.0), v1(hull.lo[0] - 0.001));
  g2.mark_box(widened);
  const RefinementReport rep = check_refinement(h, res, 300, 0, 200.0);
  CHECK(!(rep.c2 && rep.c1 && rep.r1_safe));  // some containment must break
  CHECK((rep.c2_counterexample.present || rep.c1_counterexample.present ||
         rep.r1_counterexample.present));
}

TEST_CASE("mutation: unrefined invariant with large disturbance violates safety") {
  auto h = load_model(models_dir() + "/heating.json");
  h.w_max = 5.0;  // "w large": nominal envelopes now cross the safe boundary
  const SynthesisConfig cfg = SynthesisConfig::defaults_for(h);
  SynthesisResult res = synthesize(h, cfg);
  // I* := I (no refinement): every safe-set cell occupied, guards = I
  for (std::size_t q = 0; q < h.modes.size(); ++q) {
    auto& ma = res.modes[q];
    ma.invariant.grid.clear();
    ma.invariant.grid.mark_box(h.modes[q].safe);
    ma.invariant.has_ball = false;
    ma.xi_star = *h.modes[q].initial.intersection(h.modes[q].safe);
  }
  for (std::size_t ei = 0; ei < h.edges.size(); ++ei) {
    auto& ea = res.edges[ei];
    ea.back.guard_star.clear();
    ea.back.guard_star.mark_box(h.modes[h.edges[ei].from].safe);
  }
  const RefinementReport rep = check_refinement(h, res, 200, 0, 120.0);
  CHECK(!rep.r1_safe);
  CHECK(rep.r1_counterexample.present);
}

TEST_CASE("determinism: identical inputs and seed give identical reports") {
  auto h = load_model(models_dir() + "/heating.json");
  const SynthesisConfig cfg = SynthesisConfig::defaults_for(h);
  SynthesisResult r1 = synthesize(h, cfg);
  SynthesisResult r2 = synthesize(h, cfg);
  REQUIRE(r1.success());
  REQUIRE(r2.success());
  CHECK(r1.iterations == r2.iterations);
  for (std::size_t q = 0; q < h.modes.size(); ++q)
    CHECK(r1.modes[q].invariant.grid == r2.modes[q].invariant.grid);
  for (std::size_t ei = 0; ei < h.edges.size(); ++ei)
    CHECK(r1.edges[ei].back.guard_star == r2.edges[ei].back.guard_star);
  const RefinementReport a = check_refinement(h, r1, 50, 42, 100.0);
  const RefinementReport b = check_refinement(h, r2, 50, 42, 100.0);
  CHECK(a.c1_witnesses == b.c1_witnesses);
  CHECK(a.c2_witnesses == b.c2_witnesses);
}

TEST_CASE("jump delay off the tau grid is rejected") {
  auto h = load_model(models_dir() + "/heating.json");
  h.edges[0].jump_delay = 2.03;
  const SynthesisConfig cfg = SynthesisConfig::defaults_for(h);
  const SynthesisResult res = synthesize(h, cfg);
  CHECK(!res.success());
  CHECK(res.status == SynthesisStatus::EmptyGuard);
}
