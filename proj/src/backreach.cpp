#include "dhs/backreach.hpp"

#include <cmath>

namespace dhs {

CellGrid candidate_set(const CellGrid& fake_guard, const CellGrid& i_star_cells, const Vec& d,
                       const Vec& rho) {
  if (!fake_guard.grid().same_layout(i_star_cells.grid()))
    throw std::invalid_argument("candidate_set: grids must share the master layout");
  std::vector<int> k(rho.size());
  for (int i = 0; i < rho.size(); ++i)
    k[i] = (int)std::ceil((d[i] + 4.0 * rho[i]) / (2.0 * rho[i]) - 1e-12);
  CellGrid cand = fake_guard.dilated(k);
  cand &= i_star_cells;
  // the first disjunct of ⊎: cells already in G~ always qualify
  CellGrid base = fake_guard;
  base &= i_star_cells;
  cand |= base;
  return cand;
}

namespace {

/* Occupancy universe of I* = P ∪ (ball ∩ S): P's cells plus an outward
 * rasterization of the clipped ball (candidates only; acceptance tests are
 * exact). */
CellGrid region_occupancy(const GridRegion& region, const MasterGrid& grid) {
  CellGrid occ = region.cells;
  if (region.has_ball) {
    if (auto clipped = region.ball.bounding_box().intersection(region.ball_clip))
      occ.mark_box(*clipped);
  }
  return occ;
}

struct BackReachWorker {
  const CellGrid& fake_guard;
  double jump_delay;
  const GridRegion& i_star;
  const ReachEngine& engine;
  double r_post;
  const Reset& reset;
  const Box& landing_constraint;
  long long refined = 0;
  std::optional<Box> window;

  /* trailing [D - r_post, D] of the tube: range of the post-jump history */
  Box cell_window(const ReachTube& tube, std::size_t d_steps) const {
    const double t0 = std::max(0.0, jump_delay - r_post);
    const std::size_t k0 = (std::size_t)std::floor(t0 / engine.config().tau + 1e-9);
    Box acc = tube.slices[d_steps];
    for (std::size_t k = k0; k < d_steps; ++k) acc = acc.hull(tube.step_hulls[k]);
    return acc;
  }

  /* true iff the whole cell is certified (directly or via full child cover) */
  bool accept(const Box& cell, const Vec& rho) {
    const double horizon = std::max(jump_delay, engine.config().tau);
    const ReachTube tube = compute_tube(cell, engine.dynamics(), engine.w_max(), engine.growth(),
                                        horizon, engine.config().tau);
    const std::size_t d_steps = (std::size_t)std::llround(jump_delay / engine.config().tau);
    bool inside = true;  // tube ⊆ I*(q) over [0, D(e)]
    for (std::size_t k = 0; k < d_steps && inside; ++k)
      if (!i_star.contains_box(tube.step_hulls[k])) inside = false;
    if (!inside) return false;
    const Box& slice = tube.slices[d_steps];
    if (fake_guard.contains_box(slice)) {
      const Box win = cell_window(tube, d_steps);
      if (!landing_constraint.contains_box(reset.apply_box(win), 1e-9)) return false;
      window = window ? window->hull(win) : win;
      return true;
    }
    if (!fake_guard.intersects_box(slice)) return false;
    bool half_ok = true;
    for (int i = 0; i < rho.size(); ++i)
      if (rho[i] / 2.0 < engine.config().rho_th[i]) half_ok = false;
    if (!half_ok) return false;
    ++refined;
    const int n = cell.dim();
    const Vec c = cell.center();
    for (unsigned mask = 0; mask < (1u << n); ++mask) {
      Vec lo(n), hi(n);
      for (int i = 0; i < n; ++i) {
        if (mask & (1u << i)) {
          lo[i] = c[i];
          hi[i] = cell.hi[i];
        } else {
          lo[i] = cell.lo[i];
          hi[i] = c[i];
        }
      }
      if (!accept(Box(lo, hi), rho / 2.0)) return false;
    }
    return true;
  }
};

}  // namespace

BackreachResult back_reach(const CellGrid& fake_guard, double jump_delay,
                           const GridRegion& i_star, const ReachEngine& engine, double r_post,
                           const Reset& reset, const Box& landing_constraint) {
  const MasterGrid& grid = engine.grid();
  BackreachResult out;
  out.guard_star = CellGrid(&grid);
  if (fake_guard.empty()) return out;

  const double ratio = jump_delay / engine.config().tau;
  if (std::fabs(ratio - std::round(ratio)) > 1e-6)
    throw std::invalid_argument("back_reach: jump delay must be an integer multiple of tau");

  // d <- |sup f| * D(e) over the invariant's bounding box
  const Box bb = i_star.bounding_box();
  const Vec d = interval_sup_rhs(engine.dynamics(), bb, bb, engine.w_max()) * jump_delay;
  const CellGrid universe = region_occupancy(i_star, grid);
  const CellGrid candidates = candidate_set(fake_guard, universe, d, grid.rho());

  BackReachWorker worker{fake_guard, jump_delay,  i_star,
                         engine,     r_post,      reset,
                         landing_constraint};
  candidates.for_each([&](std::size_t idx) {
    ++out.candidates_examined;
    if (worker.accept(grid.cell_box(idx), grid.rho())) out.guard_star.set(idx);
  });
  out.refined = worker.refined;
  out.landing_window = worker.window;
  return out;
}

}  // namespace dhs
