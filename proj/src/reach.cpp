#include "dhs/reach.hpp"

#include <algorithm>
#include <cmath>
#include <future>

namespace dhs {

void ReachConfig::validate(int dim) const {
  if (rho.size() != dim || rho_th.size() != dim)
    throw std::invalid_argument("reach config: rho dimension mismatch");
  for (int i = 0; i < dim; ++i) {
    if (!(rho[i] > 0.0)) throw std::invalid_argument("reach config: rho must be positive");
    if (!(rho_th[i] > 0.0) || rho_th[i] > rho[i])
      throw std::invalid_argument("reach config: need 0 < rho_th <= rho");
  }
  if (!(tau > 0.0)) throw std::invalid_argument("reach config: tau must be positive");
  if (!(eps > 0.0)) throw std::invalid_argument("reach config: eps must be positive");
}

namespace {

/* Fixed-step RK4 with the delayed argument read from the stored nominal
 * samples (4-point Lagrange). Deliberately separate from simulate's
 * adaptive integrator: the reach side must not share its code path. */
class NominalTrajectory {
 public:
  NominalTrajectory(const DdeDynamics& dyn, const Vec& start, double h, std::size_t steps)
      : dyn_(dyn), h_(h), w0_(Vec::Zero(dyn.disturbance_dim())) {
    xs_.reserve(steps + 1);
    xs_.push_back(start);
    for (std::size_t k = 0; k < steps; ++k) {
      const double t = h_ * (double)k;
      const Vec& x = xs_.back();
      const Vec k1 = f(t, x);
      const Vec k2 = f(t + 0.5 * h_, x + 0.5 * h_ * k1);
      const Vec k3 = f(t + 0.5 * h_, x + 0.5 * h_ * k2);
      const Vec k4 = f(t + h_, x + h_ * k3);
      xs_.push_back(x + (h_ / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));
    }
  }

  const Vec& at_node(std::size_t k) const { return xs_[k]; }
  std::size_t nodes() const { return xs_.size(); }

  /* max_k |f(t_{k+1}) - f(t_k)| / h, a curvature estimate for the
   * inter-sample bulge allowance */
  Vec curvature_bound() const {
    Vec m = Vec::Zero(xs_[0].size());
    Vec fprev = f(0.0, xs_[0]);
    for (std::size_t k = 1; k < xs_.size(); ++k) {
      const Vec fk = f(h_ * (double)k, xs_[k]);
      m = m.cwiseMax((fk - fprev).cwiseAbs() / h_);
      fprev = fk;
    }
    return m;
  }

 private:
  const DdeDynamics& dyn_;
  double h_;
  Vec w0_;
  std::vector<Vec> xs_;

  Vec delayed(double t) const {
    const double td = t - dyn_.delay;
    if (td <= 0.0) return xs_[0];  // constant history = cell center
    const double u = td / h_;
    const int m = (int)xs_.size() - 1;
    int i1 = std::clamp((int)std::floor(u), 0, m - 1);
    if (m < 3) {
      const double fr = std::clamp(u - i1, 0.0, 1.0);
      return (1.0 - fr) * xs_[i1] + fr * xs_[i1 + 1];
    }
    const int i0 = std::clamp(i1 - 1, 0, m - 3);
    const double x = u - i0;
    const double c0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
    const double c1 = x * (x - 2.0) * (x - 3.0) / 2.0;
    const double c2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
    const double c3 = x * (x - 1.0) * (x - 2.0) / 6.0;
    return c0 * xs_[i0] + c1 * xs_[i0 + 1] + c2 * xs_[i0 + 2] + c3 * xs_[i0 + 3];
  }

  Vec f(double t, const Vec& x) const { return evaluate_rhs(dyn_, x, delayed(t), w0_, t); }
};

}  // namespace

ReachTube compute_tube(const Box& cell, const DdeDynamics& dyn, double w_max,
                       const GrowthBoundTable& growth, double horizon, double tau) {
  if (horizon > growth.horizon() + 1e-9)
    throw std::invalid_argument("compute_tube: horizon beyond the growth table");
  const double h = growth.substep();
  const std::size_t steps = (std::size_t)std::llround(horizon / h);
  const std::size_t per_tau = (std::size_t)std::llround(tau / h);
  if (per_tau == 0) throw std::invalid_argument("compute_tube: tau below the substep");

  NominalTrajectory nominal(dyn, cell.center(), h, steps);
  const Vec rho = cell.radius();

  // hull over the substep samples of (nominal center) ± (Lambda + W); the
  // t = 0 box reproduces the cell exactly, so rasterization cannot creep
  // into face-sharing neighbours
  ReachTube tube;
  tube.slices.reserve(steps / per_tau + 1);
  tube.slices.push_back(cell);

  std::optional<Box> step_hull;
  std::optional<Box> total;
  for (std::size_t k = 0; k <= steps; ++k) {
    const double t = h * (double)k;
    const Vec u = growth.growth_bound(rho, t) + growth.disturbance_tube(t);
    const Vec c = nominal.at_node(k);
    Box b(c - u, c + u);
    step_hull = step_hull ? step_hull->hull(b) : b;
    total = total ? total->hull(b) : b;
    if (k > 0 && k % per_tau == 0) {
      tube.step_hulls.push_back(*step_hull);
      tube.slices.push_back(b);
      step_hull = b;  // hulls share the boundary slice
    }
  }
  if (steps % per_tau != 0) tube.step_hulls.push_back(*step_hull);
  tube.hull = *total;
  return tube;
}

Box step_reach(const Box& cell, const DdeDynamics& dyn, double tau, double w_max,
               const GrowthBoundTable& growth) {
  return compute_tube(cell, dyn, w_max, growth, tau, tau).hull;
}

GridRegion InvariantResult::region() const {
  GridRegion r;
  r.cells = grid;
  r.has_ball = has_ball;
  r.ball = ball;
  r.ball_clip = ball_clip;
  return r;
}

ReachEngine::ReachEngine(const Mode& mode, const ConvergenceCertificate& cert, double w_max,
                         const ReachConfig& config, double growth_horizon)
    : mode_(&mode), w_max_(w_max), config_(config) {
  config_.validate(mode.invariant.dim());
  auto dom = mode.invariant.intersection(mode.safe);
  if (!dom) throw EmptyInvariantError("mode '" + mode.name + "': invariant and safe set are disjoint");
  domain_ = *dom;
  grid_ = MasterGrid(domain_, config_.rho);
  const double r1 = cert.r1(w_max);
  ball_ = Ball(cert.equilibrium, r1 + config_.eps);
  growth_ = GrowthBoundTable(mode.dynamics, w_max, config_.tau,
                             std::max(config_.tau, growth_horizon), domain_);
  if (!cert.linear && r1 + config_.eps > cert.iota + 1e-12)
    throw CertificationError("mode '" + mode.name +
                             "': attractor ball exceeds the linearization validity radius");
}

CellGrid ReachEngine::safe_r(const Box& cell, const Vec& rho) const {
  CellGrid out(&grid_);
  const Box tube = step_reach(cell, mode_->dynamics, config_.tau, w_max_, growth_);
  if (mode_->safe.contains_box(tube, 1e-12)) {
    out.mark_box(tube);
    return out;
  }
  bool half_ok = true;
  for (int i = 0; i < rho.size(); ++i)
    if (rho[i] / 2.0 < config_.rho_th[i]) half_ok = false;
  if (tube.intersects(mode_->safe) && half_ok) {
    // refine: 2^n children of half radius
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
      out |= safe_r(Box(lo, hi), rho / 2.0);
    }
  }
  return out;
}

CellGrid ReachEngine::safe_r_cached(std::size_t cell_index) const {
  auto it = safe_r_cache_.find(cell_index);
  if (it != safe_r_cache_.end()) return it->second;
  CellGrid r = safe_r(grid_.cell_box(cell_index), config_.rho);
  safe_r_cache_.emplace(cell_index, r);
  return r;
}

CellGrid ReachEngine::step_cells(const std::vector<std::size_t>& cells) const {
  CellGrid acc(&grid_);
  if (cells.empty()) return acc;
  const int threads = std::max(1, config_.threads);
  std::vector<std::size_t> missing;
  for (std::size_t idx : cells)
    if (!safe_r_cache_.count(idx)) missing.push_back(idx);
  if (threads > 1 && missing.size() >= 64) {
    // data-parallel over chunks; results land in the cache in chunk order,
    // so occupancy is identical for any thread count
    const std::size_t chunk = (missing.size() + threads - 1) / (std::size_t)threads;
    using Part = std::vector<std::pair<std::size_t, CellGrid>>;
    std::vector<std::future<Part>> futs;
    for (std::size_t off = 0; off < missing.size(); off += chunk) {
      const std::size_t end = std::min(missing.size(), off + chunk);
      futs.push_back(std::async(std::launch::async, [this, &missing, off, end] {
        Part part;
        part.reserve(end - off);
        for (std::size_t k = off; k < end; ++k)
          part.emplace_back(missing[k], safe_r(grid_.cell_box(missing[k]), config_.rho));
        return part;
      }));
    }
    for (auto& f : futs)
      for (auto& [idx, g] : f.get()) safe_r_cache_.emplace(idx, std::move(g));
  }
  for (std::size_t idx : cells) acc |= safe_r_cached(idx);
  return acc;
}

InvariantResult ReachEngine::d_invariant(const Box& xi, double T_star) const {
  auto p0_box = xi.intersection(mode_->safe);
  if (!p0_box) throw EmptyInvariantError("mode '" + mode_->name + "': initial set misses the safe set");
  if (!mode_->safe.contains_box(ball_.bounding_box(), 1e-12))
    throw EmptyInvariantError("mode '" + mode_->name +
                              "': attractor ball B(r1+eps) is not contained in the safe set");

  InvariantResult inv;
  inv.grid = CellGrid(&grid_);
  inv.has_ball = true;
  inv.ball = ball_;
  inv.ball_clip = mode_->safe;
  inv.grid.mark_box(*p0_box);

  // Stepping only the frontier is equivalent to the literal loop: reach sets
  // of older cells were already unioned into P.
  std::vector<std::size_t> frontier = inv.grid.occupied();
  double t = 0.0;
  bool first = true;
  while (t <= T_star) {
    const CellGrid reach = step_cells(frontier);
    if (reach.empty() && first) {
      // Algorithm 1's Break branch: reported as failure (conservative)
      throw EmptyInvariantError("mode '" + mode_->name +
                                "': every reach branch left the safe set");
    }
    first = false;
    ++inv.iterations;
    // fixpoint: new cells must lie inside P ∪ B(r1+eps)
    bool fix = true;
    std::vector<std::size_t> fresh;
    reach.for_each([&](std::size_t idx) {
      if (inv.grid.test(idx)) return;
      fresh.push_back(idx);
      if (!ball_.contains_box(grid_.cell_box(idx))) fix = false;
    });
    if (fix) {
      inv.fixed_point_reached = true;
      inv.elapsed_model_time = t;
      return inv;
    }
    for (std::size_t idx : fresh) inv.grid.set(idx);
    frontier = std::move(fresh);
    t += config_.tau;
    inv.elapsed_model_time = t;
  }
  return inv;
}

bool ReachEngine::reverify_fixpoint(const InvariantResult& inv) const {
  const CellGrid reach = step_cells(inv.grid.occupied());
  bool ok = true;
  reach.for_each([&](std::size_t idx) {
    if (!inv.grid.test(idx) && !ball_.contains_box(grid_.cell_box(idx))) ok = false;
  });
  return ok;
}

}  // namespace dhs
