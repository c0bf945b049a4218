#ifndef DHS_REACH_HPP_
#define DHS_REACH_HPP_

#include <unordered_map>

#include "dhs/convergence.hpp"
#include "dhs/growth.hpp"
#include "dhs/model.hpp"

namespace dhs {

struct ReachConfig {
  Vec rho;        // master cell radius
  Vec rho_th;     // refinement floor
  double tau = 0.0;
  double eps = 0.0;
  double T_star = 0.0;
  int threads = 1;

  void validate(int dim) const;
};

/* Over-approximate reach tube from an abstract cell (histories ranging in
 * the cell box) under any |w| <= w_max: nominal center trajectory inflated
 * by the growth bound and the disturbance tube. */
struct ReachTube {
  std::vector<Box> step_hulls;  // hull over [k tau, (k+1) tau]
  std::vector<Box> slices;      // slice at k tau (slices[0] = initial box)
  Box hull;                     // hull over the whole horizon
};

ReachTube compute_tube(const Box& cell, const DdeDynamics& dyn, double w_max,
                       const GrowthBoundTable& growth, double horizon, double tau);

/* Single reach step: box containing every state reachable within [0, tau]. */
Box step_reach(const Box& cell, const DdeDynamics& dyn, double tau, double w_max,
               const GrowthBoundTable& growth);

struct InvariantResult {
  CellGrid grid;       // P_i(q)
  bool has_ball = false;
  Ball ball;           // B(x_e, r1 + eps)
  Box ball_clip;       // S_q
  bool fixed_point_reached = false;
  int iterations = 0;
  double elapsed_model_time = 0.0;

  GridRegion region() const;
};

struct EmptyInvariantError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* Per-mode reach engine: owns the master grid and the per-cell SafeR cache
 * (results are pure functions of the cell box). */
class ReachEngine {
 public:
  ReachEngine(const Mode& mode, const ConvergenceCertificate& cert, double w_max,
              const ReachConfig& config, double growth_horizon);

  const MasterGrid& grid() const { return grid_; }
  const GrowthBoundTable& growth() const { return growth_; }
  const ReachConfig& config() const { return config_; }
  const Ball& ball() const { return ball_; }
  const Box& domain() const { return domain_; }
  const DdeDynamics& dynamics() const { return mode_->dynamics; }
  const Mode& mode() const { return *mode_; }
  double w_max() const { return w_max_; }

  /* SafeR: rasterized union of (possibly refined) reach steps; empty when
   * every branch exits S_q or bottoms out at rho_th unsafely. */
  CellGrid safe_r(const Box& cell, const Vec& rho) const;

  /* DInvariant: iterate P_{i+1} = P_i ∪ R_{P_i} until the fixpoint
   * R ⊆ P ∪ B(r1+eps) or accumulated time exceeds T*.
   * Throws EmptyInvariantError on the Break branch / infeasible setup. */
  InvariantResult d_invariant(const Box& xi, double T_star) const;

  /* One extra reach pass over the result (fixpoint re-verification). */
  bool reverify_fixpoint(const InvariantResult& inv) const;

 private:
  const Mode* mode_;
  double w_max_;
  ReachConfig config_;
  Box domain_;  // I(q) ∩ S_q bounding box
  MasterGrid grid_;
  GrowthBoundTable growth_;
  Ball ball_;
  mutable std::unordered_map<std::size_t, CellGrid> safe_r_cache_;

  CellGrid safe_r_cached(std::size_t cell_index) const;
  CellGrid step_cells(const std::vector<std::size_t>& cells) const;
};

}  // namespace dhs

#endif
