#ifndef DHS_GROWTH_HPP_
#define DHS_GROWTH_HPP_

#include <vector>

#include "dhs/model.hpp"

namespace dhs {

/* Minimal admissible L for the growth recursion: L_ii = A_ii, L_ij = |A_ij|. */
Mat build_L(const Mat& A);

/* e^{M t} by scaling-and-squaring of a truncated Taylor series; elementwise
 * truncation error certified <= 1e-12 (see matrix_exp_error_bound). */
Mat matrix_exp(const Mat& M, double t);

/* Growth-bound table for one mode: the linear maps Phi(t) with
 *   Lambda(rho, t) = Phi(t) rho,
 *   Phi(t) = e^{L t} + int_0^t e^{L(t-s)} |B| Phi(s - r) ds,  Phi(s<=0) = I,
 * marched with the upper rectangle rule on substeps h <= tau/substep_div,
 * plus the disturbance tube W(t) = int_0^t e^{L(t-s)} |C| 1 w_max ds. */
class GrowthBoundTable {
 public:
  GrowthBoundTable() = default;
  /* For nonlinear dynamics, L and |B| are widened to interval Jacobian
   * ranges over `domain` so the bound covers the difference system. */
  GrowthBoundTable(const DdeDynamics& dyn, double w_max, double tau, double horizon,
                   const Box& domain, int substep_div = 16);

  double substep() const { return h_; }
  double horizon() const { return horizon_; }
  const Mat& L() const { return L_; }
  const Mat& B_abs() const { return Babs_; }

  /* Lambda(rho, t) >= elementwise separation of trajectories started <= rho
   * apart (same disturbance); t is snapped to the substep grid outward. */
  Vec growth_bound(const Vec& rho, double t) const;
  /* sup over |w| <= w_max of the disturbance contribution at time t. */
  Vec disturbance_tube(double t) const;

  /* Upper bound of Phi/W over grid nodes spanning [t0, t1] (for tube hulls). */
  Vec growth_bound_max(const Vec& rho, double t0, double t1) const;
  Vec disturbance_tube_max(double t0, double t1) const;

 private:
  Mat L_, Babs_, Cabs_;
  double w_max_ = 0.0;
  double h_ = 0.0;
  double horizon_ = 0.0;
  double delay_ = 0.0;
  std::vector<Mat> phi_;  // per grid node
  std::vector<Vec> w_;    // per grid node
  std::size_t node_ceil(double t) const;
};

}  // namespace dhs

#endif
