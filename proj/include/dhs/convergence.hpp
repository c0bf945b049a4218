#ifndef DHS_CONVERGENCE_HPP_
#define DHS_CONVERGENCE_HPP_

#include <optional>
#include <string>

#include "dhs/model.hpp"

namespace dhs {

struct CertificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/* Metzler ball-convergence certificate for one mode, taken around the mode's
 * equilibrium. M = A + B of the (linearized) dynamics in shifted coordinates. */
struct ConvergenceCertificate {
  Mat M;
  Vec zeta;          // > 0, |zeta|_inf = 1, M zeta < 0
  double beta = 0.0;   // (zeta)_min^{-1}
  double gamma = 0.0;  // min_i root of H_i
  double delta = 0.0;  // eta * beta
  double eta = 0.0;    // (-M zeta)_min
  double c_max = 0.0;  // max_i sum_j C_ij
  Vec equilibrium;     // x_e with f(x_e, x_e, 0) = 0
  bool linear = true;  // dynamics exactly affine-linear around x_e

  // nonlinear additions (zero / +inf defaults for linear modes)
  double g_max = 0.0;
  double g_total = 0.0;  // G = c_max * w_max + g_max
  double iota = std::numeric_limits<double>::infinity();

  /* radius of the attractor ball for disturbance bound w_max */
  double r1(double w_max) const {
    return linear ? c_max * w_max / eta : g_total / eta;
  }
};

struct HorizonBound {
  double r1 = 0.0;
  double r2 = 0.0;
  double eps = 0.0;
  double T_star = 0.0;
};

struct NonlinearBound {
  double g_max = 0.0;
  double g_total = 0.0;
  double iota = 0.0;
};

bool is_metzler(const Mat& M, double tol = 0.0);
/* M-matrix criterion: nonsingular with -M^{-1} >= 0 elementwise. */
bool is_hurwitz_metzler(const Mat& M);

/* zeta > 0 with |zeta|_inf = 1 and M zeta < 0; prefers the all-ones vector. */
Vec find_zeta(const Mat& M);

/* beta/eta/delta per the quoted construction; gamma_i solves
 *   H_i(g) = g zeta_i + sum_j zeta_j |B_ij| (e^{g r} - 1) - eta = 0
 * by bracketed bisection (residual <= 1e-9 enforced). */
ConvergenceCertificate convergence_constants(const Mat& M, const Mat& B_delay, double delay,
                                             const Vec& zeta, const Mat& C);

/* r1, r2 and T* = max{0, ln(r2/eps)/gamma} for histories with
 * |phi - x_e|_inf <= phi_norm. */
HorizonBound horizon(const ConvergenceCertificate& cert, double phi_norm, double w_max, double eps);

/* Jacobians of the full RHS wrt x and xd at the origin. */
void linearize(const DdeDynamics& dyn, Mat& A, Mat& B);

/* Smallest g on a geometric grid (refined by bisection) with
 * sup |g~|_inf over the box of radius H1(g) satisfying H2(g) <= g, where
 * H1(g) = G/eta + beta (iota_cap - G/delta)^+ and G = c_max w_max + g.
 * Throws CertificationError when no fixed point exists below the cap. */
NonlinearBound g_max_fixed_point(const DdeDynamics& dyn, const ConvergenceCertificate& cert,
                                 double w_max, double iota_cap);

/* Equilibrium of f(x, x, 0) = 0 by damped Newton from the origin. */
Vec find_equilibrium(const DdeDynamics& dyn);

/* Full per-mode certification: equilibrium, shift, Metzler checks, constants,
 * and the nonlinear bound when needed (iota_cap = sup |Xi - x_e|_inf unless
 * a larger initial-set norm is requested). */
ConvergenceCertificate certify_mode(const Mode& mode, double w_max,
                                    std::optional<double> iota_cap_override = std::nullopt);

}  // namespace dhs

#endif
