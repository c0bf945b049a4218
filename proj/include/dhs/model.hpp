#ifndef DHS_MODEL_HPP_
#define DHS_MODEL_HPP_

#include <optional>
#include <string>
#include <vector>

#include "dhs/expr.hpp"
#include "dhs/geometry.hpp"

namespace dhs {

/* Parse/validation failure with a JSON-pointer-ish field path. */
struct ModelError : std::runtime_error {
  std::string path;
  ModelError(std::string p, const std::string& what)
      : std::runtime_error(p + ": " + what), path(std::move(p)) {}
};

/* One mode's continuous dynamics
 *   xdot = A x(t) + B x(t - r) + C w(t) + g(x, xd, w, t)
 * with g given per component as an expression AST (empty slot = 0). */
struct DdeDynamics {
  Mat A, B, C;
  double delay = 0.0;                 // r > 0, seconds
  std::vector<ExprPtr> nonlinear;     // size n; null entries mean 0
  std::optional<double> g_max_hint;

  int state_dim() const { return (int)A.rows(); }
  int disturbance_dim() const { return (int)C.cols(); }
  bool has_nonlinear() const;
  /* All nonlinear slots are affine (or absent): dynamics are affine-linear. */
  bool is_affine() const;
};

/* xdot = f(x, xd, w, t), evaluated exactly as declared. */
Vec evaluate_rhs(const DdeDynamics& dyn, const Vec& x, const Vec& xd, const Vec& w, double t = 0.0);

/* Elementwise upper bound of |f| over x in x_box, xd in xd_box, |w| <= w_max,
 * by natural interval extension (t ranges over all reals when g uses it). */
Vec interval_sup_rhs(const DdeDynamics& dyn, const Box& x_box, const Box& xd_box, double w_max);

/* Interval enclosure of the full RHS over boxes (disturbance |w| <= w_max). */
void interval_rhs(const DdeDynamics& dyn, const Box& x_box, const Box& xd_box, double w_max,
                  std::vector<Interval>& out);

/* Jacobians of f wrt x and xd at a point (w = 0), by symbolic differentiation
 * of the declared terms. */
void jacobians_at(const DdeDynamics& dyn, const Vec& x, Mat& Jx, Mat& Jxd);

/* Interval ranges of the Jacobian entries over a box (x and xd both range
 * over the box); used to build sound growth bounds for nonlinear modes. */
void jacobian_ranges(const DdeDynamics& dyn, const Box& box, std::vector<Interval>& Jx,
                     std::vector<Interval>& Jxd);

struct Reset {
  bool identity = true;
  Mat M;  // affine: x' = M x + b
  Vec b;

  Vec apply(const Vec& x) const { return identity ? x : Vec(M * x + b); }
  Box apply_box(const Box& bx) const;
};

struct Mode {
  std::string name;
  DdeDynamics dynamics;
  Box invariant;  // I(q)
  Box initial;    // Xi(q): range of admissible history segments over [-r, 0]
  Box safe;       // S_q
};

struct Edge {
  int from = -1, to = -1;  // mode indices
  std::string from_name, to_name;
  Box guard;          // G(e)
  double jump_delay = 0.0;  // D(e) >= 0
  Reset reset;
};

/* Per-mode discretization defaults bundled with a model (CLI-overridable). */
struct ModelConfig {
  std::optional<Vec> rho;
  std::optional<double> tau;
  std::optional<double> eps;
  std::optional<double> rho_th_div;      // rho_th = rho / div
  std::optional<double> validate_horizon;
};

struct DelayHybridAutomaton {
  std::string name;
  int state_dim = 0;
  double w_max = 0.0;
  std::vector<Mode> modes;
  std::vector<Edge> edges;
  ModelConfig config;

  int mode_index(const std::string& name) const;  // -1 when absent
  std::vector<int> incoming_edges(int mode) const;
  std::vector<int> outgoing_edges(int mode) const;
};

DelayHybridAutomaton parse_model(const std::string& text);
DelayHybridAutomaton load_model(const std::string& path);
std::string serialize_model(const DelayHybridAutomaton& h);

}  // namespace dhs

#endif
