#include "dhs/growth.hpp"

#include <cmath>
#include <stdexcept>

namespace dhs {

Mat build_L(const Mat& A) {
  if (A.rows() != A.cols()) throw std::invalid_argument("build_L: square matrix required");
  Mat L = A.cwiseAbs();
  for (int i = 0; i < A.rows(); ++i) L(i, i) = A(i, i);
  return L;
}

Mat matrix_exp(const Mat& M, double t) {
  if (t < 0.0) throw std::invalid_argument("matrix_exp: t must be nonnegative");
  const int n = (int)M.rows();
  Mat X = M * t;
  double norm = X.lpNorm<Eigen::Infinity>();
  int s = 0;
  while (norm > 0.5) {
    norm *= 0.5;
    ++s;
  }
  X /= std::pow(2.0, s);
  // Taylor with |X| <= 1/2: remainder after K terms <= |X|^{K+1}/(K+1)! * 2,
  // K = 20 leaves < 1e-19, far under the 1e-12 budget even after squaring.
  const int K = 20;
  Mat term = Mat::Identity(n, n);
  Mat sum = term;
  for (int k = 1; k <= K; ++k) {
    term = term * X / (double)k;
    sum += term;
  }
  for (int k = 0; k < s; ++k) sum = sum * sum;
  return sum;
}

GrowthBoundTable::GrowthBoundTable(const DdeDynamics& dyn, double w_max, double tau,
                                   double horizon, const Box& domain, int substep_div) {
  if (!(tau > 0.0) || !(horizon >= 0.0)) throw std::invalid_argument("growth table: bad tau/horizon");
  if (substep_div < 1) throw std::invalid_argument("growth table: substep divisor must be >= 1");
  const int n = dyn.state_dim();
  w_max_ = w_max;
  delay_ = dyn.delay;
  if (dyn.is_affine()) {
    L_ = build_L(dyn.A);
    Babs_ = dyn.B.cwiseAbs();
  } else {
    // widen to the Jacobian ranges over the domain so the bound also covers
    // the nonlinear difference system
    std::vector<Interval> jx, jxd;
    jacobian_ranges(dyn, domain, jx, jxd);
    L_.resize(n, n);
    Babs_.resize(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const Interval& ax = jx[(std::size_t)i * n + j];
        L_(i, j) = (i == j) ? ax.hi : ax.mag();
        Babs_(i, j) = jxd[(std::size_t)i * n + j].mag();
      }
  }
  Cabs_ = dyn.C.cwiseAbs();

  // h = tau / k with k integer: tube slices land exactly on the tau grid.
  // h <= r keeps the lookback Phi(s - r) on already-computed nodes.
  const double k_div = std::max((double)substep_div, std::ceil(tau / delay_ - 1e-9));
  h_ = tau / k_div;
  const std::size_t nodes = (std::size_t)std::ceil(horizon / h_ - 1e-9) + 1;
  if (nodes > 500000)
    throw std::invalid_argument("growth table: substep grid too fine for this horizon");
  horizon_ = h_ * (double)(nodes - 1);

  std::vector<Mat> E(nodes);
  for (std::size_t k = 0; k < nodes; ++k) E[k] = matrix_exp(L_, h_ * (double)k);

  const Mat I = Mat::Identity(n, n);
  const double lag = delay_ / h_;
  // conservative lookback: max of the bracketing grid nodes
  auto phi_lag = [&](std::size_t j) -> Mat {
    const double u = (double)j - lag;
    if (u <= 0.0) return I;
    const std::size_t a = (std::size_t)std::floor(u);
    const std::size_t b = std::min((std::size_t)std::ceil(u), phi_.size() - 1);
    return phi_[a].cwiseMax(phi_[std::min(b, (std::size_t)(phi_.size() - 1))]);
  };

  phi_.resize(nodes);
  w_.resize(nodes);
  phi_[0] = I;
  w_[0] = Vec::Zero(n);
  const Vec cw = Cabs_ * Vec::Ones(Cabs_.cols()) * w_max_;
  for (std::size_t k = 1; k < nodes; ++k) {
    Mat acc = E[k];
    Vec wacc = Vec::Zero(n);
    for (std::size_t j = 0; j < k; ++j) {
      // upper rectangle rule: elementwise max of the integrand at the
      // substep endpoints (integrand is elementwise nonnegative)
      const Mat g0 = E[k - j] * Babs_ * phi_lag(j);
      const Mat g1 = E[k - j - 1] * Babs_ * phi_lag(j + 1);
      acc += h_ * g0.cwiseMax(g1);
      const Vec d0 = E[k - j] * cw;
      const Vec d1 = E[k - j - 1] * cw;
      wacc += h_ * d0.cwiseMax(d1);
    }
    phi_[k] = acc;
    w_[k] = wacc;
  }
}

std::size_t GrowthBoundTable::node_ceil(double t) const {
  if (t < 0.0) throw std::invalid_argument("growth table: negative time");
  const double u = t / h_;
  std::size_t k = (std::size_t)std::ceil(u - 1e-9);
  if (k >= phi_.size())
    throw std::invalid_argument("growth table: time beyond precomputed horizon");
  return k;
}

Vec GrowthBoundTable::growth_bound(const Vec& rho, double t) const {
  for (int i = 0; i < rho.size(); ++i)
    if (rho[i] < 0.0) throw std::invalid_argument("growth_bound: negative rho");
  // off-grid times take the max of the bracketing nodes (Phi need not be
  // monotone in t)
  const std::size_t b = node_ceil(t);
  const std::size_t a = (std::size_t)std::max(0.0, std::floor(t / h_ + 1e-9));
  return phi_[a].cwiseMax(phi_[b]) * rho;
}

Vec GrowthBoundTable::disturbance_tube(double t) const {
  const std::size_t b = node_ceil(t);
  const std::size_t a = (std::size_t)std::max(0.0, std::floor(t / h_ + 1e-9));
  return w_[a].cwiseMax(w_[b]);
}

Vec GrowthBoundTable::growth_bound_max(const Vec& rho, double t0, double t1) const {
  std::size_t a = (std::size_t)std::max(0.0, std::floor(std::max(0.0, t0) / h_ + 1e-9));
  std::size_t b = node_ceil(t1);
  Mat m = phi_[a];
  for (std::size_t k = a + 1; k <= b; ++k) m = m.cwiseMax(phi_[k]);
  return m * rho;
}

Vec GrowthBoundTable::disturbance_tube_max(double t0, double t1) const {
  std::size_t a = (std::size_t)std::max(0.0, std::floor(std::max(0.0, t0) / h_ + 1e-9));
  std::size_t b = node_ceil(t1);
  Vec v = w_[a];
  for (std::size_t k = a + 1; k <= b; ++k) v = v.cwiseMax(w_[k]);
  return v;
}

}  // namespace dhs
