#include "dhs/convergence.hpp"

#include <cmath>
#include <functional>

#include <Eigen/LU>

namespace dhs {

bool is_metzler(const Mat& M, double tol) {
  if (M.rows() != M.cols()) throw std::invalid_argument("is_metzler: square matrix required");
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      if (i != j && M(i, j) < -tol) return false;
  return true;
}

bool is_hurwitz_metzler(const Mat& M) {
  if (!is_metzler(M)) throw std::invalid_argument("is_hurwitz_metzler: Metzler matrix required");
  Eigen::FullPivLU<Mat> lu(M);
  if (!lu.isInvertible()) return false;
  Mat Minv = lu.inverse();
  for (int i = 0; i < M.rows(); ++i)
    for (int j = 0; j < M.cols(); ++j)
      if (-Minv(i, j) < -1e-12) return false;
  return true;
}

Vec find_zeta(const Mat& M) {
  const int n = (int)M.rows();
  const Vec ones = Vec::Ones(n);
  if (((M * ones).array() < 0.0).all()) return ones;
  Vec zeta = M.fullPivLu().solve(-ones);
  const double mx = zeta.lpNorm<Eigen::Infinity>();
  if (!(mx > 0.0)) throw CertificationError("find_zeta: degenerate solution");
  zeta /= mx;
  if (!((zeta.array() > 0.0).all() && ((M * zeta).array() < 0.0).all()))
    throw CertificationError("find_zeta: no feasible zeta (matrix not Hurwitz Metzler?)");
  return zeta;
}

namespace {

/* H_i(g) = g zeta_i + sum_j zeta_j |B_ij| (e^{g r} - 1) - eta, strictly
 * increasing with H_i(0) = -eta < 0. */
double h_row(const Mat& Babs, const Vec& zeta, double delay, double eta, int i, double g) {
  double acc = g * zeta[i] - eta;
  for (int j = 0; j < zeta.size(); ++j)
    acc += zeta[j] * Babs(i, j) * (std::exp(g * delay) - 1.0);
  return acc;
}

double solve_gamma_row(const Mat& Babs, const Vec& zeta, double delay, double eta, int i) {
  double hi = std::max(eta, 1e-6);
  while (h_row(Babs, zeta, delay, eta, i, hi) <= 0.0) {
    hi *= 2.0;
    if (hi > 1e12) throw CertificationError("gamma root search diverged");
  }
  double lo = 1e-12;
  if (h_row(Babs, zeta, delay, eta, i, lo) > 0.0)
    throw CertificationError("gamma root bracket failed at the lower end");
  while (hi - lo > 1e-12 * std::max(1.0, hi)) {
    const double mid = 0.5 * (lo + hi);
    if (h_row(Babs, zeta, delay, eta, i, mid) > 0.0) hi = mid;
    else lo = mid;
  }
  const double g = 0.5 * (lo + hi);
  if (std::fabs(h_row(Babs, zeta, delay, eta, i, g)) > 1e-9)
    throw CertificationError("gamma root residual exceeds 1e-9");
  return g;
}

}  // namespace

ConvergenceCertificate convergence_constants(const Mat& M, const Mat& B_delay, double delay,
                                             const Vec& zeta, const Mat& C) {
  ConvergenceCertificate cert;
  cert.M = M;
  cert.zeta = zeta;
  if (std::fabs(zeta.lpNorm<Eigen::Infinity>() - 1.0) > 1e-12)
    throw CertificationError("zeta must satisfy |zeta|_inf = 1");
  cert.beta = 1.0 / zeta.minCoeff();
  const Vec mz = -(M * zeta);
  cert.eta = mz.minCoeff();
  if (!(cert.eta > 0.0)) throw CertificationError("eta <= 0: mode is not ball-convergent");
  cert.delta = cert.eta * cert.beta;
  const Mat Babs = B_delay.cwiseAbs();
  double gmin = std::numeric_limits<double>::infinity();
  for (int i = 0; i < M.rows(); ++i)
    gmin = std::min(gmin, solve_gamma_row(Babs, zeta, delay, cert.eta, i));
  cert.gamma = gmin;
  cert.c_max = 0.0;
  for (int i = 0; i < C.rows(); ++i) cert.c_max = std::max(cert.c_max, C.row(i).sum());
  cert.equilibrium = Vec::Zero(M.rows());
  return cert;
}

HorizonBound horizon(const ConvergenceCertificate& cert, double phi_norm, double w_max,
                     double eps) {
  if (!(eps > 0.0)) throw std::invalid_argument("horizon: eps must be positive");
  HorizonBound hb;
  hb.eps = eps;
  const double floor_term = cert.linear ? cert.c_max * w_max : cert.g_total;
  hb.r1 = floor_term / cert.eta;
  hb.r2 = cert.beta * (phi_norm - floor_term / cert.delta);
  hb.T_star = hb.r2 > 0.0 ? std::max(0.0, std::log(hb.r2 / eps) / cert.gamma) : 0.0;
  return hb;
}

void linearize(const DdeDynamics& dyn, Mat& A, Mat& B) {
  jacobians_at(dyn, Vec::Zero(dyn.state_dim()), A, B);
}

Vec find_equilibrium(const DdeDynamics& dyn) {
  const int n = dyn.state_dim();
  const Vec w0 = Vec::Zero(dyn.disturbance_dim());
  Vec x = Vec::Zero(n);
  for (int it = 0; it < 100; ++it) {
    const Vec f = evaluate_rhs(dyn, x, x, w0, 0.0);
    if (f.lpNorm<Eigen::Infinity>() <= 1e-12) return x;
    Mat Jx, Jxd;
    jacobians_at(dyn, x, Jx, Jxd);
    const Mat J = Jx + Jxd;
    Eigen::FullPivLU<Mat> lu(J);
    if (!lu.isInvertible())
      throw CertificationError("equilibrium search: singular Jacobian at iterate");
    const Vec step = lu.solve(-f);
    double s = 1.0;
    // backtracking keeps the residual decreasing
    const double f0 = f.lpNorm<Eigen::Infinity>();
    for (int k = 0; k < 30; ++k) {
      const Vec cand = x + s * step;
      if (evaluate_rhs(dyn, cand, cand, w0, 0.0).lpNorm<Eigen::Infinity>() < f0) {
        x = cand;
        break;
      }
      s *= 0.5;
      if (k == 29) x = x + step;  // last resort: full step
    }
  }
  throw CertificationError("equilibrium search did not converge");
}

namespace {

/* Shifted higher-order residual g~(y, yd) = g(x_e + y, x_e + yd) - g(x_e)
 * - Jg(x_e) [y; yd], built symbolically and folded so the zero corrections
 * (the common case x_e = 0, Jg(0) = 0) vanish exactly. */
std::vector<ExprPtr> shifted_residual(const DdeDynamics& dyn, const Vec& x_e) {
  const int n = dyn.state_dim();
  std::vector<ExprPtr> out(n, nullptr);
  const Vec w0 = Vec::Zero(dyn.disturbance_dim());
  EvalContext at_eq{x_e.data(), x_e.data(), w0.data(), n, (int)w0.size(), 0.0};
  for (int i = 0; i < n; ++i) {
    if (!dyn.nonlinear[i]) continue;
    const ExprPtr& g = dyn.nonlinear[i];
    // substitute x_j -> y_j + x_e_j (reusing the same variable slots for y)
    std::function<ExprPtr(const ExprPtr&)> subst = [&](const ExprPtr& e) -> ExprPtr {
      switch (e->kind) {
        case ExprKind::VarX:
          return Expr::make(ExprKind::Add, Expr::var(ExprKind::VarX, e->index),
                            Expr::constant(x_e[e->index]));
        case ExprKind::VarXd:
          return Expr::make(ExprKind::Add, Expr::var(ExprKind::VarXd, e->index),
                            Expr::constant(x_e[e->index]));
        case ExprKind::Pow: {
          auto p = Expr::pow(subst(e->a), e->ipow);
          return p;
        }
        default:
          if (!e->a) return e;
          return Expr::make(e->kind, subst(e->a), e->b ? subst(e->b) : nullptr);
      }
    };
    ExprPtr shifted = subst(g);
    ExprPtr acc = Expr::make(ExprKind::Sub, shifted, Expr::constant(eval(g, at_eq)));
    for (int j = 0; j < n; ++j) {
      const double dx = eval(fold(differentiate(g, ExprKind::VarX, j)), at_eq);
      const double dxd = eval(fold(differentiate(g, ExprKind::VarXd, j)), at_eq);
      if (dx != 0.0)
        acc = Expr::make(ExprKind::Sub, acc,
                         Expr::make(ExprKind::Mul, Expr::constant(dx), Expr::var(ExprKind::VarX, j)));
      if (dxd != 0.0)
        acc = Expr::make(ExprKind::Sub, acc,
                         Expr::make(ExprKind::Mul, Expr::constant(dxd), Expr::var(ExprKind::VarXd, j)));
    }
    acc = fold(acc);
    double cv;
    if (!(is_constant(acc, &cv) && cv == 0.0)) out[i] = acc;
  }
  return out;
}

/* sup |g~|_inf over |y|, |yd| <= h (interval extension). */
double residual_sup(const std::vector<ExprPtr>& res, int n, double h) {
  std::vector<Interval> box(n, Interval(-h, h));
  IntervalContext ctx{box.data(), box.data(), nullptr, n, 0, Interval(0.0)};
  double s = 0.0;
  for (const auto& e : res)
    if (e) s = std::max(s, eval_interval(e, ctx).mag());
  return s;
}

}  // namespace

NonlinearBound g_max_fixed_point(const DdeDynamics& dyn, const ConvergenceCertificate& cert,
                                 double w_max, double iota_cap) {
  if (!dyn.has_nonlinear() && !dyn.g_max_hint) {
    return {0.0, cert.c_max * w_max, iota_cap};
  }
  for (const auto& g : dyn.nonlinear)
    if (g && (uses_kind(g, ExprKind::VarW) || uses_kind(g, ExprKind::VarT)))
      throw CertificationError("nonlinear terms may not reference w or t for certification");

  const int n = dyn.state_dim();
  const auto res = shifted_residual(dyn, cert.equilibrium);
  bool any = false;
  for (const auto& e : res) any = any || (e != nullptr);
  if (!any) return {0.0, cert.c_max * w_max, iota_cap};

  const auto h1 = [&](double g) {
    const double G = cert.c_max * w_max + g;
    return G / cert.eta + cert.beta * std::max(0.0, iota_cap - G / cert.delta);
  };
  const auto h2 = [&](double g) { return residual_sup(res, n, h1(g)); };
  const auto satisfies = [&](double g) { return h2(g) <= g; };

  const double cap = dyn.g_max_hint ? std::max(1.0, 64.0 * *dyn.g_max_hint) : 1e6;
  double g = std::max(1e-12, h2(0.0) * 1e-6);
  double prev = 0.0;
  bool found = false;
  for (int k = 0; k < 128 && g <= cap; ++k) {
    if (satisfies(g)) {
      found = true;
      break;
    }
    prev = g;
    g *= 2.0;
  }
  if (!found)
    throw CertificationError("no g_max fixed point below cap: linearization invalid at this scale");
  // shrink the satisfying endpoint onto the boundary
  double lo = prev, hi = g;
  for (int k = 0; k < 200 && hi - lo > 1e-15 * std::max(1.0, hi); ++k) {
    const double mid = 0.5 * (lo + hi);
    if (satisfies(mid)) hi = mid;
    else lo = mid;
  }
  NonlinearBound nb;
  nb.g_max = hi;
  nb.g_total = cert.c_max * w_max + nb.g_max;
  nb.iota = std::min(iota_cap, h1(nb.g_max));
  return nb;
}

ConvergenceCertificate certify_mode(const Mode& mode, double w_max,
                                    std::optional<double> iota_cap_override) {
  const DdeDynamics& dyn = mode.dynamics;
  const Vec x_e = find_equilibrium(dyn);
  Mat A, B;
  jacobians_at(dyn, x_e, A, B);
  const Mat M = A + B;
  if (!is_metzler(M))
    throw CertificationError("mode '" + mode.name + "': M = A + B is not a Metzler matrix");
  if (!is_hurwitz_metzler(M))
    throw CertificationError("mode '" + mode.name + "': M is not Hurwitz (no positive zeta)");
  const Vec zeta = find_zeta(M);
  ConvergenceCertificate cert = convergence_constants(M, B, dyn.delay, zeta, dyn.C);
  cert.equilibrium = x_e;
  cert.linear = dyn.is_affine();
  if (cert.linear) {
    cert.g_max = 0.0;
    cert.g_total = cert.c_max * w_max;
    cert.iota = std::numeric_limits<double>::infinity();
  } else {
    double iota_cap = iota_cap_override
                          ? *iota_cap_override
                          : mode.initial.sup_norm_around(x_e);
    const NonlinearBound nb = g_max_fixed_point(dyn, cert, w_max, iota_cap);
    cert.g_max = nb.g_max;
    cert.g_total = nb.g_total;
    cert.iota = nb.iota;
    if (mode.initial.sup_norm_around(x_e) > cert.iota + 1e-12)
      throw CertificationError("mode '" + mode.name +
                               "': initial set exceeds the linearization validity radius");
  }
  return cert;
}

}  // namespace dhs
