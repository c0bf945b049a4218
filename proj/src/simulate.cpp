#include "dhs/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dhs {

HistorySegment::HistorySegment(double delay, std::vector<Vec> samples)
    : delay_(delay), samples_(std::move(samples)) {
  if (delay_ <= 0.0) throw std::invalid_argument("history: delay must be positive");
  if (samples_.size() < 2) throw std::invalid_argument("history: at least two samples");
  spacing_ = delay_ / (double)(samples_.size() - 1);
}

HistorySegment HistorySegment::constant(double delay, const Vec& x, double max_spacing) {
  const int m = std::max(3, (int)std::ceil(delay / max_spacing - 1e-12));
  std::vector<Vec> s((std::size_t)m + 1, x);
  return HistorySegment(delay, std::move(s));
}

HistorySegment HistorySegment::random_in_box(double delay, const Box& box, double max_spacing,
                                             Rng& rng) {
  const int n = box.dim();
  // samples live in a 10%-per-side shrunk box: the later cubic interpolation
  // overshoots by at most 1/8 of the 4-point range, which the margin absorbs
  Vec lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    const double m = 0.1 * (box.hi[i] - box.lo[i]);
    lo[i] = box.lo[i] + m;
    hi[i] = box.hi[i] - m;
  }
  const int knots = 5;
  std::vector<Vec> k((std::size_t)knots + 2, Vec(n));
  for (auto& v : k)
    for (int i = 0; i < n; ++i) v[i] = rng.uniform(lo[i], hi[i]);
  const int m = std::max(3, (int)std::ceil(delay / max_spacing - 1e-12));
  std::vector<Vec> s((std::size_t)m + 1);
  for (int j = 0; j <= m; ++j) {
    // Catmull-Rom through the interior knots, clamped into the shrunk box
    const double u = (double)j / (double)m * (double)(knots - 1);
    const int seg = std::min(knots - 2, (int)std::floor(u));
    const double f = u - seg;
    const Vec &p0 = k[seg], &p1 = k[seg + 1], &p2 = k[seg + 2], &p3 = k[seg + 3];
    Vec v = 0.5 * ((2.0 * p1) + (-p0 + p2) * f + (2.0 * p0 - 5.0 * p1 + 4.0 * p2 - p3) * f * f +
                   (-p0 + 3.0 * p1 - 3.0 * p2 + p3) * f * f * f);
    for (int i = 0; i < n; ++i) v[i] = std::clamp(v[i], lo[i], hi[i]);
    s[(std::size_t)j] = v;
  }
  return HistorySegment(delay, std::move(s));
}

Vec HistorySegment::at(double theta) const {
  if (theta < -delay_ - 1e-9 || theta > 1e-9)
    throw std::invalid_argument("history: theta outside [-r, 0]");
  const double u = (theta + delay_) / spacing_;
  const int m = (int)samples_.size() - 1;
  int i1 = std::clamp((int)std::floor(u), 0, m - 1);
  if (m < 3) {  // too few points for a cubic: linear interpolation
    const double f = std::clamp(u - i1, 0.0, 1.0);
    return (1.0 - f) * samples_[i1] + f * samples_[i1 + 1];
  }
  // 4-point cubic Lagrange on the uniform grid (window clamped at the ends)
  int i0 = std::clamp(i1 - 1, 0, m - 3);
  const double x = u - i0;
  const Vec &p0 = samples_[i0], &p1 = samples_[i0 + 1], &p2 = samples_[i0 + 2],
            &p3 = samples_[i0 + 3];
  const double c0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
  const double c1 = x * (x - 2.0) * (x - 3.0) / 2.0;
  const double c2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
  const double c3 = x * (x - 1.0) * (x - 2.0) / 6.0;
  return c0 * p0 + c1 * p1 + c2 * p2 + c3 * p3;
}

double HistorySegment::sup_norm_around(const Vec& c) const {
  double m = 0.0;
  for (const auto& s : samples_) m = std::max(m, (s - c).lpNorm<Eigen::Infinity>());
  return m;
}

bool HistorySegment::ranges_in(const Box& box, double tol) const {
  for (const auto& s : samples_)
    if (!box.contains(s, tol)) return false;
  return true;
}

DisturbanceSignal DisturbanceSignal::zero(int dim) {
  DisturbanceSignal s;
  s.kind = Kind::Zero;
  s.dim = dim;
  return s;
}

DisturbanceSignal DisturbanceSignal::constant_signal(const Vec& value, double bound) {
  DisturbanceSignal s;
  s.kind = Kind::Constant;
  s.dim = (int)value.size();
  s.constant = value;
  s.bound = bound;
  if (value.lpNorm<Eigen::Infinity>() > bound + 1e-15)
    throw std::invalid_argument("disturbance: constant exceeds bound");
  return s;
}

DisturbanceSignal DisturbanceSignal::piecewise(int dim, double bound, std::uint64_t seed,
                                               double dwell) {
  DisturbanceSignal s;
  s.kind = Kind::PiecewiseConstant;
  s.dim = dim;
  s.bound = bound;
  s.seed = seed;
  s.dwell = dwell;
  if (!(dwell > 0.0)) throw std::invalid_argument("disturbance: dwell must be positive");
  return s;
}

DisturbanceSignal DisturbanceSignal::sinusoid(int dim, double amplitude, double frequency,
                                              double phase, double bound) {
  DisturbanceSignal s;
  s.kind = Kind::Sinusoid;
  s.dim = dim;
  s.amplitude = amplitude;
  s.frequency = frequency;
  s.phase = phase;
  s.bound = bound;
  if (std::fabs(amplitude) > bound + 1e-15)
    throw std::invalid_argument("disturbance: amplitude exceeds bound");
  return s;
}

Vec DisturbanceSignal::at(double t) const {
  Vec w = Vec::Zero(dim);
  switch (kind) {
    case Kind::Zero: break;
    case Kind::Constant: w = constant; break;
    case Kind::PiecewiseConstant: {
      const std::uint64_t k = (std::uint64_t)std::max(0.0, std::floor(t / dwell));
      for (int j = 0; j < dim; ++j) {
        Rng r(seed ^ (k * 0x2545f4914f6cdd1dull) ^ ((std::uint64_t)(j + 1) << 32));
        w[j] = r.uniform(-bound, bound);
      }
      break;
    }
    case Kind::Sinusoid:
      for (int j = 0; j < dim; ++j) w[j] = amplitude * std::sin(frequency * t + phase);
      break;
  }
  if (w.lpNorm<Eigen::Infinity>() > bound + 1e-12)
    throw std::logic_error("disturbance sample exceeds declared bound");
  return w;
}

DdeIntegrator::DdeIntegrator(const DdeDynamics& dyn, const HistorySegment& history,
                             const DisturbanceSignal& w, double error_tol)
    : dyn_(&dyn), w_(w), history_(history), tol_(error_tol) {
  if (std::fabs(history.delay() - dyn.delay) > 1e-9)
    throw std::invalid_argument("integrator: history delay does not match the dynamics");
  t_ = 0.0;
  x_ = history.value_at_zero();
  nodes_.push_back({0.0, x_, rhs(0.0, x_)});
}

Vec DdeIntegrator::delayed(double t) const {
  const double td = t - dyn_->delay;
  const double t0 = nodes_.empty() ? t_ : nodes_.front().t;
  if (td <= t0 + 1e-15) return history_.at(std::max(-dyn_->delay, td - t0));
  // binary search the dense store, then cubic Hermite
  std::size_t lo = 0, hi = nodes_.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (nodes_[mid].t <= td) lo = mid;
    else hi = mid;
  }
  const Node &a = nodes_[lo], &b = nodes_[hi];
  const double dt = b.t - a.t;
  if (dt <= 0.0) return a.x;
  const double u = std::clamp((td - a.t) / dt, 0.0, 1.0);
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * a.x + (u3 - 2 * u2 + u) * dt * a.f + (-2 * u3 + 3 * u2) * b.x +
         (u3 - u2) * dt * b.f;
}

Vec DdeIntegrator::rhs(double t, const Vec& x) const {
  return evaluate_rhs(*dyn_, x, delayed(t), w_.at(t), t);
}

Vec DdeIntegrator::rk4(double t, const Vec& x, double h) const {
  const Vec k1 = rhs(t, x);
  const Vec k2 = rhs(t + 0.5 * h, x + 0.5 * h * k1);
  const Vec k3 = rhs(t + 0.5 * h, x + 0.5 * h * k2);
  const Vec k4 = rhs(t + h, x + h * k3);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

void DdeIntegrator::step(double h) {
  if (h < 1e-12) throw std::runtime_error("integrator: step underflow");
  // one full step vs. two halves; delayed reads stay <= t_ because h <= r
  const Vec x1 = rk4(t_, x_, h);
  const Vec xa = rk4(t_, x_, 0.5 * h);
  const Vec x2 = rk4(t_ + 0.5 * h, xa, 0.5 * h);
  if ((x1 - x2).lpNorm<Eigen::Infinity>() > tol_ && h > 4e-9) {
    step(0.5 * h);
    step(0.5 * h);
    return;
  }
  nodes_.push_back({t_ + 0.5 * h, xa, rhs(t_ + 0.5 * h, xa)});
  nodes_.push_back({t_ + h, x2, rhs(t_ + h, x2)});
  t_ += h;
  x_ = x2;
}

void DdeIntegrator::advance_to(double t_end) {
  const double base = std::max(1e-9, 0.25 * dyn_->delay);
  while (t_ < t_end - 1e-12) {
    step(std::min(base, t_end - t_));
  }
}

Vec DdeIntegrator::state_at(double t) const {
  const double t0 = nodes_.empty() ? t_ : nodes_.front().t;
  if (t <= t0) return history_.at(std::max(-dyn_->delay, t - t0));
  if (t >= t_) return x_;
  std::size_t lo = 0, hi = nodes_.size() - 1;
  while (hi - lo > 1) {
    const std::size_t mid = (lo + hi) / 2;
    if (nodes_[mid].t <= t) lo = mid;
    else hi = mid;
  }
  const Node &a = nodes_[lo], &b = nodes_[hi];
  const double dt = b.t - a.t;
  if (dt <= 0.0) return a.x;
  const double u = std::clamp((t - a.t) / dt, 0.0, 1.0);
  const double u2 = u * u, u3 = u2 * u;
  return (2 * u3 - 3 * u2 + 1) * a.x + (u3 - 2 * u2 + u) * dt * a.f + (-2 * u3 + 3 * u2) * b.x +
         (u3 - u2) * dt * b.f;
}

void DdeIntegrator::apply_jump(const DdeDynamics& new_dyn, const Reset& reset,
                               const DisturbanceSignal& w, double max_spacing) {
  const double r_new = new_dyn.delay;
  const int m = std::max(3, (int)std::ceil(r_new / max_spacing - 1e-12));
  std::vector<Vec> s((std::size_t)m + 1);
  for (int j = 0; j <= m; ++j) {
    const double theta = -r_new + (double)j * r_new / (double)m;
    s[(std::size_t)j] = reset.apply(state_at(t_ + theta));
  }
  history_ = HistorySegment(r_new, std::move(s));
  dyn_ = &new_dyn;
  w_ = w;
  x_ = history_.value_at_zero();
  nodes_.clear();
  nodes_.push_back({t_, x_, rhs(t_, x_)});
}

ExecutionTrace simulate_mode(const DdeDynamics& dyn, const HistorySegment& history,
                             const DisturbanceSignal& w, double T, double tau_sim,
                             double error_tol) {
  if (!(tau_sim > 0.0)) throw std::invalid_argument("simulate_mode: tau_sim must be positive");
  if (tau_sim > dyn.delay / 4.0 + 1e-12)
    throw std::invalid_argument("simulate_mode: tau_sim must be <= r/4");
  const double ratio = dyn.delay / tau_sim;
  if (std::fabs(ratio - std::round(ratio)) > 1e-6)
    throw std::invalid_argument("simulate_mode: tau_sim must divide the delay");
  DdeIntegrator integ(dyn, history, w, error_tol);
  ExecutionTrace trace;
  const long long steps = (long long)std::ceil(T / tau_sim - 1e-9);
  trace.samples.push_back({0.0, 0, integ.state()});
  for (long long k = 1; k <= steps; ++k) {
    const double t = std::min(T, (double)k * tau_sim);
    integ.advance_to(t);
    trace.samples.push_back({t, 0, integ.state()});
  }
  return trace;
}

double default_tau_sim(const DelayHybridAutomaton& h, double tau) {
  double ts = tau / 4.0;
  for (const auto& m : h.modes) ts = std::min(ts, m.dynamics.delay / 8.0);
  // snap so that every mode delay is an integer multiple
  for (const auto& m : h.modes) {
    const double r = m.dynamics.delay;
    const int k = std::max(1, (int)std::ceil(r / ts - 1e-9));
    ts = r / (double)k;
  }
  return ts;
}

ExecutionTrace simulate_hybrid(const RefinedAutomaton& ra, int mode0,
                               const HistorySegment& history, std::uint64_t policy_seed,
                               const DisturbanceSignal& w, double T, double tau_sim,
                               CommitPolicy policy_cfg) {
  const DelayHybridAutomaton& h = *ra.model;
  std::vector<std::vector<int>> outgoing(h.modes.size());
  for (int q = 0; q < (int)h.modes.size(); ++q) outgoing[q] = h.outgoing_edges(q);

  Rng policy(policy_seed);
  int mode = mode0;
  DdeIntegrator integ(h.modes[mode].dynamics, history, w, 1e-8);
  ExecutionTrace trace;
  bool dwelling = false;
  int dwell_edge = -1;
  double dwell_until = 0.0, dwell_commit = 0.0;
  bool episode_active = false;
  double episode_start = 0.0, episode_target = 0.0;

  const auto sample = [&](double t) { trace.samples.push_back({t, mode, integ.state()}); };
  const auto complete_jump = [&](double t) {
    const Edge& e = h.edges[dwell_edge];
    trace.jumps.push_back({dwell_edge, dwell_commit, t, integ.state()});
    const double r_new = h.modes[e.to].dynamics.delay;
    integ.apply_jump(h.modes[e.to].dynamics, e.reset, w, std::min(tau_sim, r_new / 8.0));
    mode = e.to;
    sample(t);
    dwelling = false;
    dwell_edge = -1;
  };

  sample(0.0);
  long long k = 1;
  double t = 0.0;
  while (t < T - 1e-12) {
    const double t_next = std::min(T, (double)k * tau_sim);
    if (dwelling && dwell_until < t_next - 1e-12) {
      integ.advance_to(dwell_until);
      t = dwell_until;
      complete_jump(t);
      continue;
    }
    integ.advance_to(t_next);
    t = t_next;
    ++k;
    sample(t);
    if (t >= T - 1e-12) break;
    if (dwelling) continue;
    const Vec& x = integ.state();
    std::vector<int> enabled;
    for (int ei : outgoing[mode])
      if (ra.guard_star[ei].contains_point(x)) enabled.push_back(ei);
    bool commit = false;
    if (!enabled.empty()) {
      if (policy_cfg.dwell_max <= 0.0) {
        commit = policy.coin();
      } else {
        if (!episode_active) {
          episode_active = true;
          episode_start = t;
          episode_target = policy.uniform(0.0, policy_cfg.dwell_max);
        }
        commit = t - episode_start >= episode_target;
      }
    } else {
      episode_active = false;
    }
    if (commit) {
      episode_active = false;
      dwell_edge = enabled[(std::size_t)(policy.next() % enabled.size())];
      dwelling = true;
      dwell_commit = t;
      dwell_until = t + h.edges[dwell_edge].jump_delay;
      if (h.edges[dwell_edge].jump_delay <= 1e-12) complete_jump(t);
    } else if (enabled.empty() && !ra.modes[mode].invariant.contains_point_within(x, 1e-9)) {
      trace.blocked = true;
      trace.blocked_at = t;
      trace.blocked_reason = "invariant exit in mode '" + h.modes[mode].name +
                             "' with no enabled controller guard";
      break;
    }
  }
  return trace;
}

const PropertyResult* ValidationReport::find(const std::string& name) const {
  for (const auto& p : properties)
    if (p.name == name) return &p;
  return nullptr;
}

namespace {

void fold_margin(PropertyResult& pr, double margin, std::uint64_t seed) {
  ++pr.samples;
  if (margin < pr.min_margin) {
    pr.min_margin = margin;
    pr.worst_seed = seed;
  }
  if (margin < 0.0) {
    ++pr.violations;
    pr.pass = false;
  }
}

double box_margin(const Box& b, const Vec& p) {
  double m = std::numeric_limits<double>::infinity();
  for (int i = 0; i < b.dim(); ++i)
    m = std::min(m, std::min(p[i] - b.lo[i], b.hi[i] - p[i]));
  return m;
}

}  // namespace

ValidationReport validate(const DelayHybridAutomaton& h, const RefinedAutomaton& ra,
                          const std::vector<ConvergenceCertificate>& certs,
                          const ValidationParams& params) {
  ValidationReport rep;
  PropertyResult safety{"safety"}, contain{"invariant_containment"}, landing{"guard_landing"},
      blocked{"non_blocking"}, attractor{"attractor"}, growth{"growth_bound"};
  if (params.samples <= 0) {
    for (auto* p : {&safety, &contain, &landing, &blocked, &attractor, &growth}) {
      p->no_evidence = true;
      rep.properties.push_back(*p);
    }
    return rep;
  }

  const double tau_sim = default_tau_sim(h, 0.1);
  const double tol = params.tol_sim;

  // hybrid campaign: safety, containment, guard landing, blocking
  for (long long s = 0; s < params.samples; ++s) {
    const std::uint64_t seed = params.seed * 0x10001ull + (std::uint64_t)s;
    Rng rng(seed);
    const int q0 = (int)(rng.next() % h.modes.size());
    auto clipped = ra.modes[q0].xi_star;
    HistorySegment hist = HistorySegment::random_in_box(
        h.modes[q0].dynamics.delay, clipped, std::min(tau_sim, h.modes[q0].dynamics.delay / 8.0),
        rng);
    DisturbanceSignal w = DisturbanceSignal::piecewise((int)h.modes[q0].dynamics.C.cols(), h.w_max,
                                                       rng.next(), 4.0 * tau_sim);
    ExecutionTrace tr = simulate_hybrid(ra, q0, hist, rng.next(), w, params.horizon, tau_sim);
    double worst_safe = std::numeric_limits<double>::infinity();
    double worst_contain = std::numeric_limits<double>::infinity();
    for (const auto& smp : tr.samples) {
      worst_safe = std::min(worst_safe, box_margin(h.modes[smp.mode].safe, smp.x) + tol);
      worst_contain = std::min(
          worst_contain,
          ra.modes[smp.mode].invariant.contains_point_within(smp.x, tol) ? 1.0 : -1.0);
    }
    fold_margin(safety, worst_safe, seed);
    fold_margin(contain, worst_contain, seed);
    for (const auto& j : tr.jumps) {
      const bool ok = ra.fake_guard[j.edge].intersects_box(
          Box(j.landing.array() - tol, j.landing.array() + tol));
      fold_margin(landing, ok ? 1.0 : -1.0, seed);
    }
    fold_margin(blocked, tr.blocked ? -1.0 : 1.0, seed);
  }

  // per-mode spot checks of the certificate properties
  const long long n_spot = std::min<long long>(params.samples, 100);
  for (int q = 0; q < (int)h.modes.size(); ++q) {
    const auto& cert = certs[q];
    const auto& dyn = h.modes[q].dynamics;
    const double ts = std::min(default_tau_sim(h, 0.1), dyn.delay / 4.0);
    const double tsn = dyn.delay / std::max(4.0, std::ceil(dyn.delay / ts - 1e-9));
    if (cert.linear) {
      const double r1 = cert.r1(h.w_max);
      const HorizonBound hb = horizon(cert, h.modes[q].initial.sup_norm_around(cert.equilibrium),
                                      h.w_max, 1e-3);
      const Box ball_box(cert.equilibrium.array() - (r1 + hb.eps),
                         cert.equilibrium.array() + (r1 + hb.eps));
      const double T = 10.0 * hb.T_star + 10.0 * dyn.delay;
      for (long long s = 0; s < n_spot; ++s) {
        const std::uint64_t seed = params.seed * 0x7f4a7c15ull + (std::uint64_t)s + 77;
        Rng rng(seed);
        HistorySegment hist = HistorySegment::random_in_box(dyn.delay, ball_box, tsn, rng);
        DisturbanceSignal w =
            DisturbanceSignal::piecewise((int)dyn.C.cols(), h.w_max, rng.next(), 8.0 * tsn);
        ExecutionTrace tr = simulate_mode(dyn, hist, w, T, tsn);
        double worst = std::numeric_limits<double>::infinity();
        for (const auto& smp : tr.samples)
          worst = std::min(worst, r1 + hb.eps + tol -
                                      (smp.x - cert.equilibrium).lpNorm<Eigen::Infinity>());
        fold_margin(attractor, worst, seed);
      }
    }
    // growth bound: same-cell pairs share the disturbance
    const Vec rho_probe = 0.05 * (h.modes[q].safe.hi - h.modes[q].safe.lo);
    const double horiz = 5.0 * dyn.delay;
    Box domain = h.modes[q].safe;
    GrowthBoundTable table(dyn, h.w_max, std::max(tsn * 4.0, dyn.delay / 4.0), horiz, domain);
    for (long long s = 0; s < n_spot; ++s) {
      const std::uint64_t seed = params.seed * 0x2545f491ull + (std::uint64_t)s + 1234;
      Rng rng(seed);
      Vec xa(h.state_dim), xb(h.state_dim);
      for (int i = 0; i < h.state_dim; ++i) {
        const double clo = h.modes[q].initial.lo[i], chi = h.modes[q].initial.hi[i];
        xa[i] = rng.uniform(clo, chi);
        xb[i] = std::clamp(xa[i] + rng.uniform(-rho_probe[i], rho_probe[i]), clo, chi);
      }
      DisturbanceSignal w =
          DisturbanceSignal::piecewise((int)dyn.C.cols(), h.w_max, rng.next(), 8.0 * tsn);
      ExecutionTrace ta = simulate_mode(dyn, HistorySegment::constant(dyn.delay, xa, tsn), w, horiz, tsn);
      ExecutionTrace tb = simulate_mode(dyn, HistorySegment::constant(dyn.delay, xb, tsn), w, horiz, tsn);
      const Vec rho0 = (xb - xa).cwiseAbs();
      double worst = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < ta.samples.size(); ++i) {
        const double t = ta.samples[i].t;
        if (t <= 0.0 || t > table.horizon()) continue;
        const Vec bound = table.growth_bound(rho0, t);
        const Vec diff = (tb.samples[i].x - ta.samples[i].x).cwiseAbs();
        worst = std::min(worst, (bound - diff).minCoeff() + tol);
      }
      fold_margin(growth, worst, seed);
    }
  }

  for (auto* p : {&safety, &contain, &landing, &blocked, &attractor, &growth}) {
    if (p->samples == 0) p->no_evidence = true;
    rep.properties.push_back(*p);
    rep.pass = rep.pass && p->pass;
  }
  return rep;
}

}  // namespace dhs
