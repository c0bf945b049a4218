#include "dhs/synthesis.hpp"

#include <algorithm>
#include <cmath>

namespace dhs {

const char* to_string(SynthesisStatus s) {
  switch (s) {
    case SynthesisStatus::Success: return "success";
    case SynthesisStatus::CertificationFailure: return "certification_failure";
    case SynthesisStatus::EmptyInvariant: return "empty_invariant";
    case SynthesisStatus::EmptyGuard: return "empty_guard";
    case SynthesisStatus::NoConvergence: return "no_convergence";
  }
  return "unknown";
}

SynthesisConfig SynthesisConfig::defaults_for(const DelayHybridAutomaton& h) {
  SynthesisConfig c;
  if (h.config.rho) {
    c.rho = *h.config.rho;
  } else {
    c.rho = Vec(h.state_dim);
    for (int i = 0; i < h.state_dim; ++i) {
      double w = 0.0;
      for (const auto& m : h.modes) w = std::max(w, m.safe.hi[i] - m.safe.lo[i]);
      c.rho[i] = w / 64.0;
    }
  }
  if (h.config.tau) {
    c.tau = *h.config.tau;
  } else {
    double r = std::numeric_limits<double>::infinity();
    for (const auto& m : h.modes) r = std::min(r, m.dynamics.delay);
    c.tau = r / 4.0;
  }
  c.eps = h.config.eps.value_or(1e-3);
  c.rho_th_div = h.config.rho_th_div.value_or(8.0);
  return c;
}

RefinedAutomaton SynthesisResult::refined_view(const DelayHybridAutomaton& h) const {
  RefinedAutomaton ra;
  ra.model = &h;
  for (const auto& m : modes) ra.modes.push_back({m.invariant.region(), m.xi_star});
  for (const auto& e : edges) {
    ra.guard_star.push_back(e.back.guard_star);
    ra.fake_guard.push_back(e.fake_guard);
  }
  return ra;
}

namespace {

double phi_norm_of(const Box& k, const Mode& mode, const Vec& x_e) {
  auto clipped = k.intersection(mode.safe);
  return clipped ? clipped->sup_norm_around(x_e) : 0.0;
}

/* G~(e): cells of I_n(q) fully inside G(e). The "R(e,x) ∈ U_q'" condition of
 * Algorithm 3 is unconstrained for the bundled models (U is all functionals);
 * the post-jump containment is established by the K_n extension plus the
 * landing-window constraint enforced inside back_reach. */
CellGrid make_fake_guard(const Edge& edge, const InvariantResult& inv_from,
                         const ReachEngine& engine) {
  const MasterGrid& grid = engine.grid();
  CellGrid fake(&grid);
  const auto cell_ok = [&](std::size_t idx) {
    return edge.guard.contains_box(grid.cell_box(idx), 1e-12);
  };
  inv_from.grid.for_each([&](std::size_t idx) {
    if (cell_ok(idx)) fake.set(idx);
  });
  if (inv_from.has_ball) {
    if (auto clipped = inv_from.ball.bounding_box().intersection(inv_from.ball_clip)) {
      if (auto span = grid.index_span(*clipped)) {
        std::vector<int> cur = span->first;
        for (;;) {
          const std::size_t idx = grid.index_of(cur);
          const Box cb = grid.cell_box(idx);
          if (!fake.test(idx) && inv_from.ball.contains_box(cb) &&
              inv_from.ball_clip.contains_box(cb, 1e-12) && cell_ok(idx))
            fake.set(idx);
          int d = grid.dim() - 1;
          for (; d >= 0; --d) {
            if (++cur[d] <= span->second[d]) break;
            cur[d] = span->first[d];
          }
          if (d < 0) break;
        }
      }
    }
  }
  return fake;
}

}  // namespace

SynthesisResult synthesize(const DelayHybridAutomaton& h, const SynthesisConfig& config) {
  SynthesisResult out;
  const int nm = (int)h.modes.size();

  // jump delays must sit on the reach-step grid (slices are exact there)
  for (const auto& e : h.edges) {
    const double ratio = e.jump_delay / config.tau;
    if (std::fabs(ratio - std::round(ratio)) > 1e-6) {
      out.status = SynthesisStatus::EmptyGuard;
      out.message = "edge " + e.from_name + "->" + e.to_name +
                    ": jump delay is not an integer multiple of tau";
      return out;
    }
  }

  ReachConfig rc;
  rc.rho = config.rho;
  rc.rho_th = config.rho / config.rho_th_div;
  rc.tau = config.tau;
  rc.eps = config.eps;
  rc.threads = config.threads;

  // per-mode certificates and engines
  out.modes.resize(nm);
  for (int q = 0; q < nm; ++q) {
    out.modes[q].name = h.modes[q].name;
    try {
      out.modes[q].cert = certify_mode(h.modes[q], h.w_max);
    } catch (const CertificationError& e) {
      out.status = SynthesisStatus::CertificationFailure;
      out.message = e.what();
      return out;
    }
    double horizon = config.tau;
    for (int ei : h.outgoing_edges(q)) horizon = std::max(horizon, h.edges[ei].jump_delay);
    try {
      out.engines.push_back(std::make_shared<ReachEngine>(h.modes[q], out.modes[q].cert, h.w_max,
                                                          rc, horizon));
    } catch (const EmptyInvariantError& e) {
      out.status = SynthesisStatus::EmptyInvariant;
      out.message = e.what();
      return out;
    } catch (const CertificationError& e) {
      out.status = SynthesisStatus::CertificationFailure;
      out.message = e.what();
      return out;
    }
  }

  std::vector<Box> K(nm);
  std::vector<std::optional<Box>> pending(h.edges.size());
  for (int q = 0; q < nm; ++q) {
    K[q] = h.modes[q].initial;
    out.modes[q].xi_star = *h.modes[q].initial.intersection(h.modes[q].safe);
  }
  out.edges.assign(h.edges.size(), EdgeArtifact{});

  std::vector<InvariantResult> prev(nm);
  bool have_prev = false;

  for (int n = 1; n <= config.max_iters; ++n) {
    out.iterations = n;
    IterationStats stats;

    // K_n(q) <- K_{n-1}(q) ∪ reset images of the previous guards' landings
    if (n > 1) {
      for (std::size_t ei = 0; ei < h.edges.size(); ++ei) {
        if (!pending[ei]) continue;
        const int q = h.edges[ei].to;
        const Box image = h.edges[ei].reset.apply_box(*pending[ei]);
        const Box prev_k = K[q];
        K[q] = K[q].hull(image);
        stats.k_monotone = stats.k_monotone && K[q].contains_box(prev_k);
      }
    }

    // per-mode invariants
    for (int q = 0; q < nm; ++q) {
      ModeArtifact& ma = out.modes[q];
      ma.k_final = K[q];
      ma.phi_norm = phi_norm_of(K[q], h.modes[q], ma.cert.equilibrium);
      if (!ma.cert.linear && ma.phi_norm > ma.cert.iota + 1e-12) {
        // the closed initial set outgrew the certified region: re-certify
        try {
          ma.cert = certify_mode(h.modes[q], h.w_max, ma.phi_norm);
          double horizon = config.tau;
          for (int ei : h.outgoing_edges(q)) horizon = std::max(horizon, h.edges[ei].jump_delay);
          out.engines[q] = std::make_shared<ReachEngine>(h.modes[q], ma.cert, h.w_max, rc, horizon);
        } catch (const std::exception& e) {
          out.status = SynthesisStatus::CertificationFailure;
          out.message = e.what();
          return out;
        }
      }
      ma.T_star = horizon(ma.cert, ma.phi_norm, h.w_max, config.eps).T_star;
      InvariantResult inv;
      try {
        inv = out.engines[q]->d_invariant(K[q], ma.T_star);
      } catch (const EmptyInvariantError& e) {
        out.status = SynthesisStatus::EmptyInvariant;
        out.message = e.what();
        return out;
      }
      if (have_prev) {
        const bool mono_before = prev[q].grid.is_subset_of(inv.grid);
        inv.grid |= prev[q].grid;
        inv.fixed_point_reached = inv.fixed_point_reached && prev[q].fixed_point_reached;
        stats.i_monotone = stats.i_monotone && mono_before;
      }
      ma.invariant = inv;
      stats.invariant_cells.push_back(inv.grid.size());
    }

    // per-edge guards
    for (std::size_t ei = 0; ei < h.edges.size(); ++ei) {
      const Edge& e = h.edges[ei];
      const int q = e.from;
      EdgeArtifact& ea = out.edges[ei];
      ea.fake_guard = make_fake_guard(e, out.modes[q].invariant, *out.engines[q]);
      const Box landing_ok = *h.modes[e.to].invariant.intersection(h.modes[e.to].safe);
      ea.back = back_reach(ea.fake_guard, e.jump_delay, out.modes[q].invariant.region(),
                           *out.engines[q], h.modes[e.to].dynamics.delay, e.reset, landing_ok);
      pending[ei] = ea.back.landing_window;
    }

    out.history.push_back(stats);

    // fixpoint on the invariants (exact occupancy equality)
    bool fixed = have_prev;
    for (int q = 0; q < nm && fixed; ++q)
      if (!(out.modes[q].invariant.grid == prev[q].grid)) fixed = false;
    if (fixed) {
      out.converged = true;
      break;
    }
    for (int q = 0; q < nm; ++q) prev[q] = out.modes[q].invariant;
    have_prev = true;
  }

  if (!out.converged) {
    out.status = SynthesisStatus::NoConvergence;
    out.message = "invariant fixpoint not reached within max_iters";
    return out;
  }
  for (std::size_t ei = 0; ei < h.edges.size(); ++ei) {
    if (out.edges[ei].back.guard_star.empty()) {
      out.status = SynthesisStatus::EmptyGuard;
      out.message = "edge " + h.edges[ei].from_name + "->" + h.edges[ei].to_name +
                    ": backward reachable guard is empty";
      return out;
    }
  }
  out.status = SynthesisStatus::Success;
  return out;
}

RefinementReport check_refinement(const DelayHybridAutomaton& h, const SynthesisResult& synth,
                                  long long samples, std::uint64_t seed, double horizon) {
  RefinementReport rep;
  const double tol = 1e-3;

  // (r2) exact containments
  bool r2 = true;
  std::string detail;
  for (std::size_t q = 0; q < h.modes.size(); ++q) {
    const auto& m = h.modes[q];
    const auto& ma = synth.modes[q];
    if (!m.initial.contains_box(ma.xi_star, 1e-12) || !m.safe.contains_box(ma.xi_star, 1e-12)) {
      r2 = false;
      detail += "Xi*(" + m.name + ") not within Xi ∩ S; ";
    }
    bool inv_ok = true;
    ma.invariant.grid.for_each([&](std::size_t idx) {
      if (!m.invariant.contains_box(synth.engines[q]->grid().cell_box(idx), 1e-9)) inv_ok = false;
    });
    if (ma.invariant.has_ball) {
      auto clipped = ma.invariant.ball.bounding_box().intersection(ma.invariant.ball_clip);
      if (clipped && !m.invariant.contains_box(*clipped, 1e-9)) inv_ok = false;
    }
    if (!inv_ok) {
      r2 = false;
      detail += "I*(" + m.name + ") not within I; ";
    }
  }
  for (std::size_t ei = 0; ei < h.edges.size(); ++ei) {
    const Edge& e = h.edges[ei];
    bool g_ok = true;
    const MasterGrid& grid = synth.engines[e.from]->grid();
    synth.edges[ei].fake_guard.for_each([&](std::size_t idx) {
      if (!e.guard.contains_box(grid.cell_box(idx), 1e-9)) g_ok = false;
    });
    const GridRegion from_region = synth.modes[e.from].invariant.region();
    synth.edges[ei].back.guard_star.for_each([&](std::size_t idx) {
      if (!from_region.contains_box(grid.cell_box(idx))) g_ok = false;
    });
    if (!g_ok) {
      r2 = false;
      detail += "guard refinement violated on " + e.from_name + "->" + e.to_name + "; ";
    }
  }
  rep.r2_refinement = r2;
  rep.r2_detail = detail;

  // (r3) non-blocking proxy
  bool r3 = true;
  for (std::size_t q = 0; q < h.modes.size(); ++q) {
    if (synth.modes[q].invariant.region().empty()) r3 = false;
    const auto outgoing = h.outgoing_edges((int)q);
    if (outgoing.empty()) continue;
    bool some = false;
    for (int ei : outgoing) some = some || !synth.edges[ei].back.guard_star.empty();
    r3 = r3 && some;
  }
  rep.r3_nonblocking = r3;

  // (r1), (c1), (c2): seeded hybrid executions with uniform random dwell
  // before committing, stressing c2 across many hit times
  const RefinedAutomaton ra = synth.refined_view(h);
  const double tau_sim = default_tau_sim(h, 0.1);
  const CommitPolicy policy{horizon / 4.0};
  bool r1 = true, c1 = true, c2 = true;
  rep.runs = samples;
  for (long long s = 0; s < samples; ++s) {
    const std::uint64_t run_seed = seed * 0x100001ull + (std::uint64_t)s;
    Rng rng(run_seed);
    const int q0 = (int)(rng.next() % h.modes.size());
    HistorySegment hist = HistorySegment::random_in_box(
        h.modes[q0].dynamics.delay, synth.modes[q0].xi_star,
        std::min(tau_sim, h.modes[q0].dynamics.delay / 8.0), rng);
    DisturbanceSignal w = DisturbanceSignal::piecewise((int)h.modes[q0].dynamics.C.cols(), h.w_max,
                                                       rng.next(), 4.0 * tau_sim);
    const ExecutionTrace tr =
        simulate_hybrid(ra, q0, hist, rng.next(), w, horizon, tau_sim, policy);
    for (const auto& smp : tr.samples) {
      if (!h.modes[smp.mode].safe.contains(smp.x, tol)) {
        r1 = false;
        if (!rep.r1_counterexample.present)
          rep.r1_counterexample = {true, run_seed, smp.t, smp.mode, smp.x, "safety violation"};
      }
      if (!ra.modes[smp.mode].invariant.contains_point_within(smp.x, tol)) {
        c1 = false;
        if (!rep.c1_counterexample.present)
          rep.c1_counterexample = {true, run_seed, smp.t, smp.mode, smp.x, "left I*"};
      } else {
        ++rep.c1_witnesses;
      }
    }
    for (const auto& j : tr.jumps) {
      const Edge& e = h.edges[j.edge];
      const double r_post = h.modes[e.to].dynamics.delay;
      bool window_ok = true;
      for (const auto& smp : tr.samples) {
        if (smp.t < j.t_complete - r_post - 1e-12 || smp.t > j.t_complete + 1e-12) continue;
        if (smp.t < 0.0) continue;
        if (smp.mode != e.from && smp.t < j.t_complete - 1e-12) continue;
        const Vec mapped = e.reset.apply(smp.x);
        if (!ra.modes[e.to].invariant.contains_point_within(mapped, tol)) window_ok = false;
      }
      if (!window_ok) {
        c2 = false;
        if (!rep.c2_counterexample.present)
          rep.c2_counterexample = {true, run_seed, j.t_complete, e.to, j.landing,
                                   "post-jump history left I*"};
      } else {
        ++rep.c2_witnesses;
      }
    }
    if (tr.blocked) {
      r1 = false;  // a blocked run is a liveness defect surfaced as a failure
      if (!rep.r1_counterexample.present)
        rep.r1_counterexample = {true, run_seed, tr.blocked_at, -1, Vec(), tr.blocked_reason};
    }
  }
  rep.r1_safe = r1;
  rep.c1 = c1;
  rep.c2 = c2;
  return rep;
}

}  // namespace dhs
