#ifndef DHS_SIMULATE_HPP_
#define DHS_SIMULATE_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "dhs/convergence.hpp"
#include "dhs/growth.hpp"
#include "dhs/model.hpp"

namespace dhs {

/* Deterministic 64-bit generator (splitmix64); identical streams across
 * platforms, unlike the std distributions. */
struct Rng {
  std::uint64_t state;
  explicit Rng(std::uint64_t seed) : state(seed + 0x9e3779b97f4a7c15ull) {}
  std::uint64_t next() {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  double uniform() { return (double)(next() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  bool coin() { return (next() & 1u) != 0; }
};

/* Initial history over [-r, 0]: uniform samples, cubic interpolation. */
class HistorySegment {
 public:
  HistorySegment() = default;
  HistorySegment(double delay, std::vector<Vec> samples);
  static HistorySegment constant(double delay, const Vec& x, double max_spacing);
  /* Random smooth history ranging inside `box` (Catmull-Rom knots, clamped). */
  static HistorySegment random_in_box(double delay, const Box& box, double max_spacing, Rng& rng);

  double delay() const { return delay_; }
  double spacing() const { return spacing_; }
  const std::vector<Vec>& samples() const { return samples_; }
  Vec at(double theta) const;  // theta in [-r, 0]
  Vec value_at_zero() const { return samples_.back(); }
  double sup_norm_around(const Vec& c) const;
  bool ranges_in(const Box& box, double tol) const;

 private:
  double delay_ = 0.0;
  double spacing_ = 0.0;
  std::vector<Vec> samples_;
};

struct DisturbanceSignal {
  enum class Kind { Zero, Constant, PiecewiseConstant, Sinusoid };
  Kind kind = Kind::Zero;
  int dim = 0;
  double bound = 0.0;  // |w(t)|_inf <= bound, asserted per sample
  Vec constant;
  std::uint64_t seed = 0;
  double dwell = 0.1;
  double amplitude = 0.0, frequency = 1.0, phase = 0.0;

  static DisturbanceSignal zero(int dim);
  static DisturbanceSignal constant_signal(const Vec& value, double bound);
  static DisturbanceSignal piecewise(int dim, double bound, std::uint64_t seed, double dwell);
  static DisturbanceSignal sinusoid(int dim, double amplitude, double frequency, double phase,
                                    double bound);
  Vec at(double t) const;
};

struct TraceSample {
  double t;
  int mode;
  Vec x;
};

struct JumpRecord {
  int edge;
  double t_commit;    // guard-hit time (jump decision)
  double t_complete;  // t_commit + D(e)
  Vec landing;        // state at completion, before reset
};

struct ExecutionTrace {
  std::vector<TraceSample> samples;
  std::vector<JumpRecord> jumps;
  bool blocked = false;
  double blocked_at = 0.0;
  std::string blocked_reason;
};

/* Method-of-steps DDE integration: classical RK4 on the sampling grid with
 * per-step halving control, delayed argument via cubic interpolation of the
 * stored trajectory. Written independently of the reach engine. */
class DdeIntegrator {
 public:
  DdeIntegrator(const DdeDynamics& dyn, const HistorySegment& history,
                const DisturbanceSignal& w, double error_tol = 1e-8);

  double time() const { return t_; }
  const Vec& state() const { return x_; }
  void advance_to(double t_end);
  Vec state_at(double t) const;  // any time in [t0 - r, time()]
  /* Completes a mode switch at the current time: the trailing [-r', 0]
   * window (reset-mapped) becomes the new history, dynamics and disturbance
   * swap over, and integration continues from here. */
  void apply_jump(const DdeDynamics& new_dyn, const Reset& reset, const DisturbanceSignal& w,
                  double max_spacing);

 private:
  struct Node {
    double t;
    Vec x, f;
  };
  const DdeDynamics* dyn_;
  DisturbanceSignal w_;
  HistorySegment history_;
  double tol_;
  double t_ = 0.0;
  Vec x_;
  std::vector<Node> nodes_;
  Vec delayed(double t) const;
  Vec rhs(double t, const Vec& x) const;
  Vec rk4(double t, const Vec& x, double h) const;
  void step(double h_target);
  friend class HybridSimulator;
};

ExecutionTrace simulate_mode(const DdeDynamics& dyn, const HistorySegment& history,
                             const DisturbanceSignal& w, double T, double tau_sim,
                             double error_tol = 1e-8);

/* Refined automaton as consumed by the hybrid simulator: per-mode invariant
 * regions I*(q), refined initial boxes Xi*(q), per-edge controller guards
 * G*(e) and fake guards G~(e). */
struct RefinedMode {
  GridRegion invariant;
  Box xi_star;
};

struct RefinedAutomaton {
  const DelayHybridAutomaton* model = nullptr;
  std::vector<RefinedMode> modes;
  std::vector<CellGrid> guard_star;
  std::vector<CellGrid> fake_guard;
};

/* Nondeterministic jump commitment. dwell_max <= 0: commit with probability
 * 1/2 per sample step while inside some G*(e). dwell_max > 0: each guard
 * episode draws a uniform dwell in [0, dwell_max] before committing, which
 * spreads the commit times across the whole guard region. */
struct CommitPolicy {
  double dwell_max = 0.0;
};

/* Switch-when-enabled execution: commit per the policy, dwell D(e) in the
 * pre-mode, apply the reset to the trailing window, continue in the target. */
ExecutionTrace simulate_hybrid(const RefinedAutomaton& ra, int mode0,
                               const HistorySegment& history, std::uint64_t policy_seed,
                               const DisturbanceSignal& w, double T, double tau_sim,
                               CommitPolicy policy = {});

double default_tau_sim(const DelayHybridAutomaton& h, double tau);

struct PropertyResult {
  std::string name;
  bool pass = true;
  bool no_evidence = false;
  long long samples = 0;
  long long violations = 0;
  double min_margin = std::numeric_limits<double>::infinity();
  std::uint64_t worst_seed = 0;
  std::string detail;
};

struct ValidationReport {
  bool pass = true;
  std::vector<PropertyResult> properties;
  const PropertyResult* find(const std::string& name) const;
};

struct ValidationParams {
  long long samples = 1000;
  std::uint64_t seed = 0;
  double horizon = 100.0;
  double tol_sim = 1e-3;
};

/* The independent acceptance campaign: hybrid safety / invariant containment
 * / guard landing, plus per-mode attractor and growth-bound spot checks. */
ValidationReport validate(const DelayHybridAutomaton& h, const RefinedAutomaton& ra,
                          const std::vector<ConvergenceCertificate>& certs,
                          const ValidationParams& params);

}  // namespace dhs

#endif
