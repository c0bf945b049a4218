#ifndef DHS_SYNTHESIS_HPP_
#define DHS_SYNTHESIS_HPP_

#include <memory>

#include "dhs/backreach.hpp"
#include "dhs/reach.hpp"
#include "dhs/simulate.hpp"

namespace dhs {

struct SynthesisConfig {
  Vec rho;
  double tau = 0.0;
  double eps = 1e-3;
  double rho_th_div = 8.0;  // rho_th = rho / div
  int max_iters = 16;
  int threads = 1;

  static SynthesisConfig defaults_for(const DelayHybridAutomaton& h);
};

enum class SynthesisStatus {
  Success,
  CertificationFailure,
  EmptyInvariant,
  EmptyGuard,
  NoConvergence,
};

const char* to_string(SynthesisStatus s);

struct ModeArtifact {
  std::string name;
  ConvergenceCertificate cert;
  InvariantResult invariant;
  Box xi_star;
  Box k_final;       // closed initial set K_n(q)
  double phi_norm = 0.0;
  double T_star = 0.0;
};

struct EdgeArtifact {
  CellGrid fake_guard;  // G~(e) = G(e) ∩ I*(q) ∩ reset-compatible cells
  BackreachResult back;
};

struct IterationStats {
  std::vector<std::size_t> invariant_cells;  // per mode
  bool k_monotone = true;
  bool i_monotone = true;
};

struct Counterexample {
  bool present = false;
  std::uint64_t seed = 0;
  double t = 0.0;
  int mode = -1;
  Vec state;
  std::string what;
};

struct RefinementReport {
  bool r1_safe = false;
  Counterexample r1_counterexample;
  bool r2_refinement = false;
  std::string r2_detail;
  bool r3_nonblocking = false;
  bool c1 = false;
  long long c1_witnesses = 0;
  Counterexample c1_counterexample;
  bool c2 = false;
  long long c2_witnesses = 0;
  Counterexample c2_counterexample;
  long long runs = 0;
  bool all_pass() const { return r1_safe && r2_refinement && r3_nonblocking && c1 && c2; }
};

struct SynthesisResult {
  SynthesisStatus status = SynthesisStatus::NoConvergence;
  std::string message;
  int iterations = 0;
  bool converged = false;
  std::vector<ModeArtifact> modes;
  std::vector<EdgeArtifact> edges;
  std::vector<IterationStats> history;
  RefinementReport report;

  bool success() const { return status == SynthesisStatus::Success; }
  /* View consumed by the hybrid simulator; grids stay owned by `engines`. */
  RefinedAutomaton refined_view(const DelayHybridAutomaton& h) const;

  std::vector<std::shared_ptr<ReachEngine>> engines;  // keep grids alive
};

/* Algorithm 3: per-mode differential invariants and per-edge backward
 * reachable guards, iterated to the I-fixpoint. Failures return a partial
 * result with the failing status rather than throwing. */
SynthesisResult synthesize(const DelayHybridAutomaton& h, const SynthesisConfig& config);

/* Executable proof obligations: exact refinement containments plus seeded
 * hybrid campaigns for safety (r1), flow containment (c1) and the post-jump
 * history condition (c2). */
RefinementReport check_refinement(const DelayHybridAutomaton& h, const SynthesisResult& synth,
                                  long long samples, std::uint64_t seed, double horizon);

}  // namespace dhs

#endif
