#include <filesystem>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "dhs/artifacts.hpp"
#include "dhs/backreach.hpp"
#include "dhs/synthesis.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;      // missing/invalid model or arguments
constexpr int kExitSynthesis = 3;  // empty invariant/guard, no convergence
constexpr int kExitCertify = 4;    // mode not ball-convergent
constexpr int kExitValidate = 5;   // validation campaign failed
constexpr int kExitInternal = 6;

using namespace dhs;

struct Options {
  std::string model_path;
  std::string out_dir = "out";
  std::uint64_t seed = 0;
  int threads = 1;
  long long samples = 1000;
  double horizon = 0.0;  // 0: use the model's validate_horizon (or 100)
  std::vector<double> rho;
  double tau = 0.0;
  double eps = 0.0;
  double rho_th = 0.0;
  int quad_substep = 16;
  int max_iters = 16;
};

DelayHybridAutomaton load_or_exit(const Options& opt) {
  if (!std::filesystem::exists(opt.model_path)) {
    std::cerr << "error: model file not found: " << opt.model_path << "\n";
    std::exit(kExitInput);
  }
  try {
    return load_model(opt.model_path);
  } catch (const ModelError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::exit(kExitInput);
  }
}

SynthesisConfig make_config(const DelayHybridAutomaton& h, const Options& opt) {
  SynthesisConfig cfg = SynthesisConfig::defaults_for(h);
  if (!opt.rho.empty()) {
    if ((int)opt.rho.size() == 1) {
      cfg.rho = Vec::Constant(h.state_dim, opt.rho[0]);
    } else if ((int)opt.rho.size() == h.state_dim) {
      cfg.rho = Vec((int)opt.rho.size());
      for (int i = 0; i < h.state_dim; ++i) cfg.rho[i] = opt.rho[i];
    } else {
      std::cerr << "error: --rho expects 1 or state_dim values\n";
      std::exit(kExitInput);
    }
  }
  if (opt.tau > 0.0) cfg.tau = opt.tau;
  if (opt.eps > 0.0) cfg.eps = opt.eps;
  if (opt.rho_th > 0.0) cfg.rho_th_div = cfg.rho.minCoeff() / opt.rho_th;
  cfg.max_iters = opt.max_iters;
  cfg.threads = opt.threads;
  return cfg;
}

double validate_horizon(const DelayHybridAutomaton& h, const Options& opt) {
  if (opt.horizon > 0.0) return opt.horizon;
  return h.config.validate_horizon.value_or(100.0);
}

int exit_code_for(SynthesisStatus status) {
  switch (status) {
    case SynthesisStatus::Success: return kExitOk;
    case SynthesisStatus::CertificationFailure: return kExitCertify;
    default: return kExitSynthesis;
  }
}

std::vector<ConvergenceCertificate> certify_all(const DelayHybridAutomaton& h) {
  std::vector<ConvergenceCertificate> certs;
  for (const auto& m : h.modes) certs.push_back(certify_mode(m, h.w_max));
  return certs;
}

int cmd_check_convergence(const Options& opt) {
  DelayHybridAutomaton h = load_or_exit(opt);
  try {
    auto certs = certify_all(h);
    std::vector<HorizonBound> hbs;
    for (std::size_t q = 0; q < h.modes.size(); ++q) {
      const double pn = h.modes[q].initial.sup_norm_around(certs[q].equilibrium);
      hbs.push_back(horizon(certs[q], pn, h.w_max, h.config.eps.value_or(1e-3)));
    }
    const std::string doc = certificates_json(h, certs, hbs);
    std::cout << doc;
    std::filesystem::create_directories(opt.out_dir);
    write_file(opt.out_dir + "/certificates.json", doc);
    return kExitOk;
  } catch (const CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return kExitCertify;
  }
}

SynthesisResult run_synthesis(const DelayHybridAutomaton& h, const Options& opt) {
  return synthesize(h, make_config(h, opt));
}

int cmd_invariant(const Options& opt, const std::string& mode_name) {
  DelayHybridAutomaton h = load_or_exit(opt);
  const int q = h.mode_index(mode_name);
  if (q < 0) {
    std::cerr << "error: unknown mode '" << mode_name << "'\n";
    return kExitInput;
  }
  try {
    const SynthesisConfig cfg = make_config(h, opt);
    ReachConfig rc;
    rc.rho = cfg.rho;
    rc.rho_th = cfg.rho / cfg.rho_th_div;
    rc.tau = cfg.tau;
    rc.eps = cfg.eps;
    rc.threads = cfg.threads;
    const ConvergenceCertificate cert = certify_mode(h.modes[q], h.w_max);
    ReachEngine engine(h.modes[q], cert, h.w_max, rc, cfg.tau);
    const double pn = h.modes[q].initial.sup_norm_around(cert.equilibrium);
    const double T_star = horizon(cert, pn, h.w_max, cfg.eps).T_star;
    const InvariantResult inv = engine.d_invariant(h.modes[q].initial, T_star);

    std::filesystem::create_directories(opt.out_dir);
    std::vector<Box> boxes;
    inv.grid.for_each([&](std::size_t idx) { boxes.push_back(engine.grid().cell_box(idx)); });
    write_file(opt.out_dir + "/invariant_" + mode_name + ".csv", boxes_to_csv(mode_name, boxes));
    std::cout << "{\n  \"iterations\": " << inv.iterations
              << ",\n  \"fixed_point\": " << (inv.fixed_point_reached ? "true" : "false")
              << ",\n  \"cells\": " << inv.grid.size() << ",\n  \"T_star\": " << T_star
              << ",\n  \"schema_version\": " << kSchemaVersion << "\n}\n";
    return kExitOk;
  } catch (const CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return kExitCertify;
  } catch (const EmptyInvariantError& e) {
    std::cerr << "synthesis failure: " << e.what() << "\n";
    return kExitSynthesis;
  }
}

int cmd_backreach(const Options& opt, const std::string& edge_spec) {
  DelayHybridAutomaton h = load_or_exit(opt);
  const auto colon = edge_spec.find(':');
  if (colon == std::string::npos) {
    std::cerr << "error: --edge expects FROM:TO\n";
    return kExitInput;
  }
  const int from = h.mode_index(edge_spec.substr(0, colon));
  const int to = h.mode_index(edge_spec.substr(colon + 1));
  int ei = -1;
  for (int i = 0; i < (int)h.edges.size(); ++i)
    if (h.edges[i].from == from && h.edges[i].to == to) ei = i;
  if (ei < 0) {
    std::cerr << "error: no such edge '" << edge_spec << "'\n";
    return kExitInput;
  }
  SynthesisResult synth = run_synthesis(h, opt);
  if (!synth.success() && synth.status != SynthesisStatus::EmptyGuard) {
    std::cerr << "synthesis failure: " << synth.message << "\n";
    return exit_code_for(synth.status);
  }
  std::filesystem::create_directories(opt.out_dir);
  const auto& ea = synth.edges[ei];
  std::vector<Box> boxes;
  const MasterGrid& grid = synth.engines[from]->grid();
  ea.back.guard_star.for_each([&](std::size_t idx) { boxes.push_back(grid.cell_box(idx)); });
  write_file(opt.out_dir + "/guard_" + h.edges[ei].from_name + "__" + h.edges[ei].to_name + ".csv",
             boxes_to_csv(h.edges[ei].from_name, boxes));
  std::cout << "{\n  \"cells\": " << ea.back.guard_star.size()
            << ",\n  \"candidates_examined\": " << ea.back.candidates_examined
            << ",\n  \"refined\": " << ea.back.refined
            << ",\n  \"schema_version\": " << kSchemaVersion << "\n}\n";
  return kExitOk;
}

int cmd_synthesize(const Options& opt, bool with_validate, long long check_samples) {
  DelayHybridAutomaton h = load_or_exit(opt);
  SynthesisResult synth = run_synthesis(h, opt);
  const double hor = validate_horizon(h, opt);
  if (synth.success())
    synth.report = check_refinement(h, synth, check_samples, opt.seed, hor);
  std::filesystem::create_directories(opt.out_dir);

  // certificates for whatever was certified
  if (!synth.modes.empty() && synth.engines.size() == h.modes.size()) {
    std::vector<ConvergenceCertificate> certs;
    std::vector<HorizonBound> hbs;
    for (const auto& ma : synth.modes) {
      certs.push_back(ma.cert);
      hbs.push_back(horizon(ma.cert, ma.phi_norm, h.w_max, h.config.eps.value_or(1e-3)));
    }
    write_file(opt.out_dir + "/certificates.json", certificates_json(h, certs, hbs));
  }
  write_synthesis_artifacts(opt.out_dir, h, synth);
  write_file(opt.out_dir + "/invariant_summary.json", invariant_summary_json(h, synth));

  if (!synth.success()) {
    std::cerr << "synthesis failure (" << to_string(synth.status) << "): " << synth.message << "\n";
    return exit_code_for(synth.status);
  }
  std::cout << "synthesis succeeded in " << synth.iterations << " iterations; report "
            << (synth.report.all_pass() ? "clean" : "HAS VIOLATIONS") << "\n";
  if (!synth.report.all_pass()) return kExitValidate;

  if (with_validate) {
    std::vector<ConvergenceCertificate> certs;
    for (const auto& ma : synth.modes) certs.push_back(ma.cert);
    ValidationParams vp;
    vp.samples = opt.samples;
    vp.seed = opt.seed;
    vp.horizon = hor;
    const ValidationReport vr = validate(h, synth.refined_view(h), certs, vp);
    write_file(opt.out_dir + "/validation.json", validation_json(vr));
    std::cout << "validation " << (vr.pass ? "passed" : "FAILED") << "\n";
    if (!vr.pass) return kExitValidate;
  }
  return kExitOk;
}

int cmd_simulate(const Options& opt, const std::string& mode_name, double T,
                 const std::string& trace_out) {
  DelayHybridAutomaton h = load_or_exit(opt);
  const int q0 = mode_name.empty() ? 0 : h.mode_index(mode_name);
  if (q0 < 0) {
    std::cerr << "error: unknown mode '" << mode_name << "'\n";
    return kExitInput;
  }
  SynthesisResult synth = run_synthesis(h, opt);
  if (!synth.success()) {
    std::cerr << "synthesis failure: " << synth.message << "\n";
    return exit_code_for(synth.status);
  }
  const RefinedAutomaton ra = synth.refined_view(h);
  Rng rng(opt.seed);
  const double tau_sim = default_tau_sim(h, synth.engines[0]->config().tau);
  HistorySegment hist = HistorySegment::random_in_box(
      h.modes[q0].dynamics.delay, synth.modes[q0].xi_star,
      std::min(tau_sim, h.modes[q0].dynamics.delay / 8.0), rng);
  DisturbanceSignal w =
      DisturbanceSignal::piecewise((int)h.modes[q0].dynamics.C.cols(), h.w_max, rng.next(),
                                   4.0 * tau_sim);
  const ExecutionTrace tr = simulate_hybrid(ra, q0, hist, rng.next(), w, T, tau_sim);
  std::ostringstream os;
  for (const auto& s : tr.samples) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", s.t);
    os << buf << "," << h.modes[s.mode].name;
    for (int i = 0; i < s.x.size(); ++i) {
      std::snprintf(buf, sizeof(buf), "%.17g", s.x[i]);
      os << "," << buf;
    }
    os << "\n";
  }
  if (trace_out.empty()) {
    std::cout << os.str();
  } else {
    write_file(trace_out, os.str());
    std::cout << "wrote " << tr.samples.size() << " samples, " << tr.jumps.size() << " jumps\n";
  }
  return tr.blocked ? kExitValidate : kExitOk;
}

int cmd_validate(const Options& opt) {
  DelayHybridAutomaton h = load_or_exit(opt);
  try {
    const ReloadedSynthesis rs = load_synthesis_artifacts(opt.out_dir, h);
    const auto certs = certify_all(h);
    ValidationParams vp;
    vp.samples = opt.samples;
    vp.seed = opt.seed;
    vp.horizon = validate_horizon(h, opt);
    const ValidationReport vr = validate(h, rs.view(h), certs, vp);
    const std::string doc = validation_json(vr);
    write_file(opt.out_dir + "/validation.json", doc);
    std::cout << doc;
    return vr.pass ? kExitOk : kExitValidate;
  } catch (const CertificationError& e) {
    std::cerr << "certification failure: " << e.what() << "\n";
    return kExitCertify;
  } catch (const std::runtime_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInput;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Safe switching controller synthesis for delay hybrid automata"};
  app.require_subcommand(1);

  Options opt;
  app.add_option("--model", opt.model_path, "model JSON file")->required();
  app.add_option("--out", opt.out_dir, "artifact output directory");
  app.add_option("--seed", opt.seed, "RNG seed");
  app.add_option("--threads", opt.threads, "worker threads for cell stepping");
  app.add_option("--samples", opt.samples, "simulation campaign size");
  app.add_option("--horizon", opt.horizon, "simulation horizon (s)");
  app.add_option("--rho", opt.rho, "cell radius (scalar or per-axis)");
  app.add_option("--tau", opt.tau, "reach step size (s)");
  app.add_option("--eps", opt.eps, "horizon precision epsilon");
  app.add_option("--rho-th", opt.rho_th, "refinement floor");
  app.add_option("--quad-substep", opt.quad_substep, "growth-bound substep divisor");
  app.add_option("--max-iters", opt.max_iters, "synthesis iteration cap");

  auto* conv = app.add_subcommand("check-convergence", "per-mode ball-convergence certificates");
  std::string mode_name;
  auto* inv = app.add_subcommand("invariant", "differential invariant for one mode");
  inv->add_option("--mode", mode_name, "mode name")->required();
  std::string edge_spec;
  auto* back = app.add_subcommand("backreach", "backward reachable guard for one edge");
  back->add_option("--edge", edge_spec, "edge FROM:TO")->required();
  auto* synth = app.add_subcommand("synthesize", "full controller synthesis");
  double sim_T = 100.0;
  std::string trace_out;
  std::string sim_mode;
  auto* sim = app.add_subcommand("simulate", "hybrid execution under the synthesized controller");
  sim->add_option("--start-mode", sim_mode, "initial mode (default: first)");
  sim->add_option("--sim-horizon", sim_T, "trace length (s)");
  sim->add_option("--trace-out", trace_out, "CSV output path (default: stdout)");
  auto* val = app.add_subcommand("validate", "re-validate artifacts in --out");
  auto* pipe = app.add_subcommand("pipeline", "synthesize + validate, all artifacts");

  CLI11_PARSE(app, argc, argv);

  try {
    if (conv->parsed()) return cmd_check_convergence(opt);
    if (inv->parsed()) return cmd_invariant(opt, mode_name);
    if (back->parsed()) return cmd_backreach(opt, edge_spec);
    if (synth->parsed()) return cmd_synthesize(opt, false, std::min<long long>(opt.samples, 200));
    if (sim->parsed()) return cmd_simulate(opt, sim_mode, sim_T, trace_out);
    if (val->parsed()) return cmd_validate(opt);
    if (pipe->parsed()) return cmd_synthesize(opt, true, opt.samples);
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitInternal;
}
