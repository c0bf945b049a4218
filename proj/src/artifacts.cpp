#include "dhs/artifacts.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dhs {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

json vec_json(const Vec& v) {
  json a = json::array();
  for (int i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json box_json(const Box& b) {
  json j;
  j["lo"] = vec_json(b.lo);
  j["hi"] = vec_json(b.hi);
  return j;
}

std::string guard_file(const Edge& e) {
  return "guard_" + e.from_name + "__" + e.to_name + ".csv";
}

}  // namespace

std::string boxes_to_csv(const std::string& mode, const std::vector<Box>& boxes) {
  std::ostringstream os;
  for (const auto& b : boxes) {
    os << mode;
    for (int i = 0; i < b.dim(); ++i) os << "," << fmt(b.lo[i]) << "," << fmt(b.hi[i]);
    os << "\n";
  }
  return os.str();
}

std::vector<std::pair<std::string, Box>> boxes_from_csv(const std::string& text) {
  std::vector<std::pair<std::string, Box>> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::vector<std::string> parts;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      const std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) {
        parts.push_back(line.substr(pos));
        break;
      }
      parts.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    if (parts.size() < 3 || (parts.size() - 1) % 2 != 0)
      throw std::runtime_error("box csv: malformed row '" + line + "'");
    const int n = (int)(parts.size() - 1) / 2;
    Vec lo(n), hi(n);
    for (int i = 0; i < n; ++i) {
      lo[i] = std::stod(parts[1 + 2 * i]);
      hi[i] = std::stod(parts[2 + 2 * i]);
    }
    out.emplace_back(parts[0], Box(lo, hi));
  }
  return out;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << content;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string certificates_json(const DelayHybridAutomaton& h,
                              const std::vector<ConvergenceCertificate>& certs,
                              const std::vector<HorizonBound>& horizons) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = h.name;
  json modes;
  for (std::size_t q = 0; q < certs.size(); ++q) {
    const auto& c = certs[q];
    json m;
    m["zeta"] = vec_json(c.zeta);
    m["beta"] = c.beta;
    m["gamma"] = c.gamma;
    m["delta"] = c.delta;
    m["eta"] = c.eta;
    m["c_max"] = c.c_max;
    m["equilibrium"] = vec_json(c.equilibrium);
    m["linear"] = c.linear;
    m["r1"] = horizons[q].r1;
    m["r2"] = horizons[q].r2;
    m["T_star"] = horizons[q].T_star;
    m["g_max"] = c.g_max;
    m["G"] = c.g_total;
    if (std::isfinite(c.iota)) m["iota"] = c.iota;
    modes[h.modes[q].name] = m;
  }
  j["modes"] = modes;
  return j.dump(2) + "\n";
}

std::string invariant_summary_json(const DelayHybridAutomaton& h, const SynthesisResult& synth) {
  json j;
  j["schema_version"] = kSchemaVersion;
  json modes;
  for (const auto& ma : synth.modes) {
    json m;
    m["iterations"] = ma.invariant.iterations;
    m["fixed_point"] = ma.invariant.fixed_point_reached;
    m["cells"] = ma.invariant.grid.size();
    m["elapsed_model_time"] = ma.invariant.elapsed_model_time;
    m["T_star"] = ma.T_star;
    modes[ma.name] = m;
  }
  j["modes"] = modes;
  return j.dump(2) + "\n";
}

std::vector<std::string> write_synthesis_artifacts(const std::string& out_dir,
                                                   const DelayHybridAutomaton& h,
                                                   const SynthesisResult& synth) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  std::vector<std::string> files;

  json j;
  j["schema_version"] = kSchemaVersion;
  j["model"] = h.name;
  j["status"] = to_string(synth.status);
  j["message"] = synth.message;
  j["iterations"] = synth.iterations;
  j["converged"] = synth.converged;
  if (!synth.engines.empty()) {
    json cfg;
    cfg["rho"] = vec_json(synth.engines[0]->config().rho);
    cfg["tau"] = synth.engines[0]->config().tau;
    cfg["eps"] = synth.engines[0]->config().eps;
    j["config"] = cfg;
  }

  json jmodes;
  for (std::size_t q = 0; q < synth.modes.size(); ++q) {
    const auto& ma = synth.modes[q];
    const std::string inv_file = "invariant_" + ma.name + ".csv";
    std::vector<Box> boxes;
    if (q < synth.engines.size()) {
      const MasterGrid& grid = synth.engines[q]->grid();
      ma.invariant.grid.for_each([&](std::size_t idx) { boxes.push_back(grid.cell_box(idx)); });
    }
    write_file(out_dir + "/" + inv_file, boxes_to_csv(ma.name, boxes));
    files.push_back(inv_file);

    json m;
    m["invariant_csv"] = inv_file;
    m["cells"] = ma.invariant.grid.size();
    m["fixed_point"] = ma.invariant.fixed_point_reached;
    m["iterations"] = ma.invariant.iterations;
    if (ma.invariant.has_ball) {
      json ball;
      ball["center"] = vec_json(ma.invariant.ball.center);
      ball["radius"] = ma.invariant.ball.radius;
      ball["clip"] = box_json(ma.invariant.ball_clip);
      m["ball"] = ball;
    }
    m["xi_star"] = box_json(ma.xi_star);
    m["k_final"] = box_json(ma.k_final);
    m["T_star"] = ma.T_star;
    m["phi_norm"] = ma.phi_norm;
    jmodes[ma.name] = m;
  }
  j["modes"] = jmodes;

  json jedges = json::array();
  for (std::size_t ei = 0; ei < synth.edges.size(); ++ei) {
    const Edge& e = h.edges[ei];
    const auto& ea = synth.edges[ei];
    const std::string gfile = guard_file(e);
    std::vector<Box> boxes, fake_boxes;
    if ((std::size_t)e.from < synth.engines.size()) {
      const MasterGrid& grid = synth.engines[e.from]->grid();
      ea.back.guard_star.for_each([&](std::size_t idx) { boxes.push_back(grid.cell_box(idx)); });
      ea.fake_guard.for_each([&](std::size_t idx) { fake_boxes.push_back(grid.cell_box(idx)); });
    }
    write_file(out_dir + "/" + gfile, boxes_to_csv(e.from_name, boxes));
    files.push_back(gfile);
    const std::string ffile = "fakeguard_" + e.from_name + "__" + e.to_name + ".csv";
    write_file(out_dir + "/" + ffile, boxes_to_csv(e.from_name, fake_boxes));
    files.push_back(ffile);

    json je;
    je["from"] = e.from_name;
    je["to"] = e.to_name;
    je["guard_csv"] = gfile;
    je["fake_guard_csv"] = ffile;
    je["cells"] = ea.back.guard_star.size();
    je["candidates_examined"] = ea.back.candidates_examined;
    je["refined"] = ea.back.refined;
    if (ea.back.landing_window) je["landing_window"] = box_json(*ea.back.landing_window);
    jedges.push_back(je);
  }
  j["edges"] = jedges;

  json rep;
  rep["r1_safe"] = synth.report.r1_safe;
  rep["r2_refinement"] = synth.report.r2_refinement;
  rep["r2_detail"] = synth.report.r2_detail;
  rep["r3_nonblocking"] = synth.report.r3_nonblocking;
  rep["c1"] = synth.report.c1;
  rep["c1_witnesses"] = synth.report.c1_witnesses;
  rep["c2"] = synth.report.c2;
  rep["c2_witnesses"] = synth.report.c2_witnesses;
  rep["runs"] = synth.report.runs;
  auto cex = [&](const Counterexample& c) {
    json x;
    x["present"] = c.present;
    if (c.present) {
      x["seed"] = c.seed;
      x["t"] = c.t;
      x["mode"] = c.mode;
      x["state"] = vec_json(c.state);
      x["what"] = c.what;
    }
    return x;
  };
  rep["r1_counterexample"] = cex(synth.report.r1_counterexample);
  rep["c1_counterexample"] = cex(synth.report.c1_counterexample);
  rep["c2_counterexample"] = cex(synth.report.c2_counterexample);
  j["report"] = rep;

  const std::string synth_file = h.name + ".synth.json";
  write_file(out_dir + "/" + synth_file, j.dump(2) + "\n");
  files.push_back(synth_file);
  return files;
}

std::string validation_json(const ValidationReport& report) {
  json j;
  j["schema_version"] = kSchemaVersion;
  j["pass"] = report.pass;
  json props = json::array();
  for (const auto& p : report.properties) {
    json pj;
    pj["name"] = p.name;
    pj["pass"] = p.pass;
    pj["no_evidence"] = p.no_evidence;
    pj["samples"] = p.samples;
    pj["violations"] = p.violations;
    if (std::isfinite(p.min_margin)) pj["min_margin"] = p.min_margin;
    pj["worst_seed"] = p.worst_seed;
    if (!p.detail.empty()) pj["detail"] = p.detail;
    props.push_back(pj);
  }
  j["properties"] = props;
  return j.dump(2) + "\n";
}

RefinedAutomaton ReloadedSynthesis::view(const DelayHybridAutomaton& h) const {
  RefinedAutomaton ra;
  ra.model = &h;
  for (std::size_t q = 0; q < invariants.size(); ++q) ra.modes.push_back({invariants[q], xi_star[q]});
  ra.guard_star = guard_star;
  ra.fake_guard = fake_guard;
  return ra;
}

ReloadedSynthesis load_synthesis_artifacts(const std::string& out_dir,
                                           const DelayHybridAutomaton& h) {
  ReloadedSynthesis rs;
  const json j = json::parse(read_file(out_dir + "/" + h.name + ".synth.json"));
  if ((int)j.at("schema_version").get<int>() != kSchemaVersion)
    throw std::runtime_error("synth.json: unsupported schema version");

  // master grids must match the synthesis layout: rebuild from the model's
  // domain and the recorded rho (grid alignment is canonical)
  Vec rho = SynthesisConfig::defaults_for(h).rho;
  if (j.contains("config")) {
    const json& jr = j.at("config").at("rho");
    for (int i = 0; i < rho.size(); ++i) rho[i] = jr[i].get<double>();
  }
  for (std::size_t q = 0; q < h.modes.size(); ++q) {
    auto dom = h.modes[q].invariant.intersection(h.modes[q].safe);
    if (!dom) throw std::runtime_error("reload: empty mode domain");
    rs.grids.push_back(std::make_unique<MasterGrid>(*dom, rho));
  }

  const json& jmodes = j.at("modes");
  for (std::size_t q = 0; q < h.modes.size(); ++q) {
    const json& m = jmodes.at(h.modes[q].name);
    GridRegion region;
    region.cells = CellGrid(rs.grids[q].get());
    const auto rows = boxes_from_csv(read_file(out_dir + "/" + m.at("invariant_csv").get<std::string>()));
    for (const auto& [mode_name, box] : rows) {
      auto idx = rs.grids[q]->locate(box.center());
      if (!idx) throw std::runtime_error("reload: invariant cell off-grid");
      region.cells.set(*idx);
    }
    if (m.contains("ball")) {
      region.has_ball = true;
      const json& b = m.at("ball");
      Vec c((int)b.at("center").size());
      for (int i = 0; i < c.size(); ++i) c[i] = b.at("center")[i].get<double>();
      region.ball = Ball(c, b.at("radius").get<double>());
      Vec lo((int)b.at("clip").at("lo").size()), hi(lo.size());
      for (int i = 0; i < lo.size(); ++i) {
        lo[i] = b.at("clip").at("lo")[i].get<double>();
        hi[i] = b.at("clip").at("hi")[i].get<double>();
      }
      region.ball_clip = Box(lo, hi);
    }
    rs.invariants.push_back(std::move(region));
    Vec lo((int)m.at("xi_star").at("lo").size()), hi(lo.size());
    for (int i = 0; i < lo.size(); ++i) {
      lo[i] = m.at("xi_star").at("lo")[i].get<double>();
      hi[i] = m.at("xi_star").at("hi")[i].get<double>();
    }
    rs.xi_star.push_back(Box(lo, hi));
  }

  for (const json& je : j.at("edges")) {
    const int from = h.mode_index(je.at("from").get<std::string>());
    if (from < 0) throw std::runtime_error("reload: unknown edge mode");
    CellGrid g(rs.grids[from].get());
    for (const auto& [mode_name, box] :
         boxes_from_csv(read_file(out_dir + "/" + je.at("guard_csv").get<std::string>()))) {
      auto idx = rs.grids[from]->locate(box.center());
      if (!idx) throw std::runtime_error("reload: guard cell off-grid");
      g.set(*idx);
    }
    rs.guard_star.push_back(std::move(g));
    CellGrid f(rs.grids[from].get());
    for (const auto& [mode_name, box] :
         boxes_from_csv(read_file(out_dir + "/" + je.at("fake_guard_csv").get<std::string>()))) {
      auto idx = rs.grids[from]->locate(box.center());
      if (!idx) throw std::runtime_error("reload: fake-guard cell off-grid");
      f.set(*idx);
    }
    rs.fake_guard.push_back(std::move(f));
  }
  return rs;
}

}  // namespace dhs
