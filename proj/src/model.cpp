#include "dhs/model.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace dhs {

using nlohmann::json;

bool DdeDynamics::has_nonlinear() const {
  for (const auto& g : nonlinear)
    if (g) return true;
  return false;
}

bool DdeDynamics::is_affine() const {
  for (const auto& g : nonlinear)
    if (g && !dhs::is_affine(g)) return false;
  return true;
}

Vec evaluate_rhs(const DdeDynamics& dyn, const Vec& x, const Vec& xd, const Vec& w, double t) {
  const int n = dyn.state_dim();
  if (x.size() != n || xd.size() != n)
    throw std::invalid_argument("evaluate_rhs: state dimension mismatch");
  if (w.size() != dyn.C.cols()) throw std::invalid_argument("evaluate_rhs: disturbance dimension mismatch");
  Vec out = dyn.A * x + dyn.B * xd + dyn.C * w;
  if (dyn.has_nonlinear()) {
    EvalContext ctx{x.data(), xd.data(), w.data(), n, (int)w.size(), t};
    for (int i = 0; i < n; ++i)
      if (dyn.nonlinear[i]) out[i] += eval(dyn.nonlinear[i], ctx);
  }
  return out;
}

void interval_rhs(const DdeDynamics& dyn, const Box& x_box, const Box& xd_box, double w_max,
                  std::vector<Interval>& out) {
  const int n = dyn.state_dim();
  const int m = dyn.disturbance_dim();
  std::vector<Interval> xi(n), xdi(n), wi(m);
  for (int i = 0; i < n; ++i) {
    xi[i] = Interval(x_box.lo[i], x_box.hi[i]);
    xdi[i] = Interval(xd_box.lo[i], xd_box.hi[i]);
  }
  for (int j = 0; j < m; ++j) wi[j] = Interval(-w_max, w_max);
  IntervalContext ctx{xi.data(), xdi.data(), wi.data(), n, m,
                      Interval(-1e30, 1e30)};
  out.assign(n, Interval(0.0));
  for (int i = 0; i < n; ++i) {
    Interval acc(0.0);
    for (int j = 0; j < n; ++j) {
      acc = acc + Interval(dyn.A(i, j)) * xi[j];
      acc = acc + Interval(dyn.B(i, j)) * xdi[j];
    }
    for (int j = 0; j < m; ++j) acc = acc + Interval(dyn.C(i, j)) * wi[j];
    if (i < (int)dyn.nonlinear.size() && dyn.nonlinear[i])
      acc = acc + eval_interval(dyn.nonlinear[i], ctx);
    out[i] = acc;
  }
}

Vec interval_sup_rhs(const DdeDynamics& dyn, const Box& x_box, const Box& xd_box, double w_max) {
  if (x_box.dim() != dyn.state_dim() || xd_box.dim() != dyn.state_dim())
    throw std::invalid_argument("interval_sup_rhs: dimension mismatch");
  std::vector<Interval> f;
  interval_rhs(dyn, x_box, xd_box, w_max, f);
  Vec out(dyn.state_dim());
  for (int i = 0; i < dyn.state_dim(); ++i) out[i] = f[i].mag();
  return out;
}

void jacobians_at(const DdeDynamics& dyn, const Vec& x, Mat& Jx, Mat& Jxd) {
  const int n = dyn.state_dim();
  Jx = dyn.A;
  Jxd = dyn.B;
  if (!dyn.has_nonlinear()) return;
  Vec w = Vec::Zero(dyn.disturbance_dim());
  EvalContext ctx{x.data(), x.data(), w.data(), n, (int)w.size(), 0.0};
  for (int i = 0; i < n; ++i) {
    if (!dyn.nonlinear[i]) continue;
    for (int j = 0; j < n; ++j) {
      Jx(i, j) += eval(fold(differentiate(dyn.nonlinear[i], ExprKind::VarX, j)), ctx);
      Jxd(i, j) += eval(fold(differentiate(dyn.nonlinear[i], ExprKind::VarXd, j)), ctx);
    }
  }
}

void jacobian_ranges(const DdeDynamics& dyn, const Box& box, std::vector<Interval>& Jx,
                     std::vector<Interval>& Jxd) {
  const int n = dyn.state_dim();
  Jx.assign((std::size_t)n * n, Interval(0.0));
  Jxd.assign((std::size_t)n * n, Interval(0.0));
  std::vector<Interval> xi(n);
  for (int i = 0; i < n; ++i) xi[i] = Interval(box.lo[i], box.hi[i]);
  IntervalContext ctx{xi.data(), xi.data(), nullptr, n, 0, Interval(-1e30, 1e30)};
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      Interval jx(dyn.A(i, j)), jxd(dyn.B(i, j));
      if (i < (int)dyn.nonlinear.size() && dyn.nonlinear[i]) {
        jx = jx + eval_interval(fold(differentiate(dyn.nonlinear[i], ExprKind::VarX, j)), ctx);
        jxd = jxd + eval_interval(fold(differentiate(dyn.nonlinear[i], ExprKind::VarXd, j)), ctx);
      }
      Jx[(std::size_t)i * n + j] = jx;
      Jxd[(std::size_t)i * n + j] = jxd;
    }
  }
}

Box Reset::apply_box(const Box& bx) const {
  if (identity) return bx;
  const int n = (int)M.rows();
  Vec lo(n), hi(n);
  for (int i = 0; i < n; ++i) {
    Interval acc(b[i]);
    for (int j = 0; j < bx.dim(); ++j) acc = acc + Interval(M(i, j)) * Interval(bx.lo[j], bx.hi[j]);
    lo[i] = acc.lo;
    hi[i] = acc.hi;
  }
  return Box(lo, hi);
}

int DelayHybridAutomaton::mode_index(const std::string& nm) const {
  for (int i = 0; i < (int)modes.size(); ++i)
    if (modes[i].name == nm) return i;
  return -1;
}

std::vector<int> DelayHybridAutomaton::incoming_edges(int mode) const {
  std::vector<int> v;
  for (int i = 0; i < (int)edges.size(); ++i)
    if (edges[i].to == mode) v.push_back(i);
  return v;
}

std::vector<int> DelayHybridAutomaton::outgoing_edges(int mode) const {
  std::vector<int> v;
  for (int i = 0; i < (int)edges.size(); ++i)
    if (edges[i].from == mode) v.push_back(i);
  return v;
}

namespace {

[[noreturn]] void fail(const std::string& path, const std::string& what) {
  throw ModelError(path, what);
}

const json& field(const json& j, const char* key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end()) fail(path, std::string("missing field '") + key + "'");
  return *it;
}

double number_at(const json& j, const std::string& path) {
  if (!j.is_number()) fail(path, "expected a number");
  return j.get<double>();
}

Vec vec_at(const json& j, int expect, const std::string& path) {
  if (!j.is_array()) fail(path, "expected an array");
  if (expect >= 0 && (int)j.size() != expect)
    fail(path, "expected " + std::to_string(expect) + " entries, got " + std::to_string(j.size()));
  Vec v((int)j.size());
  for (int i = 0; i < (int)j.size(); ++i) v[i] = number_at(j[i], path + "[" + std::to_string(i) + "]");
  return v;
}

Mat mat_at(const json& j, int rows, int cols, const std::string& path) {
  if (!j.is_array()) fail(path, "expected a matrix (array of row arrays)");
  if (rows >= 0 && (int)j.size() != rows)
    fail(path, "expected " + std::to_string(rows) + " rows, got " + std::to_string(j.size()));
  const int r = (int)j.size();
  int c = cols;
  Mat m;
  for (int i = 0; i < r; ++i) {
    Vec row = vec_at(j[i], c, path + "[" + std::to_string(i) + "]");
    if (i == 0) {
      c = (int)row.size();
      m.resize(r, c);
    }
    if ((int)row.size() != c) fail(path, "ragged matrix rows");
    m.row(i) = row.transpose();
  }
  if (r == 0) fail(path, "empty matrix");
  return m;
}

Box box_at(const json& j, int n, const std::string& path) {
  if (!j.is_object()) fail(path, "expected a box object {lo, hi}");
  Vec lo = vec_at(field(j, "lo", path), n, path + ".lo");
  Vec hi = vec_at(field(j, "hi", path), n, path + ".hi");
  for (int i = 0; i < n; ++i)
    if (lo[i] > hi[i]) fail(path, "box lo > hi on axis " + std::to_string(i));
  return Box(lo, hi);
}

json box_to_json(const Box& b) {
  json j;
  j["lo"] = std::vector<double>(b.lo.data(), b.lo.data() + b.lo.size());
  j["hi"] = std::vector<double>(b.hi.data(), b.hi.data() + b.hi.size());
  return j;
}

json mat_to_json(const Mat& m) {
  json rows = json::array();
  for (int i = 0; i < m.rows(); ++i) {
    json row = json::array();
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    rows.push_back(row);
  }
  return rows;
}

}  // namespace

DelayHybridAutomaton parse_model(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ModelError("$", std::string("invalid JSON: ") + e.what());
  }
  DelayHybridAutomaton h;
  h.name = j.value("name", "model");
  const int n = (int)number_at(field(j, "state_dim", "$"), "$.state_dim");
  if (n < 1) fail("$.state_dim", "state dimension must be >= 1");
  h.state_dim = n;
  h.w_max = number_at(field(j, "w_max", "$"), "$.w_max");
  if (h.w_max < 0.0) fail("$.w_max", "disturbance bound must be nonnegative");

  const json& modes = field(j, "modes", "$");
  if (!modes.is_array() || modes.empty()) fail("$.modes", "at least one mode is required");
  for (int k = 0; k < (int)modes.size(); ++k) {
    const std::string p = "$.modes[" + std::to_string(k) + "]";
    const json& jm = modes[k];
    Mode m;
    m.name = field(jm, "name", p).get<std::string>();
    if (h.mode_index(m.name) >= 0) fail(p + ".name", "duplicate mode name '" + m.name + "'");
    m.dynamics.delay = number_at(field(jm, "delay", p), p + ".delay");
    if (!(m.dynamics.delay > 0.0)) fail(p + ".delay", "delay must be positive");
    m.dynamics.A = mat_at(field(jm, "A", p), n, n, p + ".A");
    m.dynamics.B = mat_at(field(jm, "B", p), n, n, p + ".B");
    m.dynamics.C = mat_at(field(jm, "C", p), n, -1, p + ".C");
    m.dynamics.nonlinear.assign(n, nullptr);
    if (jm.contains("nonlinear")) {
      const json& nl = jm["nonlinear"];
      if (!nl.is_array() || (int)nl.size() != n)
        fail(p + ".nonlinear", "expected an array of " + std::to_string(n) + " expressions");
      for (int i = 0; i < n; ++i) {
        if (nl[i].is_null()) continue;
        const std::string src = nl[i].get<std::string>();
        if (src.empty() || src == "0") continue;
        ExprPtr e;
        try {
          e = fold(parse_expression(src));
        } catch (const std::exception& ex) {
          fail(p + ".nonlinear[" + std::to_string(i) + "]", ex.what());
        }
        const int mx = std::max(max_var_index(e, ExprKind::VarX), max_var_index(e, ExprKind::VarXd));
        if (mx >= n) fail(p + ".nonlinear[" + std::to_string(i) + "]", "state index out of range");
        if (max_var_index(e, ExprKind::VarW) >= (int)m.dynamics.C.cols())
          fail(p + ".nonlinear[" + std::to_string(i) + "]", "disturbance index out of range");
        double cv;
        if (!(is_constant(e, &cv) && cv == 0.0)) m.dynamics.nonlinear[i] = e;
      }
    }
    if (jm.contains("g_max")) m.dynamics.g_max_hint = number_at(jm["g_max"], p + ".g_max");
    m.invariant = box_at(field(jm, "invariant", p), n, p + ".invariant");
    m.initial = box_at(field(jm, "initial", p), n, p + ".initial");
    m.safe = box_at(field(jm, "safe", p), n, p + ".safe");
    if (!m.initial.intersection(m.safe))
      fail(p + ".initial", "initial set does not meet the safe set");
    if (auto clipped = m.initial.intersection(m.safe); clipped && !m.invariant.contains_box(*clipped))
      fail(p + ".initial", "initial set (within the safe set) leaves the mode invariant");
    h.modes.push_back(std::move(m));
  }

  const json& edges = field(j, "edges", "$");
  if (!edges.is_array()) fail("$.edges", "expected an array");
  for (int k = 0; k < (int)edges.size(); ++k) {
    const std::string p = "$.edges[" + std::to_string(k) + "]";
    const json& je = edges[k];
    Edge e;
    e.from_name = field(je, "from", p).get<std::string>();
    e.to_name = field(je, "to", p).get<std::string>();
    e.from = h.mode_index(e.from_name);
    e.to = h.mode_index(e.to_name);
    if (e.from < 0) fail(p + ".from", "unknown mode '" + e.from_name + "'");
    if (e.to < 0) fail(p + ".to", "unknown mode '" + e.to_name + "'");
    e.guard = box_at(field(je, "guard", p), n, p + ".guard");
    e.jump_delay = number_at(field(je, "jump_delay", p), p + ".jump_delay");
    if (e.jump_delay < 0.0) fail(p + ".jump_delay", "jump delay must be nonnegative");
    const json& jr = field(je, "reset", p);
    if (jr.is_string() && jr.get<std::string>() == "identity") {
      e.reset.identity = true;
    } else if (jr.is_object()) {
      e.reset.identity = false;
      e.reset.M = mat_at(field(jr, "M", p + ".reset"), n, n, p + ".reset.M");
      e.reset.b = vec_at(field(jr, "b", p + ".reset"), n, p + ".reset.b");
    } else {
      fail(p + ".reset", "expected \"identity\" or {M, b}");
    }
    h.edges.push_back(std::move(e));
  }

  if (j.contains("config")) {
    const json& jc = j["config"];
    const std::string p = "$.config";
    if (jc.contains("rho")) {
      Vec r = vec_at(jc["rho"], n, p + ".rho");
      for (int i = 0; i < n; ++i)
        if (!(r[i] > 0.0)) fail(p + ".rho", "rho must be positive");
      h.config.rho = r;
    }
    if (jc.contains("tau")) {
      h.config.tau = number_at(jc["tau"], p + ".tau");
      if (!(*h.config.tau > 0.0)) fail(p + ".tau", "tau must be positive");
    }
    if (jc.contains("eps")) {
      h.config.eps = number_at(jc["eps"], p + ".eps");
      if (!(*h.config.eps > 0.0)) fail(p + ".eps", "eps must be positive");
    }
    if (jc.contains("rho_th_div")) {
      h.config.rho_th_div = number_at(jc["rho_th_div"], p + ".rho_th_div");
      if (!(*h.config.rho_th_div >= 1.0)) fail(p + ".rho_th_div", "rho_th_div must be >= 1");
    }
    if (jc.contains("validate_horizon"))
      h.config.validate_horizon = number_at(jc["validate_horizon"], p + ".validate_horizon");
  }
  return h;
}

DelayHybridAutomaton load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ModelError("$", "cannot open model file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_model(ss.str());
}

std::string serialize_model(const DelayHybridAutomaton& h) {
  json j;
  j["name"] = h.name;
  j["state_dim"] = h.state_dim;
  j["w_max"] = h.w_max;
  json modes = json::array();
  for (const auto& m : h.modes) {
    json jm;
    jm["name"] = m.name;
    jm["delay"] = m.dynamics.delay;
    jm["A"] = mat_to_json(m.dynamics.A);
    jm["B"] = mat_to_json(m.dynamics.B);
    jm["C"] = mat_to_json(m.dynamics.C);
    if (m.dynamics.has_nonlinear()) {
      json nl = json::array();
      for (const auto& g : m.dynamics.nonlinear) nl.push_back(g ? to_string(g) : "0");
      jm["nonlinear"] = nl;
    }
    if (m.dynamics.g_max_hint) jm["g_max"] = *m.dynamics.g_max_hint;
    jm["invariant"] = box_to_json(m.invariant);
    jm["initial"] = box_to_json(m.initial);
    jm["safe"] = box_to_json(m.safe);
    modes.push_back(jm);
  }
  j["modes"] = modes;
  json edges = json::array();
  for (const auto& e : h.edges) {
    json je;
    je["from"] = e.from_name;
    je["to"] = e.to_name;
    je["guard"] = box_to_json(e.guard);
    je["jump_delay"] = e.jump_delay;
    if (e.reset.identity) {
      je["reset"] = "identity";
    } else {
      json jr;
      jr["M"] = mat_to_json(e.reset.M);
      jr["b"] = std::vector<double>(e.reset.b.data(), e.reset.b.data() + e.reset.b.size());
      je["reset"] = jr;
    }
    edges.push_back(je);
  }
  j["edges"] = edges;
  if (h.config.rho || h.config.tau || h.config.eps || h.config.rho_th_div ||
      h.config.validate_horizon) {
    json jc;
    if (h.config.rho)
      jc["rho"] = std::vector<double>(h.config.rho->data(), h.config.rho->data() + h.config.rho->size());
    if (h.config.tau) jc["tau"] = *h.config.tau;
    if (h.config.eps) jc["eps"] = *h.config.eps;
    if (h.config.rho_th_div) jc["rho_th_div"] = *h.config.rho_th_div;
    if (h.config.validate_horizon) jc["validate_horizon"] = *h.config.validate_horizon;
    j["config"] = jc;
  }
  return j.dump(2);
}

}  // namespace dhs
