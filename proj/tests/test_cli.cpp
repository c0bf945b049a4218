#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "dhs/artifacts.hpp"

using namespace dhs;
namespace fs = std::filesystem;

namespace {
std::string models_dir() { return DHS_MODELS_DIR; }
std::string cli() { return DHS_CLI_PATH; }

int run(const std::string& args) {
  const std::string cmd = cli() + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WEXITSTATUS(rc);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}
}  // namespace

TEST_CASE("missing model file exits 2 with a diagnostic") {
  CHECK(run("--model /nonexistent/foo.json check-convergence") == 2);
}

TEST_CASE("malformed model exits 2") {
  const fs::path tmp = fs::temp_directory_path() / "dhs_bad_model.json";
  std::ofstream(tmp) << "{\"state_dim\": 1}";
  CHECK(run("--model " + tmp.string() + " check-convergence") == 2);
  fs::remove(tmp);
}

TEST_CASE("check-convergence emits the certificate document") {
  const fs::path out = fs::temp_directory_path() / "dhs_cli_conv";
  fs::remove_all(out);
  CHECK(run("--model " + models_dir() + "/lowpass_filter.json --out " + out.string() +
            " check-convergence") == 0);
  const std::string doc = slurp(out / "certificates.json");
  CHECK(doc.find("\"eta\": 12.58") != std::string::npos);
  CHECK(doc.find("\"schema_version\": 1") != std::string::npos);
  fs::remove_all(out);
}

TEST_CASE("heating pipeline end-to-end: exit 0 and the artifact set") {
  const fs::path out = fs::temp_directory_path() / "dhs_cli_pipe";
  fs::remove_all(out);
  CHECK(run("--model " + models_dir() + "/heating.json --out " + out.string() +
            " --seed 0 --samples 150 pipeline") == 0);
  for (const char* f :
       {"certificates.json", "invariant_q1.csv", "invariant_q2.csv", "guard_q1__q2.csv",
        "guard_q2__q1.csv", "heating.synth.json", "validation.json", "invariant_summary.json"})
    CHECK(fs::exists(out / f));

  // artifacts are re-parseable by the tool itself
  auto h = load_model(models_dir() + "/heating.json");
  const ReloadedSynthesis rs = load_synthesis_artifacts(out.string(), h);
  CHECK(rs.invariants.size() == 2);
  CHECK(rs.guard_star.size() == 2);
  CHECK(!rs.guard_star[0].empty());
  fs::remove_all(out);
}

TEST_CASE("infeasible safety box exits 3 with partial artifacts") {
  // tighten S to [50, 55] via a patched model file
  auto h = load_model(models_dir() + "/heating.json");
  for (auto& m : h.modes) {
    m.safe = Box(Vec::Constant(1, 50.0), Vec::Constant(1, 55.0));
    m.invariant = m.safe;
    m.initial = Box(Vec::Constant(1, 51.0), Vec::Constant(1, 54.0));
  }
  const fs::path tmp = fs::temp_directory_path() / "dhs_tight.json";
  std::ofstream(tmp) << serialize_model(h);
  const fs::path out = fs::temp_directory_path() / "dhs_cli_tight";
  fs::remove_all(out);
  CHECK(run("--model " + tmp.string() + " --out " + out.string() + " pipeline") == 3);
  CHECK(fs::exists(out / "heating.synth.json"));  // partial artifacts
  fs::remove(tmp);
  fs::remove_all(out);
}

TEST_CASE("pipeline determinism: two seed-0 runs are byte-identical") {
  const fs::path out1 = fs::temp_directory_path() / "dhs_det_1";
  const fs::path out2 = fs::temp_directory_path() / "dhs_det_2";
  fs::remove_all(out1);
  fs::remove_all(out2);
  const std::string base = "--model " + models_dir() + "/heating.json --seed 0 --samples 60 ";
  REQUIRE(run(base + "--out " + out1.string() + " pipeline") == 0);
  REQUIRE(run(base + "--out " + out2.string() + " pipeline") == 0);
  int compared = 0;
  for (const auto& entry : fs::directory_iterator(out1)) {
    const auto name = entry.path().filename();
    CHECK(slurp(entry.path()) == slurp(out2 / name));
    ++compared;
  }
  CHECK(compared >= 8);
  fs::remove_all(out1);
  fs::remove_all(out2);
}

TEST_CASE("simulate subcommand writes a parsable trace") {
  const fs::path out = fs::temp_directory_path() / "dhs_cli_sim";
  const fs::path trace = fs::temp_directory_path() / "dhs_trace.csv";
  fs::remove_all(out);
  fs::remove(trace);
  CHECK(run("--model " + models_dir() + "/heating.json --out " + out.string() +
            " --seed 1 simulate --sim-horizon 50 --trace-out " + trace.string()) == 0);
  const std::string t = slurp(trace);
  CHECK(!t.empty());
  // every row: t,mode,x with x within the safe band
  std::istringstream is(t);
  std::string line;
  int rows = 0;
  while (std::getline(is, line)) {
    const auto c1 = line.find(',');
    const auto c2 = line.find(',', c1 + 1);
    REQUIRE(c2 != std::string::npos);
    const double x = std::stod(line.substr(c2 + 1));
    CHECK(x >= 20.0 - 1e-6);
    CHECK(x <= 90.0 + 1e-6);
    ++rows;
  }
  CHECK(rows >= 100);
  fs::remove_all(out);
  fs::remove(trace);
}

TEST_CASE("standalone validate re-reads artifacts and passes") {
  const fs::path out = fs::temp_directory_path() / "dhs_cli_reval";
  fs::remove_all(out);
  REQUIRE(run("--model " + models_dir() + "/heating.json --out " + out.string() +
              " --seed 0 --samples 80 pipeline") == 0);
  CHECK(run("--model " + models_dir() + "/heating.json --out " + out.string() +
            " --seed 3 --samples 40 validate") == 0);
  fs::remove_all(out);
}
