#ifndef DHS_ARTIFACTS_HPP_
#define DHS_ARTIFACTS_HPP_

#include <string>
#include <vector>

#include "dhs/synthesis.hpp"

namespace dhs {

inline constexpr int kSchemaVersion = 1;

/* CSV box dump: one row per box, `mode,lo_1,hi_1,...,lo_n,hi_n`,
 * >= 9 significant digits (we print 17). */
std::string boxes_to_csv(const std::string& mode, const std::vector<Box>& boxes);
std::vector<std::pair<std::string, Box>> boxes_from_csv(const std::string& text);

void write_file(const std::string& path, const std::string& content);
std::string read_file(const std::string& path);

std::string certificates_json(const DelayHybridAutomaton& h,
                              const std::vector<ConvergenceCertificate>& certs,
                              const std::vector<HorizonBound>& horizons);

/* invariant_<mode>.csv + guard_<from>__<to>.csv + <name>.synth.json +
 * validation.json; returns the list of files written. */
std::vector<std::string> write_synthesis_artifacts(const std::string& out_dir,
                                                   const DelayHybridAutomaton& h,
                                                   const SynthesisResult& synth);
std::string validation_json(const ValidationReport& report);
std::string invariant_summary_json(const DelayHybridAutomaton& h, const SynthesisResult& synth);

/* Rebuilds the simulator view from the artifact CSVs (round-trip check and
 * the standalone `validate` subcommand). Grids are owned by `owner`. */
struct ReloadedSynthesis {
  std::vector<std::unique_ptr<MasterGrid>> grids;
  std::vector<GridRegion> invariants;
  std::vector<CellGrid> guard_star;
  std::vector<CellGrid> fake_guard;
  std::vector<Box> xi_star;
  RefinedAutomaton view(const DelayHybridAutomaton& h) const;
};
ReloadedSynthesis load_synthesis_artifacts(const std::string& out_dir,
                                           const DelayHybridAutomaton& h);

}  // namespace dhs

#endif
