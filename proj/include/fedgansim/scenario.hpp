#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedgansim/config.hpp"
#include "fedgansim/federation.hpp"

namespace fedgan::cli {

// Output root for run directories: FEDGANSIM_OUT_ROOT env var when set,
// otherwise ./runs.
std::filesystem::path out_root();

// Executes one run and persists it:
//   config.json        fully-materialized config echo
//   rounds.jsonl       one JSON object per round (streamed, flushed per line)
//   g_server.fgs       final server generator checkpoint
//   samples.fgs        final sample dump (at most 4096 samples)
//   final_report.json  final/best metrics + detection summary
// A failure leaves the JSONL truncated-but-valid plus a FAILED marker file,
// then rethrows. Returns the run directory.
std::filesystem::path run_scenario(const RunConfig& cfg);

struct AssertionResult {
  std::string text;
  double lhs = 0.0;
  double rhs = 0.0;
  bool passed = false;
};

struct ComparisonReport {
  // one row per scenario; fixed column set, insertion-ordered
  std::vector<nlohmann::ordered_json> scenarios;
  std::vector<AssertionResult> assertions;

  bool all_passed() const;
  nlohmann::ordered_json to_json() const;
  std::string to_csv() const;

  // CSV back to rows (used to verify the CSV is lossless)
  static std::vector<nlohmann::ordered_json> scenarios_from_csv(const std::string& csv);
};

// Loads completed run directories, checks they are comparable (same data
// seed and dataset geometry), evaluates the assertion file (JSON array of
// strings like "attack.kid >= 2*vanilla.kid") against per-scenario metrics.
ComparisonReport compare_runs(const std::vector<std::filesystem::path>& run_dirs,
                              const std::filesystem::path& assertions_file);

// One run per size x {local_defense, full_defense} with an s-by-s trigger
// at the bottom-right of the image; image datasets only. The report carries
// a "full.kid <= local.kid" assertion per size.
ComparisonReport sweep_trigger_sizes(const RunConfig& base,
                                     const std::vector<std::size_t>& sizes);

// Assertion-side evaluation, exposed for tests:
// side := number | [number '*'] scenario '.' column
double eval_assertion_side(const ComparisonReport& report, const std::string& side);

}  // namespace fedgan::cli
