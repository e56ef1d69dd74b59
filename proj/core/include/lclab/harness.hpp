#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lclab/bounds.hpp"
#include "lclab/distributions.hpp"

namespace lclab::harness {

// One inequality family with its parameter grids. Empty vectors mean
// "use the built-in default grid for this family".
struct FamilyConfig {
  bounds::FamilyId id = bounds::FamilyId::MainOrderStat;
  std::vector<long> k;                // order-statistic families; default dyadic 1..n/2
  std::vector<double> t_multipliers;  // x envelope base at C = 1
  std::vector<double> t_values;       // absolute thresholds (Paouris, Cond1, Cond2)
  std::vector<double> r;              // lr families
  std::vector<double> p;              // moment families
  std::vector<double> u;              // Cond2
  double pA = 0.1353352832366127;     // conditional families: target P(A) = e^{-2}
  std::string mode;                   // EstNMoment/UncondOrderStat: "oracle" or "empirical"
};

struct ExperimentConfig {
  int schema = 1;
  std::uint64_t seed = 0;
  bool seed_set = false;  // the seed is mandatory; no wall-clock default
  long sample_count = 0;
  double confidence = 0.95;
  bool smoke = false;
  int bootstrap_resamples = 1000;
  std::vector<double> constant_search_grid;  // empty -> bounds::default_search_grid()
  std::string output_dir;                    // empty -> $LCLAB_OUTPUT_DIR or "lclab-out"
  std::vector<dist::DistributionSpec> distributions;
  std::vector<FamilyConfig> families;

  // Throws std::invalid_argument listing every violation.
  void validate() const;
  // Canonical (key-sorted) JSON and its FNV-1a hash; both are stable across
  // runs and independent of worker count.
  std::string canonical_json() const;
  std::uint64_t config_hash() const;
};

ExperimentConfig config_from_json(const std::string& json_text);
ExperimentConfig config_from_file(const std::string& path);

struct LedgerFile {
  std::string distribution;
  bounds::ConstantLedger ledger;
  std::string json_path;
  std::string csv_path;
};

struct RunReport {
  std::vector<LedgerFile> ledgers;
  bool all_qualified = true;
  std::uint64_t config_hash = 0;
  std::string report_path;
};

// Samples each configured distribution once (one streaming pass reused by
// every family), fits constants, and writes one ledger JSON + CSV per
// (family, distribution) plus run_report.json. All outputs are written via
// atomic rename; ledger files carry no timestamps and are byte-identical for
// any worker count.
RunReport run_experiment(const ExperimentConfig& config, int workers = 1);

// Renders ledgers found in run_dir into summary.txt and per-inequality
// plot CSV files (threshold vs empirical vs bound at the fitted constant).
void render_report(const std::string& run_dir);

std::string default_output_dir();
const char* code_version();

}  // namespace lclab::harness
