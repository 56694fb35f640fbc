#ifndef SMAG_HARNESS_HPP
#define SMAG_HARNESS_HPP

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "smag/baselines.hpp"
#include "smag/core.hpp"
#include "smag/problems.hpp"
#include "smag/smag.hpp"

namespace smag::harness {

using Json = nlohmann::json;

/// Invalid configuration; maps to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---------------------------------------------------------------------------
// Trace CSV

using MetaList = std::vector<std::pair<std::string, std::string>>;

inline constexpr const char* kTraceHeader = "t,objective,stationarity,p_t,elapsed_ms,seed";

/// '#'-prefixed "key=value" metadata lines, the header, then one row per
/// record with %.17g numbers (NaN written as "nan").
void write_trace_csv(std::ostream& out, const std::vector<RunRecord>& rows, const MetaList& meta);

struct TraceFile {
  MetaList meta;
  std::vector<RunRecord> rows;

  std::optional<std::string> find(const std::string& key) const;
};

/// Inverse of write_trace_csv. Sets stationarity_exact from the
/// "stationarity" metadata entry.
TraceFile read_trace_csv(std::istream& in);

/// FNV-1a of the canonical JSON dump, as 16 hex digits.
std::string config_hash(const Json& config);

/// Applies a "dotted.key=value" override; value is parsed as JSON when it
/// parses, otherwise taken as a string.
void apply_override(Json& config, const std::string& assignment);

// ---------------------------------------------------------------------------
// Problems from configuration

struct ProblemBundle {
  DMaxProblem problem;
  std::string kind;
  std::shared_ptr<const PuData> pu;
  std::shared_ptr<const PaucData> pauc_train;
  std::optional<LabeledDataset> pauc_test;
  PaucParams pauc_params;
  // Iterations per pass over the data (1 for closed-form problems).
  std::uint64_t iters_per_epoch = 1;
};

ProblemBundle build_problem(const Json& problem_cfg);

// ---------------------------------------------------------------------------
// Experiments

struct SeedOutcome {
  std::uint64_t seed = 0;
  std::filesystem::path trace_path;
  std::vector<RunRecord> trace;
  RealVec final_x;
  RealVec returned;
  double final_objective = 0.0;
  double final_stationarity = 0.0;
  bool aborted = false;
  std::string failure;
  std::vector<std::pair<std::string, double>> extra;  // test metrics
};

struct ExperimentOutcome {
  int exit_code = 0;
  std::string message;
  std::string config_hash;
  std::filesystem::path output_dir;
  std::filesystem::path summary_path;
  std::vector<SeedOutcome> seeds;
};

/// Validates `config`, runs every seed on a worker pool and writes one trace
/// CSV per seed plus summary.csv under out_root / config["output_dir"].
/// Invalid configurations return exit code 2 without running; a runtime
/// abort in any seed returns 3 with the partial files flagged.
ExperimentOutcome run_experiment(const Json& config, const std::filesystem::path& out_root, std::ostream& log);

/// Output root from the SMAG_OUTPUT_ROOT environment variable, else ".".
std::filesystem::path output_root_from_env();

// ---------------------------------------------------------------------------
// Finite-difference check of the envelope-difference gradient

struct GradCheckReport {
  double max_rel_err = 0.0;
  int points = 0;
  int rejected = 0;
  double gamma = 0.0;
  double h = 0.0;
};

/// Config keys: problem, gamma, n_points, h, seed, radius, min_abs,
/// kink_margin (default 10 h). Relative error per point is
/// ||g - fd|| / max(||g||, ||fd||, 1e-8).
GradCheckReport grad_check(const Json& config);

// ---------------------------------------------------------------------------
// Schedule printer

struct ScheduleReport {
  Schedule schedule;
  std::vector<std::string> violations;
  std::string text;
  Json machine;
};

ScheduleReport print_schedule(const ProblemConstants& c, double gamma, double epsilon, Mode mode,
                              double init_gap = 1.0);
ScheduleReport print_schedule(const Json& config);
ProblemConstants constants_from_json(const Json& j);

// ---------------------------------------------------------------------------
// Fairness metrics

struct FairnessReport {
  double eod = 0.0;
  double eop = 0.0;
  double dp = 0.0;
  double pauc = 0.0;
};

/// Normalized one-way partial AUC: positives against the top
/// max(1, floor(rho n_-)) scoring negatives; ties count one half.
double partial_auc(const std::vector<double>& scores, const std::vector<int>& labels, double rho);

/// Predictions are 1[score > threshold]. DP, EOP (TPR gap) and EOD
/// (max of TPR and FPR gaps) between attribute groups +1 and -1.
FairnessReport fairness_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                                const std::vector<int>& attrs, double threshold = 0.0, double rho = 0.3);

}  // namespace smag::harness

#endif  // SMAG_HARNESS_HPP
