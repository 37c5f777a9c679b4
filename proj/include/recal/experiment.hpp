#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "recal/forecasters.hpp"
#include "recal/metrics.hpp"
#include "recal/nature.hpp"
#include "recal/recalibrator.hpp"
#include "recal/stream.hpp"

namespace recal {

inline constexpr int kReportSchemaVersion = 1;

// Seed stream reserved for Nature, disjoint from the bucket streams 0..n-1.
inline constexpr std::uint64_t kNatureStream = 0x4e6174757265ULL;

struct ExperimentConfig {
  Mode mode = Mode::kCovariate;
  std::optional<NatureSpec> generator;
  std::optional<std::string> input;
  std::size_t n = 10;
  // Required with a generator; with an input file the whole file is used
  // unless a horizon is given.
  std::optional<std::uint64_t> horizon;
  std::uint64_t seed = 0;
  LogisticOptions forecaster;
  UpdateMode update_mode = UpdateMode::kExpected;

  bool operator==(const ExperimentConfig&) const = default;
};

// Throws ConfigError: n >= 1, T >= 1, exactly one data source, and a
// generator that matches the mode.
void validate(const ExperimentConfig& config);

struct InstanceSummary {
  std::size_t bucket = 0;
  std::uint64_t routed = 0;
  double internal_regret = 0.0;
  double swap_regret_sum = 0.0;
  // External regret against the bucket's own left edge j/n.
  double nominal_external_regret = 0.0;
  double point_mass_gap = 0.0;
  bool operator==(const InstanceSummary&) const = default;
};

struct ExpertSummary {
  std::vector<double> expert_losses;
  std::vector<double> aggregator_regrets;    // aggregate vs each expert
  std::vector<double> recalibrated_regrets;  // emitted forecasts vs each expert
  double aggregator_loss = 0.0;
  double best_expert_loss = 0.0;
  std::vector<double> final_weights;
  bool operator==(const ExpertSummary&) const = default;
};

struct ReportRow {
  double grid_value = 0.0;
  double rho = 0.0;
  double weight_share = 0.0;
  std::uint64_t count = 0;  // realized plays of this grid value
  bool operator==(const ReportRow&) const = default;
};

struct Report {
  int schema_version = kReportSchemaVersion;
  ExperimentConfig config;
  std::uint64_t steps = 0;
  double calibration_expected = 0.0;
  double calibration_sampled = 0.0;
  double calibration_raw = 0.0;
  double l2_regret = 0.0;           // realized emitted forecasts vs raw
  double l2_regret_expected = 0.0;  // expected loss of the played distributions vs raw
  double mean_loss_emitted = 0.0;
  double mean_loss_raw = 0.0;
  double max_internal_regret = 0.0;
  // sum_j (T_j / T) * nominal_external_regret_j
  double regret_slack = 0.0;
  std::vector<InstanceSummary> instances;
  std::vector<DecompositionRow> decomposition;
  std::optional<ExpertSummary> experts;
  std::vector<ReportRow> reliability;
  double wall_clock_seconds = 0.0;

  bool operator==(const Report&) const = default;
};

nlohmann::json to_json(const ExperimentConfig& config);
ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Report& report);
Report report_from_json(const nlohmann::json& j);

// Everything that happened in one protocol round.
struct RoundRecord {
  std::uint64_t t = 0;
  std::vector<double> revealed;  // covariates, raw forecast, or expert forecasts
  double raw = 0.0;
  double emitted = 0.0;
  int y = 0;
};

struct RunHooks {
  std::function<void(const RoundRecord&)> on_round;
  std::function<void(const Recalibrator&)> after_round;
  Recalibrator::TranscriptSink transcript;
};

// Runs the protocol for T rounds: reveal, raw forecast, recalibrate, reveal
// y, update forecaster and recalibrator. Deterministic given the config.
Report run_experiment(const ExperimentConfig& config, const RunHooks& hooks = {});

// Restores a recalibrator snapshot and continues it over a forecast-stream
// file, skipping the rounds the snapshot has already seen.
Report replay_experiment(const std::string& snapshot_text, const std::string& stream_path,
                         const RunHooks& hooks = {});

// Builds the report body from the final state.
Report make_report(const ExperimentConfig& config, const Recalibrator& rec,
                   const ExpertAggregator* aggregator);

// Writes the JSON report and, next to it, a CSV of the reliability rows with
// columns grid_value,rho,weight_share,count. Returns the CSV path.
std::string emit_report(const Report& report, const std::string& path);
std::string reliability_csv(const Report& report);
std::string csv_path_for(const std::string& report_path);

}  // namespace recal
