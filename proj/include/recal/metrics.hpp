#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "recal/calibrator.hpp"
#include "recal/grid.hpp"

namespace recal {

// Incremental sufficient statistics for conditional frequencies, calibration
// error and squared losses over a forecast grid.
//
// An expected-mode ledger spreads each step over the played distribution
// (weights w_{t,i}); a sampled-mode ledger records an indicator at the
// realized index. Both modes can be mixed on one ledger but the recalibrator
// keeps them separate.
class CalibrationLedger {
 public:
  explicit CalibrationLedger(ProbabilityGrid grid);

  // Expected mode. The emitted loss recorded is sum_i w_i (y - i/n)^2.
  void record(const ForecastDistribution& played, int y, double raw);
  // Sampled mode. The emitted loss recorded is (y - i/n)^2.
  void record(GridIndex index, int y, double raw);

  const ProbabilityGrid& grid() const noexcept { return grid_; }
  std::uint64_t steps() const noexcept { return steps_; }
  std::span<const double> weight() const noexcept { return weight_; }
  std::span<const double> outcome_weight() const noexcept { return outcome_weight_; }
  double loss_emitted() const noexcept { return loss_emitted_; }
  double loss_raw() const noexcept { return loss_raw_; }

  static CalibrationLedger from_parts(ProbabilityGrid grid, std::vector<double> weight,
                                      std::vector<double> outcome_weight, std::uint64_t steps,
                                      double loss_emitted, double loss_raw);

  bool operator==(const CalibrationLedger&) const = default;

 private:
  ProbabilityGrid grid_;
  std::vector<double> weight_;
  std::vector<double> outcome_weight_;
  std::uint64_t steps_ = 0;
  double loss_emitted_ = 0.0;
  double loss_raw_ = 0.0;
};

// outcome_weight[i] / weight[i]; nullopt for an empty bin.
std::optional<double> rho(const CalibrationLedger& ledger, GridIndex i);

// sum_i (rho(i) - i/n)^2 * weight[i] / T over occupied bins.
double calibration_error(const CalibrationLedger& ledger);

// (loss_emitted - loss_raw) / T.
double l2_regret(const CalibrationLedger& ledger);

struct ReliabilityRow {
  double grid_value = 0.0;
  double rho = 0.0;
  double weight_share = 0.0;
  double weight = 0.0;
  bool operator==(const ReliabilityRow&) const = default;
};

// One row per occupied grid point, ascending by grid value.
std::vector<ReliabilityRow> reliability_bins(const CalibrationLedger& ledger);

class Recalibrator;

// Both sides of the Jensen step for one (bucket, target) pair:
// instance_term is C^(i)_{T_i,j} = (rho_i(j) - j/n)^2 * W_i(j) / T_i and
// aggregate is C_{T,j} = (rho(j) - j/n)^2 * W(j) / T over all buckets.
struct DecompositionRow {
  std::size_t bucket = 0;
  GridIndex target = 0;
  double instance_term = 0.0;
  double aggregate = 0.0;
  std::uint64_t routed = 0;
  bool operator==(const DecompositionRow&) const = default;
};

struct TargetDecomposition {
  GridIndex target = 0;
  double aggregate = 0.0;
  double weighted_sum = 0.0;  // sum_i (T_i / T) * instance_term
};

struct Decomposition {
  std::vector<DecompositionRow> rows;       // occupied pairs, by bucket then target
  std::vector<TargetDecomposition> targets;  // every grid point
};

Decomposition per_bucket_decomposition(const Recalibrator& rec);

}  // namespace recal
