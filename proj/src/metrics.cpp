#include "recal/metrics.hpp"

#include <string>

#include "recal/errors.hpp"
#include "recal/recalibrator.hpp"

namespace recal {

namespace {

double squared(double v) { return v * v; }

void require_steps(const CalibrationLedger& ledger, const char* what) {
  if (ledger.steps() == 0) throw EmptyStateError(std::string(what) + " of an empty ledger");
}

void check_raw(double raw) {
  if (!(raw >= 0.0 && raw <= 1.0)) {
    throw DomainError("raw forecast " + std::to_string(raw) + " outside [0,1]");
  }
}

}  // namespace

CalibrationLedger::CalibrationLedger(ProbabilityGrid grid)
    : grid_(grid), weight_(grid.size(), 0.0), outcome_weight_(grid.size(), 0.0) {}

void CalibrationLedger::record(const ForecastDistribution& played, int y, double raw) {
  check_outcome(y);
  check_raw(raw);
  if (played.size() != grid_.size()) throw DomainError("distribution does not match grid");
  const double yd = static_cast<double>(y);
  double expected_loss = 0.0;
  for (GridIndex i = 0; i < grid_.size(); ++i) {
    const double wi = played[i];
    if (wi == 0.0) continue;
    weight_[i] += wi;
    outcome_weight_[i] += yd * wi;
    expected_loss += wi * squared(yd - grid_.point(i));
  }
  loss_emitted_ += expected_loss;
  loss_raw_ += squared(yd - raw);
  ++steps_;
}

void CalibrationLedger::record(GridIndex index, int y, double raw) {
  check_outcome(y);
  check_raw(raw);
  if (index >= grid_.size()) throw DomainError("grid index out of range");
  const double yd = static_cast<double>(y);
  weight_[index] += 1.0;
  outcome_weight_[index] += yd;
  loss_emitted_ += squared(yd - grid_.point(index));
  loss_raw_ += squared(yd - raw);
  ++steps_;
}

CalibrationLedger CalibrationLedger::from_parts(ProbabilityGrid grid, std::vector<double> weight,
                                                std::vector<double> outcome_weight,
                                                std::uint64_t steps, double loss_emitted,
                                                double loss_raw) {
  if (weight.size() != grid.size() || outcome_weight.size() != grid.size()) {
    throw ParseError("ledger statistics do not match grid size");
  }
  CalibrationLedger ledger(grid);
  ledger.weight_ = std::move(weight);
  ledger.outcome_weight_ = std::move(outcome_weight);
  ledger.steps_ = steps;
  ledger.loss_emitted_ = loss_emitted;
  ledger.loss_raw_ = loss_raw;
  return ledger;
}

std::optional<double> rho(const CalibrationLedger& ledger, GridIndex i) {
  if (i >= ledger.grid().size()) throw DomainError("grid index out of range");
  const double w = ledger.weight()[i];
  if (w <= 0.0) return std::nullopt;
  return ledger.outcome_weight()[i] / w;
}

double calibration_error(const CalibrationLedger& ledger) {
  require_steps(ledger, "calibration error");
  const double total = static_cast<double>(ledger.steps());
  double c = 0.0;
  for (GridIndex i = 0; i < ledger.grid().size(); ++i) {
    auto r = rho(ledger, i);
    if (!r) continue;
    c += squared(*r - ledger.grid().point(i)) * (ledger.weight()[i] / total);
  }
  return c;
}

double l2_regret(const CalibrationLedger& ledger) {
  require_steps(ledger, "l2 regret");
  return (ledger.loss_emitted() - ledger.loss_raw()) / static_cast<double>(ledger.steps());
}

std::vector<ReliabilityRow> reliability_bins(const CalibrationLedger& ledger) {
  require_steps(ledger, "reliability bins");
  double total = 0.0;
  for (double w : ledger.weight()) total += w;
  std::vector<ReliabilityRow> rows;
  for (GridIndex i = 0; i < ledger.grid().size(); ++i) {
    auto r = rho(ledger, i);
    if (!r) continue;
    rows.push_back({ledger.grid().point(i), *r, ledger.weight()[i] / total, ledger.weight()[i]});
  }
  return rows;
}

Decomposition per_bucket_decomposition(const Recalibrator& rec) {
  if (rec.steps() == 0) throw EmptyStateError("decomposition of a recalibrator with no steps");
  const ProbabilityGrid& grid = rec.grid();
  const std::size_t m = grid.size();
  const double total = static_cast<double>(rec.steps());

  std::vector<double> weight(m, 0.0);
  std::vector<double> outcome(m, 0.0);
  for (const auto& [bucket, instance] : rec.instances()) {
    for (GridIndex j = 0; j < m; ++j) {
      weight[j] += instance.state.weighted_count()[j];
      outcome[j] += instance.state.weighted_outcome()[j];
    }
  }

  Decomposition out;
  out.targets.resize(m);
  for (GridIndex j = 0; j < m; ++j) {
    out.targets[j].target = j;
    if (weight[j] > 0.0) {
      out.targets[j].aggregate = squared(outcome[j] / weight[j] - grid.point(j)) * weight[j] / total;
    }
  }

  for (const auto& [bucket, instance] : rec.instances()) {
    const CalibratorState& s = instance.state;
    const double routed = static_cast<double>(s.steps());
    for (GridIndex j = 0; j < m; ++j) {
      const double w = s.weighted_count()[j];
      if (w <= 0.0) continue;
      const double term = squared(s.weighted_outcome()[j] / w - grid.point(j)) * w / routed;
      out.rows.push_back({bucket, j, term, out.targets[j].aggregate, s.steps()});
      out.targets[j].weighted_sum += routed / total * term;
    }
  }
  return out;
}

}  // namespace recal
