#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace recal {

inline constexpr double kForecastClamp = 1e-9;

double logistic(double z);

// Clamps a probability into [1e-9, 1 - 1e-9].
double clamp_forecast(double p);

enum class StepRule { kFixed, kAdaptive };

std::string to_string(StepRule rule);
StepRule parse_step_rule(std::string_view text);

struct LogisticOptions {
  StepRule rule = StepRule::kFixed;
  double eta = 2e-4;
  double delta = 1e-8;
  bool operator==(const LogisticOptions&) const = default;
};

// Online logistic regression p = sigma(w . x) trained by gradient steps on
// log-loss. The adaptive rule scales coordinate k by eta / sqrt(G_k + delta)
// where G_k already includes the current squared gradient.
class LogisticForecaster {
 public:
  explicit LogisticForecaster(std::size_t dim, LogisticOptions options = {});

  // Clamped sigma(w . x).
  double predict(std::span<const double> x) const;
  void learn(std::span<const double> x, int y);

  std::size_t dim() const noexcept { return weights_.size(); }
  const std::vector<double>& weights() const noexcept { return weights_; }
  const LogisticOptions& options() const noexcept { return options_; }

 private:
  double margin(std::span<const double> x) const;

  LogisticOptions options_;
  std::vector<double> weights_;
  std::vector<double> squared_gradients_;
};

// Exponentially weighted average of K expert forecasts under squared loss,
// with the anytime rate eta_t = sqrt(8 ln K / t). Also tracks the cumulative
// squared losses needed to report external regret against each expert.
class ExpertAggregator {
 public:
  explicit ExpertAggregator(std::size_t experts);

  double aggregate(std::span<const double> forecasts) const;
  void update(std::span<const double> forecasts, int y);

  std::size_t experts() const noexcept { return log_weights_.size(); }
  std::uint64_t steps() const noexcept { return steps_; }
  std::vector<double> weights() const;

  // (1/T) sum_t (y_t - aggregate_t)^2 - (1/T) sum_t (y_t - p^(k)_t)^2 per expert.
  std::vector<double> external_regrets() const;
  // Mean squared loss of each expert.
  std::vector<double> expert_losses() const;
  double aggregate_loss() const;

 private:
  void check(std::span<const double> forecasts) const;

  std::vector<double> log_weights_;
  std::vector<double> expert_loss_;
  double aggregate_loss_ = 0.0;
  std::uint64_t steps_ = 0;
};

}  // namespace recal
