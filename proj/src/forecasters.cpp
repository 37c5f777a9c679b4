#include "recal/forecasters.hpp"

#include <algorithm>
#include <cmath>

#include "recal/calibrator.hpp"
#include "recal/errors.hpp"

namespace recal {

double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double clamp_forecast(double p) { return std::clamp(p, kForecastClamp, 1.0 - kForecastClamp); }

std::string to_string(StepRule rule) { return rule == StepRule::kFixed ? "fixed" : "adaptive"; }

StepRule parse_step_rule(std::string_view text) {
  if (text == "fixed") return StepRule::kFixed;
  if (text == "adaptive") return StepRule::kAdaptive;
  throw ConfigError("unknown step rule '" + std::string(text) + "'");
}

LogisticForecaster::LogisticForecaster(std::size_t dim, LogisticOptions options)
    : options_(options), weights_(dim, 0.0), squared_gradients_(dim, 0.0) {
  if (dim == 0) throw DomainError("forecaster dimension must be at least 1");
  if (!(options.eta > 0.0) || !(options.delta > 0.0)) {
    throw DomainError("step size and stabilizer must be positive");
  }
}

double LogisticForecaster::margin(std::span<const double> x) const {
  if (x.size() != weights_.size()) {
    throw DomainError("covariate dimension " + std::to_string(x.size()) + " does not match " +
                      std::to_string(weights_.size()));
  }
  double z = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (!std::isfinite(x[k])) throw DomainError("non-finite covariate");
    z += weights_[k] * x[k];
  }
  return z;
}

double LogisticForecaster::predict(std::span<const double> x) const {
  return clamp_forecast(logistic(margin(x)));
}

void LogisticForecaster::learn(std::span<const double> x, int y) {
  check_outcome(y);
  const double residual = logistic(margin(x)) - static_cast<double>(y);
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double g = residual * x[k];
    double rate = options_.eta;
    if (options_.rule == StepRule::kAdaptive) {
      squared_gradients_[k] += g * g;
      rate = options_.eta / std::sqrt(squared_gradients_[k] + options_.delta);
    }
    weights_[k] -= rate * g;
  }
}

ExpertAggregator::ExpertAggregator(std::size_t experts)
    : log_weights_(experts, 0.0), expert_loss_(experts, 0.0) {
  if (experts == 0) throw DomainError("aggregator needs at least one expert");
}

void ExpertAggregator::check(std::span<const double> forecasts) const {
  if (forecasts.size() != experts()) {
    throw DomainError("expected " + std::to_string(experts()) + " expert forecasts, got " +
                      std::to_string(forecasts.size()));
  }
  for (double p : forecasts) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("expert forecast " + std::to_string(p) + " outside [0,1]");
    }
  }
}

std::vector<double> ExpertAggregator::weights() const {
  const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
  std::vector<double> w(experts());
  double total = 0.0;
  for (std::size_t k = 0; k < experts(); ++k) {
    w[k] = std::exp(log_weights_[k] - top);
    total += w[k];
  }
  for (double& v : w) v /= total;
  return w;
}

double ExpertAggregator::aggregate(std::span<const double> forecasts) const {
  check(forecasts);
  const std::vector<double> w = weights();
  double p = 0.0;
  for (std::size_t k = 0; k < experts(); ++k) p += w[k] * forecasts[k];
  const auto [lo, hi] = std::minmax_element(forecasts.begin(), forecasts.end());
  return std::clamp(p, *lo, *hi);
}

void ExpertAggregator::update(std::span<const double> forecasts, int y) {
  check_outcome(y);
  const double p = aggregate(forecasts);
  const double yd = static_cast<double>(y);
  ++steps_;
  const double eta =
      std::sqrt(8.0 * std::log(static_cast<double>(experts())) / static_cast<double>(steps_));
  for (std::size_t k = 0; k < experts(); ++k) {
    const double loss = (yd - forecasts[k]) * (yd - forecasts[k]);
    log_weights_[k] -= eta * loss;
    expert_loss_[k] += loss;
  }
  aggregate_loss_ += (yd - p) * (yd - p);
  // Normalized weights are shift invariant; keep the largest log-weight at 0.
  const double top = *std::max_element(log_weights_.begin(), log_weights_.end());
  for (double& v : log_weights_) v -= top;
}

std::vector<double> ExpertAggregator::external_regrets() const {
  if (steps_ == 0) throw EmptyStateError("external regret of an aggregator with no steps");
  std::vector<double> r(experts());
  const double t = static_cast<double>(steps_);
  for (std::size_t k = 0; k < experts(); ++k) r[k] = (aggregate_loss_ - expert_loss_[k]) / t;
  return r;
}

std::vector<double> ExpertAggregator::expert_losses() const {
  if (steps_ == 0) throw EmptyStateError("losses of an aggregator with no steps");
  std::vector<double> l(expert_loss_);
  for (double& v : l) v /= static_cast<double>(steps_);
  return l;
}

double ExpertAggregator::aggregate_loss() const {
  if (steps_ == 0) throw EmptyStateError("loss of an aggregator with no steps");
  return aggregate_loss_ / static_cast<double>(steps_);
}

}  // namespace recal
