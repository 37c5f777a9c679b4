#include "recal/calibrator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "recal/errors.hpp"

namespace recal {

namespace {

constexpr double kMassTolerance = 1e-12;

double squared(double v) { return v * v; }

}  // namespace

void check_outcome(int y) {
  if (y != 0 && y != 1) {
    throw DomainError("outcome must be 0 or 1, got " + std::to_string(y));
  }
}

ForecastDistribution::ForecastDistribution(std::vector<double> probabilities)
    : probabilities_(std::move(probabilities)) {
  if (probabilities_.empty()) throw DomainError("empty forecast distribution");
  double total = 0.0;
  for (double p : probabilities_) {
    if (!(p >= 0.0 && p <= 1.0)) {
      throw DomainError("distribution entry " + std::to_string(p) + " outside [0,1]");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kMassTolerance) {
    throw DomainError("distribution mass " + std::to_string(total) + " is not 1");
  }
}

ForecastDistribution ForecastDistribution::point_mass(std::size_t size, GridIndex index) {
  if (index >= size) throw DomainError("point mass index out of range");
  std::vector<double> p(size, 0.0);
  p[index] = 1.0;
  return ForecastDistribution(std::move(p));
}

ForecastDistribution ForecastDistribution::uniform(std::size_t size) {
  return ForecastDistribution(std::vector<double>(size, 1.0 / static_cast<double>(size)));
}

double ForecastDistribution::mean(const ProbabilityGrid& grid) const {
  if (size() != grid.size()) throw DomainError("distribution does not match grid");
  double m = 0.0;
  for (GridIndex i = 0; i < size(); ++i) m += probabilities_[i] * grid.point(i);
  return m;
}

CalibratorState::CalibratorState(ProbabilityGrid grid)
    : grid_(grid),
      regret_(grid.size() * grid.size(), 0.0),
      weighted_count_(grid.size(), 0.0),
      weighted_outcome_(grid.size(), 0.0),
      sampled_count_(grid.size(), 0) {}

CalibratorState CalibratorState::from_parts(ProbabilityGrid grid, std::vector<double> regret,
                                            std::vector<double> weighted_count,
                                            std::vector<double> weighted_outcome,
                                            std::vector<std::uint64_t> sampled_count,
                                            std::uint64_t steps) {
  const std::size_t m = grid.size();
  if (regret.size() != m * m || weighted_count.size() != m ||
      weighted_outcome.size() != m || sampled_count.size() != m) {
    throw ParseError("calibrator statistics do not match grid size " + std::to_string(m));
  }
  CalibratorState state(grid);
  state.regret_ = std::move(regret);
  state.weighted_count_ = std::move(weighted_count);
  state.weighted_outcome_ = std::move(weighted_outcome);
  state.sampled_count_ = std::move(sampled_count);
  state.t_ = steps;
  return state;
}

bool CalibratorState::cold() const {
  const std::size_t m = size();
  for (GridIndex i = 0; i < m; ++i) {
    for (GridIndex j = 0; j < m; ++j) {
      if (i != j && regret_[i * m + j] > 0.0) return false;
    }
  }
  return true;
}

std::vector<double> regret_chain(const CalibratorState& state) {
  const std::size_t m = state.size();
  std::vector<double> chain(m * m, 0.0);
  double max_row = 0.0;
  for (GridIndex i = 0; i < m; ++i) {
    double row = 0.0;
    for (GridIndex j = 0; j < m; ++j) {
      if (i != j) row += std::max(state.regret(i, j), 0.0);
    }
    max_row = std::max(max_row, row);
  }
  if (max_row == 0.0) {
    for (GridIndex i = 0; i < m; ++i) chain[i * m + i] = 1.0;
    return chain;
  }
  const double mu = 2.0 * max_row;
  for (GridIndex i = 0; i < m; ++i) {
    double off = 0.0;
    for (GridIndex j = 0; j < m; ++j) {
      if (i == j) continue;
      double q = std::max(state.regret(i, j), 0.0) / mu;
      chain[i * m + j] = q;
      off += q;
    }
    chain[i * m + i] = 1.0 - off;
  }
  return chain;
}

namespace {

// out = w Q
void left_multiply(std::span<const double> w, std::span<const double> chain,
                   std::vector<double>& out) {
  const std::size_t m = w.size();
  std::fill(out.begin(), out.end(), 0.0);
  for (GridIndex i = 0; i < m; ++i) {
    const double wi = w[i];
    if (wi == 0.0) continue;
    const double* row = chain.data() + i * m;
    for (GridIndex j = 0; j < m; ++j) out[j] += wi * row[j];
  }
}

// out = P * P, renormalizing rows to stay stochastic.
void square_chain(const std::vector<double>& power, std::vector<double>& out, std::size_t m) {
  std::fill(out.begin(), out.end(), 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    double* row = out.data() + i * m;
    for (std::size_t k = 0; k < m; ++k) {
      const double pik = power[i * m + k];
      if (pik == 0.0) continue;
      const double* rk = power.data() + k * m;
      for (std::size_t j = 0; j < m; ++j) row[j] += pik * rk[j];
    }
    const double total = std::accumulate(row, row + m, 0.0);
    for (std::size_t j = 0; j < m; ++j) row[j] /= total;
  }
}

}  // namespace

double stationary_residual(std::span<const double> w, std::span<const double> chain) {
  std::vector<double> next(w.size());
  left_multiply(w, chain, next);
  double r = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) r += std::abs(next[j] - w[j]);
  return r;
}

ForecastDistribution CalibratorState::forecast_distribution(
    const StationaryOptions& options) const {
  const std::size_t m = size();
  if (cold()) {
    double mean = 0.5;
    if (t_ > 0) {
      mean = std::accumulate(weighted_outcome_.begin(), weighted_outcome_.end(), 0.0) /
             static_cast<double>(t_);
      mean = std::clamp(mean, 0.0, 1.0);
    }
    return ForecastDistribution::point_mass(m, grid_.nearest(mean));
  }

  const std::vector<double> chain = regret_chain(*this);
  std::vector<double> w(m, 1.0 / static_cast<double>(m));
  std::vector<double> next(m);

  // Residual of w against Q; leaves wQ in next.
  auto residual_of = [&](const std::vector<double>& v) {
    left_multiply(v, chain, next);
    double r = 0.0;
    for (GridIndex j = 0; j < m; ++j) r += std::abs(next[j] - v[j]);
    return r;
  };
  auto normalized = [](std::vector<double> v) {
    const double total = std::accumulate(v.begin(), v.end(), 0.0);
    for (double& x : v) x /= total;
    return v;
  };

  double residual = residual_of(w);
  std::size_t iterations = 0;
  while (residual > options.tolerance && iterations < options.plain_iterations) {
    w = normalized(next);
    residual = residual_of(w);
    ++iterations;
  }
  if (residual <= options.tolerance) return ForecastDistribution(normalized(std::move(w)));

  std::vector<double> power = chain;
  std::vector<double> squared_power(m * m);
  for (std::size_t d = 0; d < options.max_doublings; ++d) {
    left_multiply(w, power, next);
    w = normalized(next);
    residual = residual_of(w);
    if (residual <= options.tolerance) return ForecastDistribution(normalized(std::move(w)));
    square_chain(power, squared_power, m);
    power.swap(squared_power);
  }
  throw FixedPointError(residual, options.plain_iterations + options.max_doublings);
}

void CalibratorState::update(const ForecastDistribution& played, GridIndex sampled, int y) {
  check_outcome(y);
  const std::size_t m = size();
  if (played.size() != m) throw DomainError("played distribution does not match grid");
  if (sampled >= m) throw DomainError("sampled index out of range");

  const double yd = static_cast<double>(y);
  std::vector<double> loss(m);
  for (GridIndex i = 0; i < m; ++i) loss[i] = squared(yd - grid_.point(i));

  for (GridIndex i = 0; i < m; ++i) {
    const double wi = played[i];
    if (wi == 0.0) continue;
    double* row = regret_.data() + i * m;
    for (GridIndex j = 0; j < m; ++j) {
      if (j != i) row[j] += wi * (loss[i] - loss[j]);
    }
    weighted_count_[i] += wi;
    weighted_outcome_[i] += yd * wi;
  }
  sampled_count_[sampled] += 1;
  ++t_;
}

double CalibratorState::internal_regret() const {
  if (t_ == 0) throw EmptyStateError("internal regret of a calibrator with no steps");
  const std::size_t m = size();
  double best = -std::numeric_limits<double>::infinity();
  for (GridIndex i = 0; i < m; ++i) {
    if (!(weighted_count_[i] > 0.0)) continue;
    for (GridIndex j = 0; j < m; ++j) {
      if (i != j) best = std::max(best, regret_[i * m + j]);
    }
  }
  return best / static_cast<double>(t_);
}

double CalibratorState::swap_regret_sum() const {
  if (t_ == 0) throw EmptyStateError("swap regret of a calibrator with no steps");
  const std::size_t m = size();
  double total = 0.0;
  for (GridIndex i = 0; i < m; ++i) {
    double row = 0.0;
    for (GridIndex j = 0; j < m; ++j) row = std::max(row, regret_[i * m + j]);
    total += row;
  }
  return total / static_cast<double>(t_);
}

double CalibratorState::external_regret(GridIndex j) const {
  if (t_ == 0) throw EmptyStateError("external regret of a calibrator with no steps");
  const std::size_t m = size();
  if (j >= m) throw DomainError("grid index out of range");
  double total = 0.0;
  for (GridIndex i = 0; i < m; ++i) total += regret_[i * m + j];
  return total / static_cast<double>(t_);
}

double CalibratorState::expected_point_mass_gap() const {
  if (t_ == 0) throw EmptyStateError("point mass gap of a calibrator with no steps");
  double gap = 0.0;
  for (GridIndex i = 0; i < size(); ++i) {
    gap = std::max(gap, std::abs(static_cast<double>(sampled_count_[i]) - weighted_count_[i]));
  }
  return gap / static_cast<double>(t_);
}

GridIndex sample_forecast(const ForecastDistribution& dist, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const double u = unit(rng);
  double cumulative = 0.0;
  GridIndex last_positive = 0;
  for (GridIndex i = 0; i < dist.size(); ++i) {
    if (dist[i] <= 0.0) continue;
    cumulative += dist[i];
    last_positive = i;
    if (u < cumulative) return i;
  }
  return last_positive;
}

}  // namespace recal
