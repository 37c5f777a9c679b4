#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "recal/grid.hpp"

namespace recal {

using GridIndex = std::size_t;
using Rng = std::mt19937_64;

// A probability vector over the n+1 grid points.
class ForecastDistribution {
 public:
  // Validates nonnegativity and unit mass (within 1e-12).
  explicit ForecastDistribution(std::vector<double> probabilities);

  static ForecastDistribution point_mass(std::size_t size, GridIndex index);
  static ForecastDistribution uniform(std::size_t size);

  std::size_t size() const noexcept { return probabilities_.size(); }
  double operator[](GridIndex i) const { return probabilities_[i]; }
  std::span<const double> probabilities() const noexcept { return probabilities_; }

  // Mean forecast value sum_i w_i * i/n.
  double mean(const ProbabilityGrid& grid) const;

  bool operator==(const ForecastDistribution&) const = default;

 private:
  std::vector<double> probabilities_;
};

// The forecast is the limit of u Q^k from the uniform vector u. The first
// plain_iterations steps multiply by Q directly; after that Q is squared
// repeatedly, so doubling d reaches u Q^(2^d - 1 + plain_iterations). Stops
// once || w - wQ ||_1 <= tolerance.
struct StationaryOptions {
  double tolerance = 1e-10;
  std::size_t plain_iterations = 32;
  std::size_t max_doublings = 64;
};

// Online calibration subroutine over a fixed grid.
//
// Forecasts are the stationary distribution of the chain whose off-diagonal
// transition weights are the positive parts of the cumulative swap regrets
// R[i][j] = sum_t w_{t,i} ((y_t - i/n)^2 - (y_t - j/n)^2). Playing a fixed
// point of that chain keeps every R[i][j] growing at most like sqrt(t), which
// gives both vanishing internal regret (hence calibration) and vanishing
// external regret against every constant grid point.
//
// Single-writer; instances are independent.
class CalibratorState {
 public:
  explicit CalibratorState(ProbabilityGrid grid);

  const ProbabilityGrid& grid() const noexcept { return grid_; }
  std::size_t size() const noexcept { return grid_.size(); }
  std::uint64_t steps() const noexcept { return t_; }

  double regret(GridIndex i, GridIndex j) const { return regret_[i * size() + j]; }
  std::span<const double> regret_matrix() const noexcept { return regret_; }
  std::span<const double> weighted_count() const noexcept { return weighted_count_; }
  std::span<const double> weighted_outcome() const noexcept { return weighted_outcome_; }
  std::span<const std::uint64_t> sampled_count() const noexcept { return sampled_count_; }

  // True when no off-diagonal regret is positive; forecasts then follow the
  // cold-start rule (point mass nearest the running mean outcome, 0.5 when
  // nothing has been observed).
  bool cold() const;

  ForecastDistribution forecast_distribution(const StationaryOptions& options = {}) const;

  void update(const ForecastDistribution& played, GridIndex sampled, int y);

  // max_{i != j} R[i][j] / t over rows i that have been played
  // (weighted_count[i] > 0); rows never played carry no regret. Throws
  // EmptyStateError when t = 0.
  double internal_regret() const;

  // sum_i max(max_j R[i][j], 0) / t. Bounds the expected calibration error:
  // C~ <= swap_regret_sum() + 1/(4 n^2).
  double swap_regret_sum() const;

  // (1/t) sum_t sum_i w_{t,i} ((y_t - i/n)^2 - (y_t - j/n)^2): loss of the
  // played distributions relative to always forecasting point j.
  double external_regret(GridIndex j) const;

  // max_i |sampled_count[i] - weighted_count[i]| / t.
  double expected_point_mass_gap() const;

  // Rebuilds a state from stored statistics. Checks shapes only.
  static CalibratorState from_parts(ProbabilityGrid grid, std::vector<double> regret,
                                    std::vector<double> weighted_count,
                                    std::vector<double> weighted_outcome,
                                    std::vector<std::uint64_t> sampled_count,
                                    std::uint64_t steps);

  bool operator==(const CalibratorState&) const = default;

 private:
  ProbabilityGrid grid_;
  std::vector<double> regret_;  // row-major (n+1) x (n+1)
  std::vector<double> weighted_count_;
  std::vector<double> weighted_outcome_;
  std::vector<std::uint64_t> sampled_count_;
  std::uint64_t t_ = 0;
};

// Row-stochastic matrix Q (row-major) built from the positive regrets:
// Q[i][j] = max(R[i][j], 0) / mu for i != j, with mu twice the largest row
// sum of positive regrets, and the diagonal absorbing the remainder.
std::vector<double> regret_chain(const CalibratorState& state);

// || w - wQ ||_1 for a row-major stochastic matrix Q.
double stationary_residual(std::span<const double> w, std::span<const double> chain);

// Draws index i with probability dist[i]. Always consumes one uniform draw.
GridIndex sample_forecast(const ForecastDistribution& dist, Rng& rng);

void check_outcome(int y);

}  // namespace recal
