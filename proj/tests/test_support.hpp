#pragma once

// Shared fixtures and independent oracles for the test suites. Nothing here
// calls back into the metric implementations it is used to check.

#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <random>
#include <vector>

#include "recal/calibrator.hpp"
#include "recal/metrics.hpp"
#include "recal/transcript.hpp"

namespace recal::testing {

// Outcome rule for a standalone calibrator: sees the round and the played
// distribution (never the sample) and returns y.
using OutcomeRule = std::function<int(std::uint64_t t, const ForecastDistribution&)>;

struct StandaloneRun {
  CalibratorState state;
  CalibrationLedger ledger;
  std::vector<TranscriptRecord> transcript;
};

inline StandaloneRun run_standalone(std::size_t n, std::uint64_t rounds, std::uint64_t seed,
                                    const OutcomeRule& rule) {
  ProbabilityGrid grid(n);
  StandaloneRun run{CalibratorState(grid), CalibrationLedger(grid), {}};
  Rng rng(seed);
  for (std::uint64_t t = 1; t <= rounds; ++t) {
    ForecastDistribution dist = run.state.forecast_distribution();
    GridIndex i = sample_forecast(dist, rng);
    int y = rule(t, dist);
    run.state.update(dist, i, y);
    run.ledger.record(dist, y, 0.5);
    auto w = dist.probabilities();
    run.transcript.push_back({t, {w.begin(), w.end()}, i, y, std::nullopt, std::nullopt});
  }
  return run;
}

inline OutcomeRule bernoulli_rule(double q, std::uint64_t seed) {
  auto rng = std::make_shared<Rng>(seed);
  return [rng, q](std::uint64_t, const ForecastDistribution&) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(*rng) < q ? 1 : 0;
  };
}

inline int grid_n(const std::vector<double>& w) { return static_cast<int>(w.size()) - 1; }

// Swap-regret matrix recomputed from scratch out of a transcript.
inline std::vector<double> batch_regret(const std::vector<TranscriptRecord>& transcript,
                                        std::size_t n) {
  const std::size_t m = n + 1;
  std::vector<double> r(m * m, 0.0);
  for (const auto& rec : transcript) {
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < m; ++j) {
        if (i == j) continue;
        const double li = std::pow(rec.y - static_cast<double>(i) / n, 2);
        const double lj = std::pow(rec.y - static_cast<double>(j) / n, 2);
        r[i * m + j] += rec.distribution[i] * (li - lj);
      }
    }
  }
  return r;
}

// Occupancy-weighted squared calibration deviation, straight from the
// defining sum over a transcript: weights either the played distribution
// (expected) or the sampled indicator.
inline double batch_calibration(const std::vector<TranscriptRecord>& transcript, std::size_t n,
                                bool sampled) {
  std::vector<double> weight(n + 1, 0.0), hits(n + 1, 0.0);
  for (const auto& rec : transcript) {
    for (std::size_t i = 0; i <= n; ++i) {
      const double w = sampled ? (rec.sampled == i ? 1.0 : 0.0) : rec.distribution[i];
      weight[i] += w;
      hits[i] += w * rec.y;
    }
  }
  double c = 0.0;
  const double total = static_cast<double>(transcript.size());
  for (std::size_t i = 0; i <= n; ++i) {
    if (weight[i] <= 0.0) continue;
    const double dev = hits[i] / weight[i] - static_cast<double>(i) / n;
    c += dev * dev * weight[i] / total;
  }
  return c;
}

}  // namespace recal::testing
