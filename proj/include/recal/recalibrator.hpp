#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recal/calibrator.hpp"
#include "recal/grid.hpp"
#include "recal/metrics.hpp"
#include "recal/transcript.hpp"

namespace recal {

enum class UpdateMode { kExpected, kSampled };

std::string to_string(UpdateMode mode);
UpdateMode parse_update_mode(std::string_view text);

// Bucket j covers [j/n, (j+1)/n); the last bucket is closed at 1.
std::size_t bucket_index(double p_raw, std::size_t n);

// Seed for bucket j's sampler, independent of bucket creation order.
std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream);

struct BucketInstance {
  CalibratorState state;
  Rng rng;
};

// Wraps any raw forecaster: [0,1] is split into n buckets, each served by its
// own lazily created calibration subroutine on the grid {i/n}. step() routes a
// raw forecast and emits the bucket subroutine's sampled forecast; observe()
// feeds the outcome back to that subroutine only.
//
// step() and observe() must strictly alternate. Single-writer.
class Recalibrator {
 public:
  struct Options {
    UpdateMode update_mode = UpdateMode::kExpected;
    StationaryOptions stationary;
  };

  using TranscriptSink = std::function<void(const TranscriptRecord&)>;

  Recalibrator(std::size_t n, std::uint64_t seed);
  Recalibrator(std::size_t n, std::uint64_t seed, Options options);

  double step(double p_raw);
  void observe(int y);

  bool has_pending() const noexcept { return pending_.has_value(); }
  // Distribution and bucket of the in-flight step; throws ProtocolError if none.
  const ForecastDistribution& pending_distribution() const;
  std::size_t pending_bucket() const;
  double pending_expected_forecast() const;

  const ProbabilityGrid& grid() const noexcept { return grid_; }
  std::uint64_t seed() const noexcept { return seed_; }
  const Options& options() const noexcept { return options_; }
  std::uint64_t steps() const noexcept { return steps_; }
  const std::vector<std::uint64_t>& routing_counts() const noexcept { return routing_counts_; }
  const std::map<std::size_t, BucketInstance>& instances() const noexcept { return instances_; }
  const CalibratorState* instance(std::size_t bucket) const;

  const CalibrationLedger& expected_ledger() const noexcept { return expected_; }
  const CalibrationLedger& sampled_ledger() const noexcept { return sampled_; }
  // Raw forecasts rounded to the nearest grid point, for comparing their
  // calibration with the emitted forecasts on the same stream.
  const CalibrationLedger& raw_ledger() const noexcept { return raw_; }

  void set_transcript_sink(TranscriptSink sink) { sink_ = std::move(sink); }

  // Versioned JSON text; deterministic and bit-exact on round trip.
  std::string snapshot() const;
  static Recalibrator restore(std::string_view text);

 private:
  struct Pending {
    std::size_t bucket;
    double raw;
    ForecastDistribution distribution;
    GridIndex sampled;
  };

  BucketInstance& instance_for(std::size_t bucket);

  ProbabilityGrid grid_;
  std::uint64_t seed_;
  Options options_;
  std::map<std::size_t, BucketInstance> instances_;
  std::vector<std::uint64_t> routing_counts_;
  std::uint64_t steps_ = 0;
  std::optional<Pending> pending_;
  CalibrationLedger expected_;
  CalibrationLedger sampled_;
  CalibrationLedger raw_;
  TranscriptSink sink_;
};

}  // namespace recal
