#include <doctest.h>

#include <vector>

#include "recal/errors.hpp"
#include "recal/metrics.hpp"
#include "recal/recalibrator.hpp"
#include "test_support.hpp"

using namespace recal;

namespace {

// Drives a recalibrator over (p_raw, y) pairs produced by a callback.
template <class Round>
void drive(Recalibrator& rec, std::uint64_t rounds, Round&& round) {
  for (std::uint64_t t = 1; t <= rounds; ++t) {
    auto [p, y] = round(t);
    rec.step(p);
    rec.observe(y);
  }
}

std::pair<double, int> mixed_round(Rng& rng) {
  const double p = std::uniform_real_distribution<double>(0.0, 1.0)(rng);
  const double q = 0.15 + 0.7 * p * p;
  return {p, std::uniform_real_distribution<double>(0.0, 1.0)(rng) < q ? 1 : 0};
}

}  // namespace

TEST_CASE("bucket index") {
  CHECK(bucket_index(0.0, 10) == 0);
  CHECK(bucket_index(1.0, 10) == 9);
  CHECK(bucket_index(0.35, 10) == 3);
  CHECK(bucket_index(0.1, 10) == 1);
  CHECK(bucket_index(1.0, 1) == 0);
  CHECK_THROWS_AS(bucket_index(-0.01, 10), DomainError);
  CHECK_THROWS_AS(bucket_index(1.01, 10), DomainError);
  CHECK_THROWS_AS(bucket_index(std::nan(""), 10), DomainError);
}

TEST_CASE("buckets partition [0,1] monotonically") {
  Rng rng(8);
  for (std::size_t n : {1u, 2u, 3u, 7u, 10u, 64u}) {
    std::vector<double> ps = {0.0, 1.0, 0.5};
    for (std::size_t j = 0; j <= n; ++j) {
      const double edge = static_cast<double>(j) / n;
      ps.push_back(edge);
      ps.push_back(std::nextafter(edge, 0.0));
      ps.push_back(std::min(1.0, std::nextafter(edge, 1.0)));
    }
    for (int k = 0; k < 500; ++k) ps.push_back(std::uniform_real_distribution<double>(0.0, 1.0)(rng));
    std::sort(ps.begin(), ps.end());
    std::size_t prev = 0;
    for (double p : ps) {
      if (p < 0.0) continue;
      const std::size_t j = bucket_index(p, n);
      CHECK(j < n);
      CHECK(j >= prev);
      prev = j;
    }
  }
}

TEST_CASE("first step creates the bucket and plays the midpoint") {
  Recalibrator rec(10, 1);
  CHECK(rec.step(0.72) == 0.5);
  REQUIRE(rec.instances().size() == 1);
  CHECK(rec.instances().count(7) == 1);
  CHECK(rec.pending_bucket() == 7);
  CHECK(rec.pending_expected_forecast() == 0.5);
}

TEST_CASE("a bucket that always sees y = 1 converges to forecasting 1") {
  Recalibrator rec(10, 5);
  Rng rng(6);
  int ones = 0;
  for (int t = 1; t <= 50'000; ++t) {
    const double p = std::uniform_real_distribution<double>(0.3, 0.4)(rng);
    const double emitted = rec.step(p);
    rec.observe(1);
    if (t > 40'000 && emitted == 1.0) ++ones;
  }
  CHECK(ones >= 9'500);
  CHECK(rec.instances().size() == 1);
}

TEST_CASE("equal seeds and inputs give identical emissions") {
  Recalibrator a(10, 42), b(10, 42);
  Rng ra(1), rb(1);
  for (int t = 0; t < 5000; ++t) {
    auto [pa, ya] = mixed_round(ra);
    auto [pb, yb] = mixed_round(rb);
    REQUIRE(a.step(pa) == b.step(pb));
    a.observe(ya);
    b.observe(yb);
  }
  CHECK(a.snapshot() == b.snapshot());
}

TEST_CASE("observe updates only the routed bucket") {
  Recalibrator rec(10, 3);
  rec.step(0.75);
  rec.observe(1);
  CHECK(rec.routing_counts()[7] == 1);
  CHECK(rec.instances().size() == 1);
  CHECK(rec.instance(7)->steps() == 1);
  CHECK(rec.instance(3) == nullptr);
  CHECK(rec.steps() == 1);
}

TEST_CASE("step and observe must alternate") {
  Recalibrator rec(10, 3);
  CHECK_THROWS_AS(rec.observe(1), ProtocolError);
  rec.step(0.2);
  CHECK_THROWS_AS(rec.step(0.3), ProtocolError);
  CHECK_THROWS_AS(rec.snapshot(), ProtocolError);
  CHECK_THROWS_AS(rec.observe(3), DomainError);
  rec.observe(0);
  CHECK_THROWS_AS(rec.observe(0), ProtocolError);
  CHECK_THROWS_AS(rec.pending_distribution(), ProtocolError);
  CHECK_THROWS_AS(rec.step(1.5), DomainError);
  CHECK_FALSE(rec.has_pending());
}

TEST_CASE("routing counts are conserved") {
  Recalibrator rec(10, 11);
  Rng rng(12);
  for (int t = 1; t <= 2000; ++t) {
    auto [p, y] = mixed_round(rng);
    rec.step(p);
    rec.observe(y);
    std::uint64_t total = 0;
    for (auto c : rec.routing_counts()) total += c;
    REQUIRE(total == static_cast<std::uint64_t>(t));
  }
}

TEST_CASE("each bucket evolves exactly like a standalone calibrator on its subsequence") {
  const std::uint64_t seed = 2718;
  Recalibrator rec(10, seed);
  std::vector<std::vector<TranscriptRecord>> per_bucket(10);
  rec.set_transcript_sink([&](const TranscriptRecord& r) { per_bucket[*r.bucket].push_back(r); });
  Rng rng(77);
  drive(rec, 20'000, [&](auto) { return mixed_round(rng); });

  for (const auto& [bucket, inst] : rec.instances()) {
    CalibratorState alone(ProbabilityGrid(10));
    Rng sampler(derive_seed(seed, bucket));
    for (const auto& r : per_bucket[bucket]) {
      auto dist = alone.forecast_distribution();
      auto i = sample_forecast(dist, sampler);
      REQUIRE(i == r.sampled);
      alone.update(dist, i, r.y);
    }
    CHECK(alone == inst.state);
    CHECK(sampler == inst.rng);
  }
}

TEST_CASE("snapshot round trip is byte-identical") {
  Recalibrator fresh(10, 9);
  auto fresh_text = fresh.snapshot();
  CHECK(Recalibrator::restore(fresh_text).instances().empty());
  CHECK(Recalibrator::restore(fresh_text).snapshot() == fresh_text);

  Recalibrator rec(10, 9);
  Rng rng(10);
  drive(rec, 3000, [&](auto) { return mixed_round(rng); });
  const auto text = rec.snapshot();
  CHECK(Recalibrator::restore(text).snapshot() == text);
}

TEST_CASE("snapshot rejects foreign or damaged input") {
  CHECK_THROWS_AS(Recalibrator::restore("{}"), ParseError);
  CHECK_THROWS_AS(Recalibrator::restore("not json"), ParseError);
  Recalibrator rec(4, 1);
  auto text = rec.snapshot();
  auto bad = text;
  bad.replace(bad.find("\"version\": 1"), 12, "\"version\": 9");
  CHECK_THROWS_AS(Recalibrator::restore(bad), ParseError);
}

TEST_CASE("restoring mid-stream and replaying the suffix matches the unsplit run") {
  std::vector<std::pair<double, int>> stream;
  Rng rng(31);
  for (int t = 0; t < 10'000; ++t) stream.push_back(mixed_round(rng));

  Recalibrator whole(10, 5);
  drive(whole, stream.size(), [&](auto t) { return stream[t - 1]; });

  Recalibrator first(10, 5);
  drive(first, 5000, [&](auto t) { return stream[t - 1]; });
  Recalibrator second = Recalibrator::restore(first.snapshot());
  drive(second, 5000, [&](auto t) { return stream[5000 + t - 1]; });

  CHECK(calibration_error(second.expected_ledger()) == calibration_error(whole.expected_ledger()));
  CHECK(calibration_error(second.sampled_ledger()) == calibration_error(whole.sampled_ledger()));
  CHECK(second.snapshot() == whole.snapshot());
}

TEST_CASE("decomposition with a single bucket is exact") {
  Recalibrator rec(10, 1);
  Rng rng(2);
  drive(rec, 3000, [&](auto) {
    return std::pair{0.55, std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.7 ? 1 : 0};
  });
  auto d = per_bucket_decomposition(rec);
  REQUIRE_FALSE(d.rows.empty());
  for (const auto& row : d.rows) {
    CHECK(row.bucket == 5);
    CHECK(row.routed == 3000);
    CHECK(row.aggregate == row.instance_term);
  }
  for (const auto& t : d.targets) CHECK(t.aggregate == doctest::Approx(t.weighted_sum).epsilon(1e-15));
}

TEST_CASE("decomposition is tight when buckets share conditional frequencies") {
  // In expected-update mode a bucket's distributions depend only on its
  // outcome history, so two buckets fed the same outcomes play identically.
  Recalibrator rec(10, 1);
  Rng rng(3);
  std::vector<int> ys;
  for (int k = 0; k < 2000; ++k) ys.push_back(std::uniform_real_distribution<double>(0.0, 1.0)(rng) < 0.4);
  for (int y : ys) {
    rec.step(0.15);
    rec.observe(y);
    rec.step(0.85);
    rec.observe(y);
  }
  auto d = per_bucket_decomposition(rec);
  for (const auto& t : d.targets) CHECK(std::abs(t.aggregate - t.weighted_sum) <= 1e-12);
}

TEST_CASE("decomposition is strict when bucket frequencies differ") {
  Recalibrator rec(10, 1);
  for (int k = 0; k < 500; ++k) {
    rec.step(0.05);
    rec.observe(0);
    rec.step(0.95);
    rec.observe(1);
  }
  auto d = per_bucket_decomposition(rec);
  // Both buckets cold-start at 0.5 with opposite outcomes.
  const auto& mid = d.targets[5];
  CHECK(mid.aggregate < mid.weighted_sum);
  bool any_strict = false;
  for (const auto& t : d.targets) {
    CHECK(t.aggregate <= t.weighted_sum + 1e-9);
    any_strict = any_strict || t.aggregate < t.weighted_sum - 1e-6;
  }
  CHECK(any_strict);
  CHECK_THROWS_AS(per_bucket_decomposition(Recalibrator(10, 1)), EmptyStateError);
}

TEST_CASE("Jensen decomposition holds on random streams") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Recalibrator rec(4 + seed, seed);
    Rng rng(seed * 13);
    drive(rec, 4000, [&](auto) { return mixed_round(rng); });
    auto d = per_bucket_decomposition(rec);
    double total = 0.0;
    for (const auto& t : d.targets) {
      CHECK(t.aggregate <= t.weighted_sum + 1e-9);
      total += t.aggregate;
    }
    CHECK(total == doctest::Approx(calibration_error(rec.expected_ledger())).epsilon(1e-9));
  }
}

TEST_CASE("recalibrated loss stays within 1/n plus measured slack of the raw loss") {
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    Recalibrator rec(10, seed);
    Rng rng(seed + 100);
    drive(rec, 30'000, [&](auto) { return mixed_round(rng); });
    double slack = 0.0;
    for (const auto& [bucket, inst] : rec.instances()) {
      slack += static_cast<double>(inst.state.steps()) / rec.steps() * inst.state.external_regret(bucket);
    }
    CHECK(l2_regret(rec.sampled_ledger()) < 0.1 + slack);
    CHECK(l2_regret(rec.expected_ledger()) < 0.1 + slack);
  }
}

TEST_CASE("sampled-update mode also calibrates") {
  Recalibrator rec(10, 4, Recalibrator::Options{UpdateMode::kSampled, {}});
  Rng rng(4);
  drive(rec, 30'000, [&](auto) { return mixed_round(rng); });
  CHECK(calibration_error(rec.sampled_ledger()) <= 0.01);
  for (const auto& [bucket, inst] : rec.instances()) {
    CHECK(inst.state.expected_point_mass_gap() == 0.0);
  }
  auto restored = Recalibrator::restore(rec.snapshot());
  CHECK(restored.options().update_mode == UpdateMode::kSampled);
}
