#include "recal/recalibrator.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "recal/errors.hpp"

namespace recal {

using nlohmann::json;

namespace {

constexpr int kSnapshotVersion = 1;
constexpr const char* kSnapshotSchema = "recal.snapshot";

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::string rng_state(const Rng& rng) {
  std::ostringstream out;
  out << rng;
  return out.str();
}

Rng parse_rng(const std::string& text) {
  Rng rng;
  std::istringstream in(text);
  in >> rng;
  if (in.fail()) throw ParseError("invalid sampler state in snapshot");
  return rng;
}

json ledger_to_json(const CalibrationLedger& l) {
  return json{{"weight", l.weight()},
              {"outcome_weight", l.outcome_weight()},
              {"steps", l.steps()},
              {"loss_emitted", l.loss_emitted()},
              {"loss_raw", l.loss_raw()}};
}

CalibrationLedger ledger_from_json(const ProbabilityGrid& grid, const json& j) {
  return CalibrationLedger::from_parts(
      grid, j.at("weight").get<std::vector<double>>(),
      j.at("outcome_weight").get<std::vector<double>>(), j.at("steps").get<std::uint64_t>(),
      j.at("loss_emitted").get<double>(), j.at("loss_raw").get<double>());
}

}  // namespace

std::string to_string(UpdateMode mode) {
  return mode == UpdateMode::kExpected ? "expected" : "sampled";
}

UpdateMode parse_update_mode(std::string_view text) {
  if (text == "expected") return UpdateMode::kExpected;
  if (text == "sampled") return UpdateMode::kSampled;
  throw ConfigError("unknown update mode '" + std::string(text) + "'");
}

std::size_t bucket_index(double p_raw, std::size_t n) {
  if (n == 0) throw DomainError("bucket count must be at least 1");
  if (!(p_raw >= 0.0 && p_raw <= 1.0)) {
    throw DomainError("raw forecast " + std::to_string(p_raw) + " outside [0,1]");
  }
  auto j = static_cast<std::size_t>(std::floor(static_cast<double>(n) * p_raw));
  return j >= n ? n - 1 : j;
}

std::uint64_t derive_seed(std::uint64_t master, std::uint64_t stream) {
  return splitmix64(master ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

Recalibrator::Recalibrator(std::size_t n, std::uint64_t seed)
    : Recalibrator(n, seed, Options{}) {}

Recalibrator::Recalibrator(std::size_t n, std::uint64_t seed, Options options)
    : grid_(n),
      seed_(seed),
      options_(options),
      routing_counts_(n, 0),
      expected_(grid_),
      sampled_(grid_),
      raw_(grid_) {}

BucketInstance& Recalibrator::instance_for(std::size_t bucket) {
  auto it = instances_.find(bucket);
  if (it == instances_.end()) {
    it = instances_.emplace(bucket, BucketInstance{CalibratorState(grid_), Rng(derive_seed(seed_, bucket))})
             .first;
  }
  return it->second;
}

const CalibratorState* Recalibrator::instance(std::size_t bucket) const {
  auto it = instances_.find(bucket);
  return it == instances_.end() ? nullptr : &it->second.state;
}

double Recalibrator::step(double p_raw) {
  if (pending_) throw ProtocolError("step called while a step is awaiting its outcome");
  const std::size_t bucket = bucket_index(p_raw, grid_.resolution());
  BucketInstance& inst = instance_for(bucket);
  ForecastDistribution dist = inst.state.forecast_distribution(options_.stationary);
  const GridIndex sampled = sample_forecast(dist, inst.rng);
  pending_ = Pending{bucket, p_raw, std::move(dist), sampled};
  return grid_.point(sampled);
}

const ForecastDistribution& Recalibrator::pending_distribution() const {
  if (!pending_) throw ProtocolError("no step is pending");
  return pending_->distribution;
}

std::size_t Recalibrator::pending_bucket() const {
  if (!pending_) throw ProtocolError("no step is pending");
  return pending_->bucket;
}

double Recalibrator::pending_expected_forecast() const {
  return pending_distribution().mean(grid_);
}

void Recalibrator::observe(int y) {
  if (!pending_) throw ProtocolError("observe called without a pending step");
  check_outcome(y);
  Pending& p = *pending_;
  BucketInstance& inst = instances_.at(p.bucket);
  if (options_.update_mode == UpdateMode::kExpected) {
    inst.state.update(p.distribution, p.sampled, y);
  } else {
    inst.state.update(ForecastDistribution::point_mass(grid_.size(), p.sampled), p.sampled, y);
  }
  expected_.record(p.distribution, y, p.raw);
  sampled_.record(p.sampled, y, p.raw);
  raw_.record(grid_.nearest(p.raw), y, p.raw);
  ++routing_counts_[p.bucket];
  ++steps_;
  if (sink_) {
    auto w = p.distribution.probabilities();
    sink_(TranscriptRecord{steps_, std::vector<double>(w.begin(), w.end()), p.sampled, y,
                           p.bucket, p.raw});
  }
  pending_.reset();
}

std::string Recalibrator::snapshot() const {
  if (pending_) throw ProtocolError("cannot snapshot while a step is pending");
  json instances = json::array();
  for (const auto& [bucket, inst] : instances_) {
    const CalibratorState& s = inst.state;
    instances.push_back(json{{"bucket", bucket},
                             {"steps", s.steps()},
                             {"regret", s.regret_matrix()},
                             {"weighted_count", s.weighted_count()},
                             {"weighted_outcome", s.weighted_outcome()},
                             {"sampled_count", s.sampled_count()},
                             {"sampler", rng_state(inst.rng)}});
  }
  json j{{"schema", kSnapshotSchema},
         {"version", kSnapshotVersion},
         {"n", grid_.resolution()},
         {"seed", seed_},
         {"update_mode", to_string(options_.update_mode)},
         {"stationary_tolerance", options_.stationary.tolerance},
         {"stationary_plain_iterations", options_.stationary.plain_iterations},
         {"stationary_max_doublings", options_.stationary.max_doublings},
         {"steps", steps_},
         {"routing_counts", routing_counts_},
         {"instances", std::move(instances)},
         {"ledgers",
          {{"expected", ledger_to_json(expected_)},
           {"sampled", ledger_to_json(sampled_)},
           {"raw", ledger_to_json(raw_)}}}};
  return j.dump(1);
}

Recalibrator Recalibrator::restore(std::string_view text) {
  try {
    json j = json::parse(text);
    if (j.at("schema").get<std::string>() != kSnapshotSchema) {
      throw ParseError("not a recalibrator snapshot");
    }
    if (j.at("version").get<int>() != kSnapshotVersion) {
      throw ParseError("unsupported snapshot version " + j.at("version").dump());
    }
    Options options;
    options.update_mode = parse_update_mode(j.at("update_mode").get<std::string>());
    options.stationary.tolerance = j.at("stationary_tolerance").get<double>();
    options.stationary.plain_iterations =
        j.at("stationary_plain_iterations").get<std::size_t>();
    options.stationary.max_doublings = j.at("stationary_max_doublings").get<std::size_t>();
    Recalibrator rec(j.at("n").get<std::size_t>(), j.at("seed").get<std::uint64_t>(), options);
    rec.steps_ = j.at("steps").get<std::uint64_t>();
    rec.routing_counts_ = j.at("routing_counts").get<std::vector<std::uint64_t>>();
    if (rec.routing_counts_.size() != rec.grid_.resolution()) {
      throw ParseError("routing counts do not match bucket count");
    }
    for (const auto& ji : j.at("instances")) {
      const auto bucket = ji.at("bucket").get<std::size_t>();
      if (bucket >= rec.grid_.resolution()) throw ParseError("bucket index out of range");
      CalibratorState state = CalibratorState::from_parts(
          rec.grid_, ji.at("regret").get<std::vector<double>>(),
          ji.at("weighted_count").get<std::vector<double>>(),
          ji.at("weighted_outcome").get<std::vector<double>>(),
          ji.at("sampled_count").get<std::vector<std::uint64_t>>(),
          ji.at("steps").get<std::uint64_t>());
      rec.instances_.emplace(bucket, BucketInstance{std::move(state),
                                                    parse_rng(ji.at("sampler").get<std::string>())});
    }
    const json& ledgers = j.at("ledgers");
    rec.expected_ = ledger_from_json(rec.grid_, ledgers.at("expected"));
    rec.sampled_ = ledger_from_json(rec.grid_, ledgers.at("sampled"));
    rec.raw_ = ledger_from_json(rec.grid_, ledgers.at("raw"));
    return rec;
  } catch (const json::exception& e) {
    throw ParseError(std::string("snapshot: ") + e.what());
  }
}

}  // namespace recal
