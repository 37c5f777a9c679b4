#include "recal/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "recal/errors.hpp"

namespace recal {

using nlohmann::json;

void validate(const ExperimentConfig& config) {
  if (config.n < 1) throw ConfigError("n must be at least 1");
  if (config.horizon && *config.horizon < 1) throw ConfigError("T must be at least 1");
  if (config.generator.has_value() == config.input.has_value()) {
    throw ConfigError("exactly one of a generator or an input stream is required");
  }
  if (config.generator) {
    if (!config.horizon) throw ConfigError("T is required with a generator");
    const bool experts = reveals_experts(config.generator->kind);
    if (config.mode == Mode::kForecastStream) {
      throw ConfigError("forecast-stream mode reads an input file, not a generator");
    }
    if (experts != (config.mode == Mode::kMultiExpert)) {
      throw ConfigError("generator " + to_string(*config.generator) + " does not fit mode " +
                        to_string(config.mode));
    }
  }
}

namespace {

template <class E>
[[noreturn]] void rethrow_at(std::uint64_t round, const E& e) {
  throw E("round " + std::to_string(round) + ": " + e.what());
}

// Forecasting side of the protocol: whatever turns revealed values into p_raw.
class RawForecaster {
 public:
  RawForecaster(Mode mode, LogisticOptions options) : mode_(mode), options_(options) {}

  double predict(const std::vector<double>& revealed) {
    switch (mode_) {
      case Mode::kCovariate:
        if (!logistic_) logistic_.emplace(revealed.size(), options_);
        return logistic_->predict(revealed);
      case Mode::kForecastStream:
        if (revealed.size() != 1) throw DomainError("forecast-stream rounds carry one forecast");
        return revealed[0];
      case Mode::kMultiExpert:
        if (!aggregator_) aggregator_.emplace(revealed.size());
        return aggregator_->aggregate(revealed);
    }
    return 0.5;
  }

  void learn(const std::vector<double>& revealed, int y) {
    if (logistic_) logistic_->learn(revealed, y);
    if (aggregator_) aggregator_->update(revealed, y);
  }

  const ExpertAggregator* aggregator() const { return aggregator_ ? &*aggregator_ : nullptr; }

 private:
  Mode mode_;
  LogisticOptions options_;
  std::optional<LogisticForecaster> logistic_;
  std::optional<ExpertAggregator> aggregator_;
};

void play_round(std::uint64_t t, std::vector<double> revealed, RawForecaster& forecaster,
                Recalibrator& rec, RoundSource& source, const RunHooks& hooks) {
  const double raw = forecaster.predict(revealed);
  const double emitted = rec.step(raw);
  const int y = source.outcome({rec.pending_expected_forecast(), emitted});
  forecaster.learn(revealed, y);
  rec.observe(y);
  if (hooks.on_round) hooks.on_round(RoundRecord{t, std::move(revealed), raw, emitted, y});
  if (hooks.after_round) hooks.after_round(rec);
}

// Plays rounds until the horizon or the end of the source.
void drive(const ExperimentConfig& config, Recalibrator& rec, RoundSource& source,
           RawForecaster& forecaster, const RunHooks& hooks) {
  std::uint64_t t = rec.steps();
  while (!config.horizon || t < *config.horizon) {
    const std::uint64_t round = t + 1;
    try {
      auto revealed = source.reveal(round);
      if (!revealed) {
        if (config.horizon) {
          throw ParseError("stream ended after " + std::to_string(t) + " rounds but T = " +
                           std::to_string(*config.horizon));
        }
        break;
      }
      play_round(round, std::move(*revealed), forecaster, rec, source, hooks);
    } catch (const ProtocolError& e) {
      rethrow_at(round, e);
    } catch (const DomainError& e) {
      rethrow_at(round, e);
    } catch (const FixedPointError& e) {
      throw Error("round " + std::to_string(round) + ": " + e.what());
    } catch (const ParseError& e) {
      throw ParseError("round " + std::to_string(round) + ": " + e.what(), e.line());
    }
    t = round;
  }
  if (rec.steps() == 0) throw ConfigError("the data source produced no rounds (T must be >= 1)");
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

}  // namespace

Report run_experiment(const ExperimentConfig& config, const RunHooks& hooks) {
  validate(config);
  const auto start = std::chrono::steady_clock::now();
  std::unique_ptr<RoundSource> source;
  if (config.generator) {
    source = make_nature(*config.generator, derive_seed(config.seed, kNatureStream));
  } else {
    source = std::make_unique<StreamSource>(*config.input, config.mode);
  }
  Recalibrator rec(config.n, config.seed, Recalibrator::Options{config.update_mode, {}});
  if (hooks.transcript) rec.set_transcript_sink(hooks.transcript);
  RawForecaster forecaster(config.mode, config.forecaster);
  drive(config, rec, *source, forecaster, hooks);
  Report report = make_report(config, rec, forecaster.aggregator());
  report.wall_clock_seconds = seconds_since(start);
  return report;
}

Report replay_experiment(const std::string& snapshot_text, const std::string& stream_path,
                         const RunHooks& hooks) {
  const auto start = std::chrono::steady_clock::now();
  Recalibrator rec = Recalibrator::restore(snapshot_text);
  if (hooks.transcript) rec.set_transcript_sink(hooks.transcript);

  ExperimentConfig config;
  config.mode = Mode::kForecastStream;
  config.input = stream_path;
  config.n = rec.grid().resolution();
  config.seed = rec.seed();
  config.update_mode = rec.options().update_mode;

  StreamSource source(stream_path, config.mode);
  for (std::uint64_t t = 1; t <= rec.steps(); ++t) {
    if (!source.reveal(t)) {
      throw ParseError("stream has fewer rounds than the snapshot has seen (" +
                       std::to_string(rec.steps()) + ")");
    }
  }
  RawForecaster forecaster(config.mode, config.forecaster);
  drive(config, rec, source, forecaster, hooks);
  Report report = make_report(config, rec, nullptr);
  report.wall_clock_seconds = seconds_since(start);
  return report;
}

Report make_report(const ExperimentConfig& config, const Recalibrator& rec,
                   const ExpertAggregator* aggregator) {
  Report r;
  r.config = config;
  r.steps = rec.steps();
  const auto& expected = rec.expected_ledger();
  const auto& sampled = rec.sampled_ledger();
  r.calibration_expected = calibration_error(expected);
  r.calibration_sampled = calibration_error(sampled);
  r.calibration_raw = calibration_error(rec.raw_ledger());
  r.l2_regret = l2_regret(sampled);
  r.l2_regret_expected = l2_regret(expected);
  const double total = static_cast<double>(r.steps);
  r.mean_loss_emitted = sampled.loss_emitted() / total;
  r.mean_loss_raw = sampled.loss_raw() / total;

  r.max_internal_regret = -std::numeric_limits<double>::infinity();
  for (const auto& [bucket, inst] : rec.instances()) {
    InstanceSummary s;
    s.bucket = bucket;
    s.routed = inst.state.steps();
    s.internal_regret = inst.state.internal_regret();
    s.swap_regret_sum = inst.state.swap_regret_sum();
    s.nominal_external_regret = inst.state.external_regret(bucket);
    s.point_mass_gap = inst.state.expected_point_mass_gap();
    r.max_internal_regret = std::max(r.max_internal_regret, s.internal_regret);
    r.regret_slack += static_cast<double>(s.routed) / total * s.nominal_external_regret;
    r.instances.push_back(s);
  }
  r.decomposition = per_bucket_decomposition(rec).rows;

  if (aggregator && aggregator->steps() > 0) {
    ExpertSummary e;
    e.expert_losses = aggregator->expert_losses();
    e.aggregator_regrets = aggregator->external_regrets();
    e.aggregator_loss = aggregator->aggregate_loss();
    e.best_expert_loss = *std::min_element(e.expert_losses.begin(), e.expert_losses.end());
    for (double loss : e.expert_losses) e.recalibrated_regrets.push_back(r.mean_loss_emitted - loss);
    e.final_weights = aggregator->weights();
    r.experts = std::move(e);
  }

  double weight_total = 0.0;
  for (double w : expected.weight()) weight_total += w;
  for (GridIndex i = 0; i < rec.grid().size(); ++i) {
    auto frequency = rho(expected, i);
    if (!frequency) continue;
    r.reliability.push_back({rec.grid().point(i), *frequency, expected.weight()[i] / weight_total,
                             static_cast<std::uint64_t>(sampled.weight()[i])});
  }
  return r;
}

json to_json(const ExperimentConfig& c) {
  return json{{"mode", to_string(c.mode)},
              {"generator", c.generator ? json(to_string(*c.generator)) : json(nullptr)},
              {"input", c.input ? json(*c.input) : json(nullptr)},
              {"n", c.n},
              {"T", c.horizon ? json(*c.horizon) : json(nullptr)},
              {"seed", c.seed},
              {"forecaster",
               {{"rule", to_string(c.forecaster.rule)},
                {"eta", c.forecaster.eta},
                {"delta", c.forecaster.delta}}},
              {"update_mode", to_string(c.update_mode)}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  c.mode = parse_mode(j.at("mode").get<std::string>());
  if (!j.at("generator").is_null()) c.generator = parse_nature_spec(j["generator"].get<std::string>());
  if (!j.at("input").is_null()) c.input = j["input"].get<std::string>();
  c.n = j.at("n").get<std::size_t>();
  if (!j.at("T").is_null()) c.horizon = j["T"].get<std::uint64_t>();
  c.seed = j.at("seed").get<std::uint64_t>();
  const json& f = j.at("forecaster");
  c.forecaster.rule = parse_step_rule(f.at("rule").get<std::string>());
  c.forecaster.eta = f.at("eta").get<double>();
  c.forecaster.delta = f.at("delta").get<double>();
  c.update_mode = parse_update_mode(j.at("update_mode").get<std::string>());
  return c;
}

json to_json(const Report& r) {
  json instances = json::array();
  for (const auto& s : r.instances) {
    instances.push_back({{"bucket", s.bucket},
                         {"routed", s.routed},
                         {"internal_regret", s.internal_regret},
                         {"swap_regret_sum", s.swap_regret_sum},
                         {"nominal_external_regret", s.nominal_external_regret},
                         {"point_mass_gap", s.point_mass_gap}});
  }
  json decomposition = json::array();
  for (const auto& d : r.decomposition) {
    decomposition.push_back({{"bucket", d.bucket},
                             {"target", d.target},
                             {"instance_term", d.instance_term},
                             {"aggregate", d.aggregate},
                             {"routed", d.routed}});
  }
  json reliability = json::array();
  for (const auto& row : r.reliability) {
    reliability.push_back({{"grid_value", row.grid_value},
                           {"rho", row.rho},
                           {"weight_share", row.weight_share},
                           {"count", row.count}});
  }
  json experts = nullptr;
  if (r.experts) {
    experts = {{"expert_losses", r.experts->expert_losses},
               {"aggregator_regrets", r.experts->aggregator_regrets},
               {"recalibrated_regrets", r.experts->recalibrated_regrets},
               {"aggregator_loss", r.experts->aggregator_loss},
               {"best_expert_loss", r.experts->best_expert_loss},
               {"final_weights", r.experts->final_weights}};
  }
  return json{{"schema_version", r.schema_version},
              {"config", to_json(r.config)},
              {"steps", r.steps},
              {"calibration_expected", r.calibration_expected},
              {"calibration_sampled", r.calibration_sampled},
              {"calibration_raw", r.calibration_raw},
              {"l2_regret", r.l2_regret},
              {"l2_regret_expected", r.l2_regret_expected},
              {"mean_loss_emitted", r.mean_loss_emitted},
              {"mean_loss_raw", r.mean_loss_raw},
              {"max_internal_regret", r.max_internal_regret},
              {"regret_slack", r.regret_slack},
              {"instances", std::move(instances)},
              {"decomposition", std::move(decomposition)},
              {"experts", std::move(experts)},
              {"reliability", std::move(reliability)},
              {"wall_clock_seconds", r.wall_clock_seconds}};
}

Report report_from_json(const json& j) {
  try {
    Report r;
    r.schema_version = j.at("schema_version").get<int>();
    if (r.schema_version != kReportSchemaVersion) throw ParseError("unsupported report schema");
    r.config = config_from_json(j.at("config"));
    r.steps = j.at("steps").get<std::uint64_t>();
    r.calibration_expected = j.at("calibration_expected").get<double>();
    r.calibration_sampled = j.at("calibration_sampled").get<double>();
    r.calibration_raw = j.at("calibration_raw").get<double>();
    r.l2_regret = j.at("l2_regret").get<double>();
    r.l2_regret_expected = j.at("l2_regret_expected").get<double>();
    r.mean_loss_emitted = j.at("mean_loss_emitted").get<double>();
    r.mean_loss_raw = j.at("mean_loss_raw").get<double>();
    r.max_internal_regret = j.at("max_internal_regret").get<double>();
    r.regret_slack = j.at("regret_slack").get<double>();
    for (const auto& s : j.at("instances")) {
      r.instances.push_back({s.at("bucket").get<std::size_t>(), s.at("routed").get<std::uint64_t>(),
                             s.at("internal_regret").get<double>(),
                             s.at("swap_regret_sum").get<double>(),
                             s.at("nominal_external_regret").get<double>(),
                             s.at("point_mass_gap").get<double>()});
    }
    for (const auto& d : j.at("decomposition")) {
      r.decomposition.push_back({d.at("bucket").get<std::size_t>(), d.at("target").get<GridIndex>(),
                                 d.at("instance_term").get<double>(), d.at("aggregate").get<double>(),
                                 d.at("routed").get<std::uint64_t>()});
    }
    if (!j.at("experts").is_null()) {
      const json& e = j["experts"];
      r.experts = ExpertSummary{e.at("expert_losses").get<std::vector<double>>(),
                                e.at("aggregator_regrets").get<std::vector<double>>(),
                                e.at("recalibrated_regrets").get<std::vector<double>>(),
                                e.at("aggregator_loss").get<double>(),
                                e.at("best_expert_loss").get<double>(),
                                e.at("final_weights").get<std::vector<double>>()};
    }
    for (const auto& row : j.at("reliability")) {
      r.reliability.push_back({row.at("grid_value").get<double>(), row.at("rho").get<double>(),
                               row.at("weight_share").get<double>(),
                               row.at("count").get<std::uint64_t>()});
    }
    r.wall_clock_seconds = j.at("wall_clock_seconds").get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
}

std::string csv_path_for(const std::string& report_path) {
  const auto slash = report_path.find_last_of('/');
  const auto dot = report_path.find_last_of('.');
  if (dot != std::string::npos && (slash == std::string::npos || dot > slash)) {
    return report_path.substr(0, dot) + ".csv";
  }
  return report_path + ".csv";
}

std::string reliability_csv(const Report& report) {
  std::string out = "grid_value,rho,weight_share,count\n";
  char buf[128];
  for (const auto& row : report.reliability) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g,%llu\n", row.grid_value, row.rho,
                  row.weight_share, static_cast<unsigned long long>(row.count));
    out += buf;
  }
  return out;
}

std::string emit_report(const Report& report, const std::string& path) {
  std::ofstream json_out(path);
  if (!json_out) throw Error("cannot write report '" + path + "'");
  json_out << to_json(report).dump(2) << '\n';
  const std::string csv = csv_path_for(path);
  std::ofstream csv_out(csv);
  if (!csv_out) throw Error("cannot write reliability CSV '" + csv + "'");
  csv_out << reliability_csv(report);
  if (!json_out.good() || !csv_out.good()) throw Error("write failure for report '" + path + "'");
  return csv;
}

}  // namespace recal
