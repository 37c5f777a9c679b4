// recal: run online recalibration experiments, generate stream files, and
// replay snapshots.
//
//   recal run --generator miscalibrated-link --n 10 --T 100000 --seed 7 --out r.json
//   recal gen --generator sign-flip-adversary --T 1000 --seed 7 --out s.jsonl
//   recal replay --snapshot snap.json --input s.jsonl --out r.json

#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "recal/errors.hpp"
#include "recal/experiment.hpp"

namespace {

struct CommonFlags {
  std::string mode = "covariate";
  std::string generator;
  std::string input;
  std::size_t n = 10;
  std::uint64_t horizon = 0;
  std::uint64_t seed = 0;
  std::string update_mode = "expected";
  std::string rule = "fixed";
  double eta = recal::LogisticOptions{}.eta;
  double delta = recal::LogisticOptions{}.delta;
  std::string out;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool seed_required) {
  cmd->add_option("--mode", f.mode, "covariate | forecast-stream | multi-expert")
      ->capture_default_str();
  cmd->add_option("--generator", f.generator, "kind[:params], e.g. iid-bernoulli:0.3");
  cmd->add_option("--input", f.input, "line-delimited JSON stream file");
  cmd->add_option("--n", f.n, "grid resolution and bucket count")->capture_default_str();
  cmd->add_option("--T", f.horizon, "number of protocol rounds");
  auto* seed = cmd->add_option("--seed", f.seed, "64-bit master seed");
  if (seed_required) seed->required();
  cmd->add_option("--update-mode", f.update_mode, "expected | sampled")->capture_default_str();
  cmd->add_option("--forecaster-rule", f.rule, "fixed | adaptive")->capture_default_str();
  cmd->add_option("--eta", f.eta, "forecaster step size")->capture_default_str();
  cmd->add_option("--delta", f.delta, "adaptive-rule stabilizer")->capture_default_str();
}

recal::ExperimentConfig to_config(const CommonFlags& f) {
  recal::ExperimentConfig c;
  c.mode = recal::parse_mode(f.mode);
  if (!f.generator.empty()) c.generator = recal::parse_nature_spec(f.generator);
  if (!f.input.empty()) c.input = f.input;
  c.n = f.n;
  if (f.horizon > 0) c.horizon = f.horizon;
  c.seed = f.seed;
  c.update_mode = recal::parse_update_mode(f.update_mode);
  c.forecaster.rule = recal::parse_step_rule(f.rule);
  c.forecaster.eta = f.eta;
  c.forecaster.delta = f.delta;
  return c;
}

void write_or_print(const recal::Report& report, const std::string& out) {
  if (out.empty()) {
    std::cout << recal::to_json(report).dump(2) << '\n';
    return;
  }
  const std::string csv = recal::emit_report(report, out);
  std::cerr << "wrote " << out << " and " << csv << '\n';
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw recal::Error("cannot write '" + path + "'");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Online recalibration of probability forecasts"};
  app.require_subcommand(1);

  CommonFlags run_flags;
  std::string transcript_path;
  std::string snapshot_out;
  std::uint64_t snapshot_at = 0;
  auto* run = app.add_subcommand("run", "run one experiment and emit its report");
  add_common(run, run_flags, true);
  run->add_option("--out", run_flags.out, "report path (JSON); CSV is written alongside");
  run->add_option("--transcript", transcript_path, "write a per-round transcript (JSON lines)");
  run->add_option("--snapshot-out", snapshot_out, "write a recalibrator snapshot");
  run->add_option("--snapshot-at", snapshot_at, "round after which to snapshot (default: end)");

  CommonFlags gen_flags;
  bool as_forecasts = false;
  auto* gen = app.add_subcommand("gen", "play a generator and write its rounds as a stream file");
  add_common(gen, gen_flags, true);
  gen->add_option("--out", gen_flags.out, "stream file to write")->required();
  gen->add_flag("--as-forecasts", as_forecasts,
                "write the raw forecasts ({p, y}) instead of the revealed values");

  std::string replay_snapshot;
  std::string replay_input;
  std::string replay_out;
  auto* replay = app.add_subcommand("replay", "restore a snapshot and continue over a stream");
  replay->add_option("--snapshot", replay_snapshot, "snapshot file")->required();
  replay->add_option("--input", replay_input, "forecast-stream file covering the whole run")
      ->required();
  replay->add_option("--out", replay_out, "report path (JSON)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      recal::ExperimentConfig config = to_config(run_flags);
      recal::RunHooks hooks;
      std::ofstream transcript;
      if (!transcript_path.empty()) {
        transcript = open_output(transcript_path);
        hooks.transcript = [&transcript](const recal::TranscriptRecord& r) {
          transcript << recal::to_line(r) << '\n';
        };
      }
      std::string snapshot_text;
      if (!snapshot_out.empty()) {
        hooks.after_round = [&](const recal::Recalibrator& rec) {
          if (snapshot_at == 0 || rec.steps() <= snapshot_at) snapshot_text = rec.snapshot();
        };
      }
      recal::Report report = recal::run_experiment(config, hooks);
      if (!snapshot_out.empty()) open_output(snapshot_out) << snapshot_text << '\n';
      write_or_print(report, run_flags.out);
    } else if (*gen) {
      recal::ExperimentConfig config = to_config(gen_flags);
      std::ofstream out = open_output(gen_flags.out);
      const recal::Mode format = as_forecasts ? recal::Mode::kForecastStream : config.mode;
      recal::RunHooks hooks;
      hooks.on_round = [&](const recal::RoundRecord& r) {
        recal::StreamRound round{as_forecasts ? std::vector<double>{r.raw} : r.revealed, r.y};
        out << recal::format_stream_round(round, format) << '\n';
      };
      recal::run_experiment(config, hooks);
      if (!out.good()) throw recal::Error("write failure for '" + gen_flags.out + "'");
    } else if (*replay) {
      std::ifstream in(replay_snapshot);
      if (!in) throw recal::Error("cannot open snapshot '" + replay_snapshot + "'");
      std::stringstream text;
      text << in.rdbuf();
      write_or_print(recal::replay_experiment(text.str(), replay_input), replay_out);
    }
  } catch (const std::exception& e) {
    std::cerr << "recal: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
