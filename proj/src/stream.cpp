#include "recal/stream.hpp"

#include <cmath>
#include <istream>

#include <json.hpp>

#include "recal/errors.hpp"

namespace recal {

using nlohmann::json;

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kCovariate: return "covariate";
    case Mode::kForecastStream: return "forecast-stream";
    case Mode::kMultiExpert: return "multi-expert";
  }
  return "?";
}

Mode parse_mode(std::string_view text) {
  if (text == "covariate") return Mode::kCovariate;
  if (text == "forecast-stream") return Mode::kForecastStream;
  if (text == "multi-expert") return Mode::kMultiExpert;
  throw ConfigError("unknown mode '" + std::string(text) + "'");
}

namespace {

int parse_outcome(const json& j, std::size_t line) {
  const json& y = j.at("y");
  if (!y.is_number_integer() || (y.get<int>() != 0 && y.get<int>() != 1)) {
    throw ParseError("outcome y must be 0 or 1, got " + y.dump(), line);
  }
  return y.get<int>();
}

void check_probability(double p, std::size_t line) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw ParseError("forecast " + std::to_string(p) + " outside [0,1]", line);
  }
}

}  // namespace

StreamRound parse_stream_line(const std::string& line, Mode mode, std::size_t number) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::exception& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what(), number);
  }
  if (!j.is_object()) throw ParseError("expected a JSON object", number);
  StreamRound round;
  try {
    switch (mode) {
      case Mode::kCovariate:
        round.values = j.at("x").get<std::vector<double>>();
        if (round.values.empty()) throw ParseError("empty covariate vector", number);
        for (double v : round.values) {
          if (!std::isfinite(v)) throw ParseError("non-finite covariate", number);
        }
        break;
      case Mode::kForecastStream:
        if (!j.at("p").is_number()) throw ParseError("p must be a number", number);
        round.values = {j.at("p").get<double>()};
        check_probability(round.values[0], number);
        break;
      case Mode::kMultiExpert:
        round.values = j.at("p").get<std::vector<double>>();
        if (round.values.empty()) throw ParseError("empty expert forecast vector", number);
        for (double v : round.values) check_probability(v, number);
        break;
    }
    round.y = parse_outcome(j, number);
  } catch (const json::exception& e) {
    throw ParseError(e.what(), number);
  }
  return round;
}

std::string format_stream_round(const StreamRound& round, Mode mode) {
  json j;
  switch (mode) {
    case Mode::kCovariate: j["x"] = round.values; break;
    case Mode::kForecastStream: j["p"] = round.values.at(0); break;
    case Mode::kMultiExpert: j["p"] = round.values; break;
  }
  j["y"] = round.y;
  return j.dump();
}

StreamReader::StreamReader(std::istream& in, Mode mode) : in_(in), mode_(mode) {}

std::optional<StreamRound> StreamReader::next() {
  std::string text;
  while (std::getline(in_, text)) {
    ++line_;
    if (text.find_first_not_of(" \t\r") == std::string::npos) continue;
    StreamRound round = parse_stream_line(text, mode_, line_);
    if (!width_) width_ = round.values.size();
    if (round.values.size() != *width_) {
      throw ParseError("round has " + std::to_string(round.values.size()) +
                           " values, expected " + std::to_string(*width_),
                       line_);
    }
    return round;
  }
  if (in_.bad()) throw Error("read failure after line " + std::to_string(line_));
  return std::nullopt;
}

std::vector<StreamRound> ingest_stream(const std::string& path, Mode mode) {
  std::ifstream file(path);
  if (!file) throw Error("cannot open stream file '" + path + "'");
  StreamReader reader(file, mode);
  std::vector<StreamRound> rounds;
  while (auto round = reader.next()) rounds.push_back(std::move(*round));
  return rounds;
}

StreamSource::StreamSource(const std::string& path, Mode mode)
    : file_(path), reader_(file_, mode) {
  if (!file_) throw Error("cannot open stream file '" + path + "'");
}

std::optional<std::vector<double>> StreamSource::reveal(std::uint64_t) {
  auto round = reader_.next();
  if (!round) return std::nullopt;
  pending_y_ = round->y;
  return std::move(round->values);
}

int StreamSource::outcome(const OutcomeContext&) { return pending_y_; }

}  // namespace recal
