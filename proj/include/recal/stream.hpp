#pragma once

#include <cstdint>
#include <fstream>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "recal/nature.hpp"

namespace recal {

enum class Mode { kCovariate, kForecastStream, kMultiExpert };

std::string to_string(Mode mode);
Mode parse_mode(std::string_view text);

// One line of a stream file. values holds the covariates x, the single raw
// forecast p, or the K expert forecasts, depending on the mode.
struct StreamRound {
  std::vector<double> values;
  int y = 0;
  bool operator==(const StreamRound&) const = default;
};

// Line-delimited JSON:
//   covariate        {"x": [x1, ..., xd], "y": 0|1}
//   forecast-stream  {"p": p, "y": 0|1}
//   multi-expert     {"p": [p1, ..., pK], "y": 0|1}
// Blank lines are skipped. Every round must have the width of the first.
class StreamReader {
 public:
  StreamReader(std::istream& in, Mode mode);

  // Throws ParseError naming the line on malformed input.
  std::optional<StreamRound> next();
  std::size_t line() const noexcept { return line_; }

 private:
  std::istream& in_;
  Mode mode_;
  std::size_t line_ = 0;
  std::optional<std::size_t> width_;
};

StreamRound parse_stream_line(const std::string& line, Mode mode, std::size_t line_number);
std::string format_stream_round(const StreamRound& round, Mode mode);

std::vector<StreamRound> ingest_stream(const std::string& path, Mode mode);

// Replays a stream file as protocol rounds; the outcome of each round is the
// one stored on its line.
class StreamSource : public RoundSource {
 public:
  StreamSource(const std::string& path, Mode mode);

  std::optional<std::vector<double>> reveal(std::uint64_t t) override;
  int outcome(const OutcomeContext& context) override;

 private:
  std::ifstream file_;
  StreamReader reader_;
  int pending_y_ = 0;
};

}  // namespace recal
