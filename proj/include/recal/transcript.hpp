#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "recal/calibrator.hpp"

namespace recal {

// One observed step of a calibrator: the distribution it played, the index
// it sampled, and the outcome. Recalibrator transcripts also carry the bucket
// and the raw forecast that was routed.
struct TranscriptRecord {
  std::uint64_t t = 0;
  std::vector<double> distribution;
  GridIndex sampled = 0;
  int y = 0;
  std::optional<std::size_t> bucket;
  std::optional<double> raw;

  bool operator==(const TranscriptRecord&) const = default;
};

// Line-delimited JSON, one record per line.
std::string to_line(const TranscriptRecord& record);
TranscriptRecord parse_transcript_line(const std::string& line, std::size_t line_number);

void write_transcript(std::ostream& out, const std::vector<TranscriptRecord>& records);
std::vector<TranscriptRecord> read_transcript(std::istream& in);

}  // namespace recal
