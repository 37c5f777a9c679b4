#include "recal/transcript.hpp"

#include <istream>
#include <ostream>

#include <json.hpp>

#include "recal/errors.hpp"

namespace recal {

using nlohmann::json;

std::string to_line(const TranscriptRecord& record) {
  json j;
  j["t"] = record.t;
  j["w"] = record.distribution;
  j["i"] = record.sampled;
  j["y"] = record.y;
  if (record.bucket) j["bucket"] = *record.bucket;
  if (record.raw) j["p"] = *record.raw;
  return j.dump();
}

TranscriptRecord parse_transcript_line(const std::string& line, std::size_t line_number) {
  try {
    json j = json::parse(line);
    TranscriptRecord r;
    r.t = j.at("t").get<std::uint64_t>();
    r.distribution = j.at("w").get<std::vector<double>>();
    r.sampled = j.at("i").get<GridIndex>();
    r.y = j.at("y").get<int>();
    if (j.contains("bucket")) r.bucket = j["bucket"].get<std::size_t>();
    if (j.contains("p")) r.raw = j["p"].get<double>();
    return r;
  } catch (const json::exception& e) {
    throw ParseError(e.what(), line_number);
  }
}

void write_transcript(std::ostream& out, const std::vector<TranscriptRecord>& records) {
  for (const auto& r : records) out << to_line(r) << '\n';
}

std::vector<TranscriptRecord> read_transcript(std::istream& in) {
  std::vector<TranscriptRecord> records;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    records.push_back(parse_transcript_line(line, number));
  }
  return records;
}

}  // namespace recal
