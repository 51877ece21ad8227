#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "polymeasure/geom.hpp"

namespace polymeasure::io {

// One image's metadata plus its polyline annotations and optional
// shoulder/border point lists. Document schema:
//   {"image": {"id", "width", "height"},
//    "annotations": [{"class": "villi"|"crypt", "points": [[x,y],...],
//                     "confidence": optional}],
//    "shoulder": [[x,y],...],   // optional
//    "border":   [[x,y],...]}   // optional
// A file holds either one such document or one per line (JSON lines).
struct ImageRecord {
  std::string id;
  int width = 0;
  int height = 0;
  std::vector<geom::Polylined> annotations;
  std::optional<geom::PointMatrixd> shoulder;
  std::optional<geom::PointMatrixd> border;
};

class ParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ParseResult {
  std::vector<ImageRecord> records;
  std::vector<std::string> warnings;
};

// Throws ParseError naming the record index and field path on malformed
// input. Unknown fields are ignored with a warning; out-of-bounds points
// are clamped with a warning.
ParseResult parse_records(const std::filesystem::path& path);
ParseResult parse_records_text(const std::string& text,
                               const std::string& origin);

std::string record_to_json_string(const ImageRecord& record);
std::string records_to_jsonl(const std::vector<ImageRecord>& records);
void write_records(const std::filesystem::path& path,
                   const std::vector<ImageRecord>& records);

}  // namespace polymeasure::io
