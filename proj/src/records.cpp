#include "polymeasure/records.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace polymeasure::io {

namespace {

using nlohmann::ordered_json;

std::string field_path(std::size_t record_index, const std::string& field) {
  return "record " + std::to_string(record_index) + ": " + field;
}

[[noreturn]] void fail(std::size_t record_index, const std::string& field,
                       const std::string& message) {
  throw ParseError(field_path(record_index, field) + ": " + message);
}

double require_number(const ordered_json& j, std::size_t record_index,
                      const std::string& field) {
  if (!j.is_number()) fail(record_index, field, "expected a number");
  return j.get<double>();
}

geom::PointMatrixd parse_points(const ordered_json& j, std::size_t record_index,
                                const std::string& field) {
  if (!j.is_array()) fail(record_index, field, "expected an array of [x,y]");
  geom::PointMatrixd points(static_cast<Eigen::Index>(j.size()), 2);
  Eigen::Index row = 0;
  for (const auto& entry : j) {
    const std::string item = field + "[" + std::to_string(row) + "]";
    if (!entry.is_array() || entry.size() != 2)
      fail(record_index, item, "expected an [x,y] pair");
    points(row, 0) = require_number(entry[0], record_index, item + ".x");
    points(row, 1) = require_number(entry[1], record_index, item + ".y");
    if (!std::isfinite(points(row, 0)) || !std::isfinite(points(row, 1)))
      fail(record_index, item, "coordinates must be finite");
    ++row;
  }
  return points;
}

// Clamp into [0,width] x [0,height]; returns whether anything moved.
bool clamp_points(geom::PointMatrixd& points, int width, int height) {
  bool clamped = false;
  for (Eigen::Index i = 0; i < points.rows(); ++i) {
    const double x = std::clamp(points(i, 0), 0.0, double(width));
    const double y = std::clamp(points(i, 1), 0.0, double(height));
    if (x != points(i, 0) || y != points(i, 1)) clamped = true;
    points(i, 0) = x;
    points(i, 1) = y;
  }
  return clamped;
}

void warn_unknown_fields(const ordered_json& object,
                         std::initializer_list<const char*> known,
                         std::size_t record_index, const std::string& where,
                         std::vector<std::string>& warnings) {
  for (const auto& [key, value] : object.items()) {
    bool found = false;
    for (const char* k : known)
      if (key == k) {
        found = true;
        break;
      }
    if (!found)
      warnings.push_back(field_path(record_index, where) + ": ignoring unknown field '" +
                         key + "'");
  }
}

ImageRecord parse_record(const ordered_json& doc, std::size_t record_index,
                         std::vector<std::string>& warnings) {
  if (!doc.is_object()) fail(record_index, "$", "expected a JSON object");
  warn_unknown_fields(doc, {"image", "annotations", "shoulder", "border"},
                      record_index, "$", warnings);

  if (!doc.contains("image") || !doc["image"].is_object())
    fail(record_index, "image", "missing required object");
  const auto& image = doc["image"];
  warn_unknown_fields(image, {"id", "width", "height"}, record_index, "image",
                      warnings);

  ImageRecord record;
  if (!image.contains("id") || !image["id"].is_string())
    fail(record_index, "image.id", "missing required string");
  record.id = image["id"].get<std::string>();
  if (!image.contains("width") || !image["width"].is_number_integer())
    fail(record_index, "image.width", "missing required integer");
  if (!image.contains("height") || !image["height"].is_number_integer())
    fail(record_index, "image.height", "missing required integer");
  record.width = image["width"].get<int>();
  record.height = image["height"].get<int>();
  if (record.width <= 0 || record.height <= 0)
    fail(record_index, "image", "dimensions must be positive");

  if (doc.contains("annotations")) {
    if (!doc["annotations"].is_array())
      fail(record_index, "annotations", "expected an array");
    std::size_t a = 0;
    for (const auto& ann : doc["annotations"]) {
      const std::string where = "annotations[" + std::to_string(a) + "]";
      if (!ann.is_object()) fail(record_index, where, "expected an object");
      warn_unknown_fields(ann, {"class", "points", "confidence"}, record_index,
                          where, warnings);

      if (!ann.contains("class") || !ann["class"].is_string())
        fail(record_index, where + ".class", "missing required string");
      const std::string cls = ann["class"].get<std::string>();
      geom::Polylined poly;
      if (cls == "villi") {
        poly.label = geom::ClassLabel::Villi;
      } else if (cls == "crypt") {
        poly.label = geom::ClassLabel::Crypt;
      } else {
        fail(record_index, where + ".class",
             "unknown class '" + cls + "' (expected \"villi\" or \"crypt\")");
      }

      if (!ann.contains("points"))
        fail(record_index, where + ".points", "missing required array");
      poly.points = parse_points(ann["points"], record_index, where + ".points");
      if (poly.points.rows() < 2 || poly.points.rows() > 4)
        fail(record_index, where + ".points",
             "expected 2-4 points, got " + std::to_string(poly.points.rows()));
      if (clamp_points(poly.points, record.width, record.height))
        warnings.push_back(field_path(record_index, where + ".points") +
                           ": clamped out-of-bounds coordinates");

      if (ann.contains("confidence")) {
        poly.confidence =
            require_number(ann["confidence"], record_index, where + ".confidence");
        if (poly.confidence < 0.0 || poly.confidence > 1.0)
          fail(record_index, where + ".confidence", "must be in [0,1]");
      }
      record.annotations.push_back(std::move(poly));
      ++a;
    }
  }

  for (const char* curve : {"shoulder", "border"}) {
    if (!doc.contains(curve)) continue;
    geom::PointMatrixd points = parse_points(doc[curve], record_index, curve);
    if (clamp_points(points, record.width, record.height))
      warnings.push_back(field_path(record_index, curve) +
                         ": clamped out-of-bounds coordinates");
    if (curve == std::string("shoulder"))
      record.shoulder = std::move(points);
    else
      record.border = std::move(points);
  }
  return record;
}

ordered_json points_to_json(const geom::PointMatrixd& points) {
  ordered_json out = ordered_json::array();
  for (Eigen::Index i = 0; i < points.rows(); ++i)
    out.push_back({points(i, 0), points(i, 1)});
  return out;
}

ordered_json record_to_json(const ImageRecord& record) {
  ordered_json doc;
  doc["image"] = {{"id", record.id},
                  {"width", record.width},
                  {"height", record.height}};
  ordered_json annotations = ordered_json::array();
  for (const auto& poly : record.annotations) {
    ordered_json ann;
    ann["class"] = poly.label == geom::ClassLabel::Villi ? "villi" : "crypt";
    ann["points"] = points_to_json(poly.points);
    ann["confidence"] = poly.confidence;
    annotations.push_back(std::move(ann));
  }
  doc["annotations"] = std::move(annotations);
  if (record.shoulder) doc["shoulder"] = points_to_json(*record.shoulder);
  if (record.border) doc["border"] = points_to_json(*record.border);
  return doc;
}

}  // namespace

ParseResult parse_records_text(const std::string& text,
                               const std::string& origin) {
  ParseResult out;

  // A file is either one JSON document or one document per line.
  const auto whole = ordered_json::parse(text, nullptr, false);
  if (!whole.is_discarded()) {
    if (whole.is_object()) {
      out.records.push_back(parse_record(whole, 0, out.warnings));
      return out;
    }
    throw ParseError(origin + ": top-level JSON must be an object (one record) "
                              "or JSON lines");
  }

  std::istringstream lines(text);
  std::string line;
  std::size_t index = 0;
  std::size_t line_number = 0;
  while (std::getline(lines, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto doc = ordered_json::parse(line, nullptr, false);
    if (doc.is_discarded())
      throw ParseError(origin + ": line " + std::to_string(line_number) +
                       ": invalid JSON");
    out.records.push_back(parse_record(doc, index, out.warnings));
    ++index;
  }
  if (out.records.empty())
    throw ParseError(origin + ": no records found");
  return out;
}

ParseResult parse_records(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ParseError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return parse_records_text(buffer.str(), path.string());
}

std::string record_to_json_string(const ImageRecord& record) {
  return record_to_json(record).dump();
}

std::string records_to_jsonl(const std::vector<ImageRecord>& records) {
  std::string out;
  for (const auto& record : records) {
    out += record_to_json_string(record);
    out += '\n';
  }
  return out;
}

void write_records(const std::filesystem::path& path,
                   const std::vector<ImageRecord>& records) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open for writing " + path.string());
  os << records_to_jsonl(records);
  if (!os) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace polymeasure::io
