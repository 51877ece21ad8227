#include "polymeasure/pgm.hpp"

#include <fstream>
#include <stdexcept>
#include <string>

namespace polymeasure::io {

namespace {

// Next whitespace-delimited token, skipping '#' comment lines.
std::string next_token(std::istream& is) {
  std::string token;
  int c;
  while ((c = is.get()) != EOF) {
    if (c == '#') {
      while ((c = is.get()) != EOF && c != '\n') {
      }
      continue;
    }
    if (std::isspace(c)) {
      if (!token.empty()) return token;
      continue;
    }
    token.push_back(static_cast<char>(c));
  }
  return token;
}

int parse_int(const std::string& token, const char* what) {
  try {
    std::size_t used = 0;
    const int value = std::stoi(token, &used);
    if (used != token.size()) throw std::invalid_argument(token);
    return value;
  } catch (const std::exception&) {
    throw std::runtime_error(std::string("pgm: bad ") + what + " '" + token +
                             "'");
  }
}

}  // namespace

maskmeasure::LabelMap read_pgm(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("pgm: cannot open " + path.string());

  if (next_token(is) != "P5")
    throw std::runtime_error("pgm: expected P5 magic in " + path.string());
  const int width = parse_int(next_token(is), "width");
  const int height = parse_int(next_token(is), "height");
  const int maxval = parse_int(next_token(is), "maxval");
  if (width <= 0 || height <= 0)
    throw std::runtime_error("pgm: non-positive dimensions in " + path.string());
  if (maxval != 255)
    throw std::runtime_error("pgm: expected maxval 255 in " + path.string());

  auto map = maskmeasure::LabelMap::zeros(width, height);
  std::vector<char> row(static_cast<std::size_t>(width));
  for (int y = 0; y < height; ++y) {
    is.read(row.data(), width);
    if (!is)
      throw std::runtime_error("pgm: truncated pixel data in " + path.string());
    for (int x = 0; x < width; ++x)
      map.labels(y, x) = static_cast<std::uint8_t>(row[static_cast<std::size_t>(x)]);
  }
  if (!map.labels_valid())
    throw std::runtime_error("pgm: pixel value outside label range 0-4 in " +
                             path.string());
  return map;
}

void write_pgm(const std::filesystem::path& path,
               const maskmeasure::LabelMap& map) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("pgm: cannot open for writing " + path.string());
  os << "P5\n" << map.width() << " " << map.height() << "\n255\n";
  for (int y = 0; y < map.height(); ++y)
    for (int x = 0; x < map.width(); ++x)
      os.put(static_cast<char>(map.labels(y, x)));
  if (!os) throw std::runtime_error("pgm: write failed for " + path.string());
}

}  // namespace polymeasure::io
