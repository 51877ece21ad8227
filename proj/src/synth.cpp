#include "polymeasure/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "polymeasure/pgm.hpp"
#include "polymeasure/rng.hpp"

namespace polymeasure::synth {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Per-image RNG stream tags.
constexpr std::uint64_t kGtStream = 0x100000;
constexpr std::uint64_t kPredStream = 0x200000;
constexpr std::uint64_t kMaskStream = 0x300000;

// Ratio bands of the four clinical grades, kept away from the edges so the
// achieved per-image ratio regrades into the intended band.
constexpr double kBands[4][2] = {
    {3.10, 4.20},  // normal
    {1.15, 2.80},  // grade 1
    {0.96, 1.04},  // grade 2
    {0.55, 0.92},  // grade 3
};

struct ArcSpec {
  geom::Point2d start;
  double length = 0.0;
  double heading = 0.0;  // radians, 0 points down the +y axis
  double bend = 0.0;
};

// Two equal segments of length/2 each; total length is exact by
// construction.
geom::Polylined arc_polyline(const ArcSpec& spec, geom::ClassLabel label) {
  const double half = spec.length / 2.0;
  const geom::Point2d d1(std::sin(spec.heading), std::cos(spec.heading));
  const geom::Point2d d2(std::sin(spec.heading + spec.bend),
                         std::cos(spec.heading + spec.bend));
  geom::Polylined poly;
  poly.label = label;
  poly.points.resize(3, 2);
  poly.points.row(0) = spec.start.transpose();
  poly.points.row(1) = (spec.start + half * d1).transpose();
  poly.points.row(2) = (spec.start + half * d1 + half * d2).transpose();
  return poly;
}

bool in_bounds(const geom::Polylined& poly, int width, int height) {
  constexpr double kMargin = 4.0;
  for (Eigen::Index i = 0; i < poly.points.rows(); ++i) {
    if (poly.points(i, 0) < kMargin || poly.points(i, 0) > width - kMargin ||
        poly.points(i, 1) < kMargin || poly.points(i, 1) > height - kMargin)
      return false;
  }
  return true;
}

// Draw headings until the arc fits the frame; falls back to a straight
// vertical stroke, which always fits the placements used below.
geom::Polylined place_arc(CounterRng& rng, const geom::Point2d& start,
                          double length, double up, double tilt_deg,
                          double bend_deg, geom::ClassLabel label, int width,
                          int height) {
  const double base = up > 0 ? 180.0 * kDeg : 0.0;  // heading 180 points up
  for (int attempt = 0; attempt < 50; ++attempt) {
    ArcSpec spec;
    spec.start = start;
    spec.length = length;
    spec.heading = base + rng.uniform(-tilt_deg, tilt_deg) * kDeg;
    spec.bend = rng.uniform(-bend_deg, bend_deg) * kDeg;
    const auto poly = arc_polyline(spec, label);
    if (in_bounds(poly, width, height)) return poly;
  }
  return arc_polyline({start, length, base, 0.0}, label);
}

void draw_disc(maskmeasure::LabelMap& map, int cx, int cy, int radius,
               std::uint8_t label) {
  for (int dy = -radius; dy <= radius; ++dy)
    for (int dx = -radius; dx <= radius; ++dx) {
      const int x = cx + dx;
      const int y = cy + dy;
      if (x >= 0 && x < map.width() && y >= 0 && y < map.height())
        map.set(x, y, label);
    }
}

void draw_segment(maskmeasure::LabelMap& map, const geom::Point2d& a,
                  const geom::Point2d& b, int radius, std::uint8_t label) {
  int x0 = static_cast<int>(std::lround(a.x()));
  int y0 = static_cast<int>(std::lround(a.y()));
  const int x1 = static_cast<int>(std::lround(b.x()));
  const int y1 = static_cast<int>(std::lround(b.y()));
  const int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
  const int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
  int err = dx + dy;
  for (;;) {
    draw_disc(map, x0, y0, radius, label);
    if (x0 == x1 && y0 == y1) break;
    const int e2 = 2 * err;
    if (e2 >= dy) {
      err += dy;
      x0 += sx;
    }
    if (e2 <= dx) {
      err += dx;
      y0 += sy;
    }
  }
}

void draw_polyline(maskmeasure::LabelMap& map, const geom::PointMatrixd& points,
                   int radius, std::uint8_t label) {
  for (Eigen::Index i = 1; i < points.rows(); ++i)
    draw_segment(map, points.row(i - 1).transpose(), points.row(i).transpose(),
                 radius, label);
}

// Gently jittered horizontal curve across the frame at baseline y.
geom::PointMatrixd horizontal_curve(CounterRng& rng, double y, int width) {
  const int knots = 9;
  geom::PointMatrixd curve(knots, 2);
  for (int k = 0; k < knots; ++k) {
    curve(k, 0) = 16.0 + (width - 32.0) * k / (knots - 1);
    curve(k, 1) = y + rng.uniform(-4.0, 4.0);
  }
  return curve;
}

void validate(const SynthConfig& cfg) {
  if (cfg.n_images < 0) throw std::invalid_argument("synth: n_images < 0");
  if (cfg.width <= 0 || cfg.height <= 0)
    throw std::invalid_argument("synth: non-positive image dimensions");
  auto check_range = [](std::pair<int, int> r, const char* name) {
    if (r.first < 0 || r.second < r.first)
      throw std::invalid_argument(std::string("synth: bad range for ") + name);
  };
  check_range(cfg.villi_per_image, "villi_per_image");
  check_range(cfg.crypts_per_image, "crypts_per_image");
  if (cfg.noise_sigma < 0) throw std::invalid_argument("synth: sigma < 0");
  if (cfg.drop_rate < 0 || cfg.drop_rate >= 1)
    throw std::invalid_argument("synth: drop_rate outside [0,1)");
  if (cfg.spurious_rate < 0)
    throw std::invalid_argument("synth: spurious_rate < 0");
  if (cfg.ratio_band &&
      (cfg.ratio_band->first <= 0 ||
       cfg.ratio_band->second < cfg.ratio_band->first))
    throw std::invalid_argument("synth: bad ratio_band");
}

}  // namespace

SynthOutput synth_generate(const SynthConfig& cfg) {
  validate(cfg);
  SynthOutput out;
  CounterRng root(cfg.seed);

  for (int img = 0; img < cfg.n_images; ++img) {
    CounterRng rng = root.split(kGtStream + static_cast<std::uint64_t>(img));

    io::ImageRecord gt;
    gt.id = "img_" + std::to_string(10000 + img).substr(1);
    gt.width = cfg.width;
    gt.height = cfg.height;

    double band_lo, band_hi;
    if (cfg.ratio_band) {
      band_lo = cfg.ratio_band->first;
      band_hi = cfg.ratio_band->second;
    } else {
      band_lo = kBands[img % 4][0];
      band_hi = kBands[img % 4][1];
    }
    const double ratio = rng.uniform(band_lo, band_hi);
    const double crypt_len = rng.uniform(30.0, 60.0);
    const double villi_len = ratio * crypt_len;

    // Shoulder baseline leaves room for the villi above and crypts below.
    const double y_shoulder =
        rng.uniform(villi_len + 20.0, cfg.height - crypt_len - 20.0);

    const int n_villi =
        rng.uniform_int(cfg.villi_per_image.first, cfg.villi_per_image.second);
    const int n_crypts = rng.uniform_int(cfg.crypts_per_image.first,
                                         cfg.crypts_per_image.second);

    auto slot_x = [&rng, &cfg](int index, int count) {
      const double span = cfg.width - 120.0;
      const double slot = span / std::max(count, 1);
      return 60.0 + slot * (index + rng.uniform(0.3, 0.7));
    };

    for (int i = 0; i < n_villi; ++i) {
      const geom::Point2d start(slot_x(i, n_villi), y_shoulder - 4.0);
      gt.annotations.push_back(place_arc(rng, start, villi_len, +1.0, 25.0,
                                         30.0, geom::ClassLabel::Villi,
                                         cfg.width, cfg.height));
    }
    for (int i = 0; i < n_crypts; ++i) {
      const geom::Point2d start(slot_x(i, n_crypts), y_shoulder + 4.0);
      gt.annotations.push_back(place_arc(rng, start, crypt_len, -1.0, 15.0,
                                         15.0, geom::ClassLabel::Crypt,
                                         cfg.width, cfg.height));
    }

    // Predictions: noisy copy with drops, then spurious extras. Separate
    // stream so the ground truth for a seed does not depend on the noise
    // settings.
    CounterRng noise = root.split(kPredStream + static_cast<std::uint64_t>(img));
    io::ImageRecord pred;
    pred.id = gt.id;
    pred.width = gt.width;
    pred.height = gt.height;
    for (const auto& ann : gt.annotations) {
      if (cfg.drop_rate > 0 && noise.bernoulli(cfg.drop_rate)) continue;
      geom::Polylined copy = ann;
      if (cfg.noise_sigma > 0) {
        for (Eigen::Index r = 0; r < copy.points.rows(); ++r)
          for (int c = 0; c < 2; ++c)
            copy.points(r, c) = std::clamp(
                copy.points(r, c) + cfg.noise_sigma * noise.gaussian(), 0.0,
                double(c == 0 ? cfg.width : cfg.height));
      }
      pred.annotations.push_back(std::move(copy));
    }
    if (cfg.spurious_rate > 0) {
      const int extras = noise.poisson(cfg.spurious_rate);
      for (int i = 0; i < extras; ++i) {
        const geom::Point2d start(noise.uniform(80.0, cfg.width - 80.0),
                                  noise.uniform(80.0, cfg.height - 80.0));
        const double len = noise.uniform(20.0, 120.0);
        const auto label = noise.bernoulli(0.5) ? geom::ClassLabel::Villi
                                                : geom::ClassLabel::Crypt;
        auto poly = place_arc(noise, start, len, noise.bernoulli(0.5) ? 1 : -1,
                              60.0, 30.0, label, cfg.width, cfg.height);
        poly.confidence = noise.uniform(0.55, 0.95);
        pred.annotations.push_back(std::move(poly));
      }
    }

    // Label map: villi and crypt strips plus the shoulder curve above the
    // crypts and the border curve below them.
    CounterRng mask_rng =
        root.split(kMaskStream + static_cast<std::uint64_t>(img));
    auto map = maskmeasure::LabelMap::zeros(cfg.width, cfg.height);
    for (const auto& ann : gt.annotations)
      draw_polyline(map, ann.points, 1,
                    ann.label == geom::ClassLabel::Villi
                        ? maskmeasure::kVilli
                        : maskmeasure::kCrypt);
    const auto shoulder = horizontal_curve(mask_rng, y_shoulder, cfg.width);
    const auto border =
        horizontal_curve(mask_rng, y_shoulder + crypt_len + 8.0, cfg.width);
    draw_polyline(map, shoulder, 0, maskmeasure::kVilliShoulder);
    draw_polyline(map, border, 0, maskmeasure::kCryptBorder);
    gt.shoulder = shoulder;
    gt.border = border;

    out.gt.push_back(std::move(gt));
    out.pred.push_back(std::move(pred));
    out.masks.push_back(std::move(map));
  }
  return out;
}

void synth_write(const SynthOutput& output,
                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir / "masks");
  io::write_records(out_dir / "gt.jsonl", output.gt);
  io::write_records(out_dir / "pred.jsonl", output.pred);
  for (std::size_t i = 0; i < output.masks.size(); ++i)
    io::write_pgm(out_dir / "masks" / (output.gt[i].id + ".pgm"),
                  output.masks[i]);
}

SynthConfig synth_config_from_json_text(const std::string& text) {
  const auto doc = nlohmann::json::parse(text);
  SynthConfig cfg;
  auto read_pair = [&doc](const char* key, std::pair<int, int>& into) {
    if (!doc.contains(key)) return;
    const auto& v = doc.at(key);
    if (!v.is_array() || v.size() != 2)
      throw std::runtime_error(std::string("synth config: ") + key +
                               " must be [lo, hi]");
    into = {v[0].get<int>(), v[1].get<int>()};
  };
  if (doc.contains("n_images")) cfg.n_images = doc["n_images"].get<int>();
  read_pair("villi_per_image", cfg.villi_per_image);
  read_pair("crypts_per_image", cfg.crypts_per_image);
  if (doc.contains("noise_sigma")) cfg.noise_sigma = doc["noise_sigma"].get<double>();
  if (doc.contains("drop_rate")) cfg.drop_rate = doc["drop_rate"].get<double>();
  if (doc.contains("spurious_rate"))
    cfg.spurious_rate = doc["spurious_rate"].get<double>();
  if (doc.contains("seed")) cfg.seed = doc["seed"].get<std::uint64_t>();
  if (doc.contains("width")) cfg.width = doc["width"].get<int>();
  if (doc.contains("height")) cfg.height = doc["height"].get<int>();
  if (doc.contains("ratio_band")) {
    const auto& v = doc.at("ratio_band");
    if (!v.is_array() || v.size() != 2)
      throw std::runtime_error("synth config: ratio_band must be [lo, hi]");
    cfg.ratio_band = {v[0].get<double>(), v[1].get<double>()};
  }
  validate(cfg);
  return cfg;
}

SynthConfig synth_config_from_file(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("synth config: cannot open " + path.string());
  std::ostringstream buffer;
  buffer << is.rdbuf();
  return synth_config_from_json_text(buffer.str());
}

}  // namespace polymeasure::synth
