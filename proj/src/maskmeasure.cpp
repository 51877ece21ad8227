#include "polymeasure/maskmeasure.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>

#include "polymeasure/dtw.hpp"

namespace polymeasure::maskmeasure {

namespace {

using BinaryGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic>;

constexpr int kDx[8] = {1, 1, 0, -1, -1, -1, 0, 1};
constexpr int kDy[8] = {0, 1, 1, 1, 0, -1, -1, -1};

}  // namespace

LabelMap LabelMap::zeros(int width, int height) {
  if (width <= 0 || height <= 0)
    throw std::invalid_argument("LabelMap: dimensions must be positive");
  LabelMap m;
  m.labels.setZero(height, width);
  return m;
}

bool LabelMap::labels_valid() const {
  return (labels.array() < kLabelCount).all();
}

std::vector<std::vector<Pixel>> connected_components(const LabelMap& map,
                                                     int label,
                                                     int min_area) {
  const int w = map.width();
  const int h = map.height();
  std::vector<std::vector<Pixel>> components;
  BinaryGrid seen = BinaryGrid::Zero(h, w);

  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      if (seen(y, x) || map.at(x, y) != label) continue;
      std::vector<Pixel> component;
      std::queue<Pixel> frontier;
      frontier.push({x, y});
      seen(y, x) = 1;
      while (!frontier.empty()) {
        const Pixel p = frontier.front();
        frontier.pop();
        component.push_back(p);
        for (int k = 0; k < 8; ++k) {
          const int nx = p.x + kDx[k];
          const int ny = p.y + kDy[k];
          if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
          if (seen(ny, nx) || map.at(nx, ny) != label) continue;
          seen(ny, nx) = 1;
          frontier.push({nx, ny});
        }
      }
      if (static_cast<int>(component.size()) >= min_area) {
        std::sort(component.begin(), component.end(),
                  [](const Pixel& a, const Pixel& b) {
                    return a.y != b.y ? a.y < b.y : a.x < b.x;
                  });
        components.push_back(std::move(component));
      }
    }
  }
  return components;
}

BinaryGrid zhang_suen_thin(const BinaryGrid& grid) {
  BinaryGrid img = grid.unaryExpr(
      [](std::uint8_t v) { return static_cast<std::uint8_t>(v ? 1 : 0); });
  const int h = static_cast<int>(img.rows());
  const int w = static_cast<int>(img.cols());

  auto px = [&img, h, w](int y, int x) -> int {
    if (y < 0 || y >= h || x < 0 || x >= w) return 0;
    return img(y, x);
  };

  bool changed = true;
  std::vector<Pixel> to_delete;
  while (changed) {
    changed = false;
    for (int phase = 0; phase < 2; ++phase) {
      to_delete.clear();
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          if (!img(y, x)) continue;
          // Neighbours P2..P9 clockwise from north.
          const int p2 = px(y - 1, x), p3 = px(y - 1, x + 1), p4 = px(y, x + 1),
                    p5 = px(y + 1, x + 1), p6 = px(y + 1, x),
                    p7 = px(y + 1, x - 1), p8 = px(y, x - 1),
                    p9 = px(y - 1, x - 1);
          const int b = p2 + p3 + p4 + p5 + p6 + p7 + p8 + p9;
          if (b < 2 || b > 6) continue;
          const int seq[9] = {p2, p3, p4, p5, p6, p7, p8, p9, p2};
          int a = 0;
          for (int i = 0; i < 8; ++i)
            if (seq[i] == 0 && seq[i + 1] == 1) ++a;
          if (a != 1) continue;
          if (phase == 0) {
            if (p2 * p4 * p6 != 0 || p4 * p6 * p8 != 0) continue;
          } else {
            if (p2 * p4 * p8 != 0 || p2 * p6 * p8 != 0) continue;
          }
          to_delete.push_back({x, y});
        }
      }
      for (const Pixel& p : to_delete) img(p.y, p.x) = 0;
      if (!to_delete.empty()) changed = true;
    }
  }
  return img;
}

namespace {

struct SkeletonGraph {
  std::vector<Pixel> nodes;                 // scan order
  Eigen::MatrixXi index;                    // -1 where no node
  std::vector<std::vector<int>> adjacency;  // 8-neighbour edges
};

SkeletonGraph build_graph(const BinaryGrid& skeleton) {
  SkeletonGraph g;
  const int h = static_cast<int>(skeleton.rows());
  const int w = static_cast<int>(skeleton.cols());
  g.index = Eigen::MatrixXi::Constant(h, w, -1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if (skeleton(y, x)) {
        g.index(y, x) = static_cast<int>(g.nodes.size());
        g.nodes.push_back({x, y});
      }
  g.adjacency.resize(g.nodes.size());
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
    const Pixel p = g.nodes[static_cast<std::size_t>(i)];
    for (int k = 0; k < 8; ++k) {
      const int nx = p.x + kDx[k];
      const int ny = p.y + kDy[k];
      if (nx < 0 || nx >= w || ny < 0 || ny >= h) continue;
      const int j = g.index(ny, nx);
      if (j >= 0) g.adjacency[static_cast<std::size_t>(i)].push_back(j);
    }
  }
  return g;
}

struct Sweep {
  std::vector<double> dist;
  std::vector<int> parent;
  int farthest = 0;
};

// Dijkstra with step weights 1 / sqrt(2); ties in the farthest node resolve
// to the smaller node index for determinism.
Sweep weighted_sweep(const SkeletonGraph& g, int start) {
  const double inf = std::numeric_limits<double>::max();
  Sweep s;
  s.dist.assign(g.nodes.size(), inf);
  s.parent.assign(g.nodes.size(), -1);
  using Entry = std::pair<double, int>;
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> heap;
  s.dist[static_cast<std::size_t>(start)] = 0.0;
  heap.emplace(0.0, start);
  while (!heap.empty()) {
    const auto [d, i] = heap.top();
    heap.pop();
    if (d > s.dist[static_cast<std::size_t>(i)]) continue;
    const Pixel p = g.nodes[static_cast<std::size_t>(i)];
    for (const int j : g.adjacency[static_cast<std::size_t>(i)]) {
      const Pixel q = g.nodes[static_cast<std::size_t>(j)];
      const bool diagonal = p.x != q.x && p.y != q.y;
      const double step = diagonal ? std::numbers::sqrt2 : 1.0;
      if (d + step < s.dist[static_cast<std::size_t>(j)]) {
        s.dist[static_cast<std::size_t>(j)] = d + step;
        s.parent[static_cast<std::size_t>(j)] = i;
        heap.emplace(d + step, j);
      }
    }
  }
  s.farthest = start;
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i)
    if (s.dist[static_cast<std::size_t>(i)] < inf &&
        s.dist[static_cast<std::size_t>(i)] >
            s.dist[static_cast<std::size_t>(s.farthest)])
      s.farthest = i;
  return s;
}

Contour contour_from_pixels(const std::vector<Pixel>& pixels) {
  Contour c(static_cast<Eigen::Index>(pixels.size()), 2);
  for (Eigen::Index i = 0; i < c.rows(); ++i) {
    c(i, 0) = pixels[static_cast<std::size_t>(i)].x;
    c(i, 1) = pixels[static_cast<std::size_t>(i)].y;
  }
  return c;
}

void orient_contour(std::vector<Pixel>& path) {
  if (path.size() < 2) return;
  const Pixel& a = path.front();
  const Pixel& b = path.back();
  const bool reversed = b.x != a.x ? b.x < a.x : b.y < a.y;
  if (reversed) std::reverse(path.begin(), path.end());
}

}  // namespace

Contour skeletonize(const std::vector<Pixel>& component) {
  if (component.empty())
    throw std::invalid_argument("skeletonize: empty component");

  int min_x = component[0].x, max_x = component[0].x;
  int min_y = component[0].y, max_y = component[0].y;
  for (const Pixel& p : component) {
    min_x = std::min(min_x, p.x);
    max_x = std::max(max_x, p.x);
    min_y = std::min(min_y, p.y);
    max_y = std::max(max_y, p.y);
  }
  BinaryGrid grid = BinaryGrid::Zero(max_y - min_y + 1, max_x - min_x + 1);
  for (const Pixel& p : component) grid(p.y - min_y, p.x - min_x) = 1;

  const BinaryGrid skeleton = zhang_suen_thin(grid);
  const SkeletonGraph graph = build_graph(skeleton);
  if (graph.nodes.empty())
    throw std::logic_error("skeletonize: thinning removed all pixels");

  // Double sweep: farthest node from an arbitrary seed, then farthest from
  // that; the connecting path approximates the longest simple path and is
  // exact on tree-shaped skeletons.
  const Sweep first = weighted_sweep(graph, 0);
  const Sweep second = weighted_sweep(graph, first.farthest);
  std::vector<Pixel> path;
  for (int i = second.farthest; i != -1;
       i = second.parent[static_cast<std::size_t>(i)])
    path.push_back(graph.nodes[static_cast<std::size_t>(i)]);
  orient_contour(path);

  for (Pixel& p : path) {
    p.x += min_x;
    p.y += min_y;
  }
  return contour_from_pixels(path);
}

double skeleton_length(const Contour& contour) {
  double length = 0.0;
  for (Eigen::Index i = 1; i < contour.rows(); ++i) {
    const double dx = std::abs(contour(i, 0) - contour(i - 1, 0));
    const double dy = std::abs(contour(i, 1) - contour(i - 1, 1));
    if (dx <= 1.0 && dy <= 1.0) {
      length += (dx > 0.0 && dy > 0.0) ? std::numbers::sqrt2 : 1.0;
    } else {
      length += (contour.row(i) - contour.row(i - 1)).norm();
    }
  }
  return length;
}

ContourResult extract_class_contour(const LabelMap& map, int label) {
  ContourResult out;
  // Contour classes are thin curves, so no speckle threshold here; take the
  // largest component to keep the result deterministic.
  const auto components = connected_components(map, label, 1);
  if (components.empty()) return out;
  std::size_t largest = 0;
  for (std::size_t i = 1; i < components.size(); ++i)
    if (components[i].size() > components[largest].size()) largest = i;
  out.contour = skeletonize(components[largest]);
  out.present = true;
  return out;
}

std::vector<DepthSample> crypt_depth_profile(const Contour& shoulder,
                                             const Contour& border) {
  if (shoulder.rows() == 0 || border.rows() == 0)
    throw std::invalid_argument("crypt_depth_profile: empty contour");
  const auto alignment = dtw::align(shoulder, border);

  std::vector<DepthSample> samples(static_cast<std::size_t>(shoulder.rows()));
  std::vector<bool> seen(static_cast<std::size_t>(shoulder.rows()), false);
  for (const auto& [i, j] : alignment.path) {
    const double d = (shoulder.row(i) - border.row(j)).norm();
    auto& sample = samples[static_cast<std::size_t>(i)];
    if (!seen[static_cast<std::size_t>(i)] || d < sample.depth) {
      sample.shoulder = shoulder.row(i).transpose();
      sample.border = border.row(j).transpose();
      sample.depth = d;
      seen[static_cast<std::size_t>(i)] = true;
    }
  }
  return samples;
}

MaskMeasurements measure_masks(const LabelMap& map,
                               const MeasureOptions& options) {
  MaskMeasurements out;
  for (const auto& component :
       connected_components(map, kVilli, options.min_area))
    out.villi_lengths.push_back(skeleton_length(skeletonize(component)));
  for (const auto& component :
       connected_components(map, kCrypt, options.min_area))
    out.crypt_lengths.push_back(skeleton_length(skeletonize(component)));

  const ContourResult shoulder = extract_class_contour(map, kVilliShoulder);
  const ContourResult border = extract_class_contour(map, kCryptBorder);
  if (shoulder.present && border.present) {
    const auto profile = crypt_depth_profile(shoulder.contour, border.contour);
    double sum = 0.0;
    for (const DepthSample& s : profile) sum += s.depth;
    out.mean_crypt_depth = sum / static_cast<double>(profile.size());
  }
  return out;
}

}  // namespace polymeasure::maskmeasure
