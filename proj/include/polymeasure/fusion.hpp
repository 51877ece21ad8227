#pragma once

#include <Eigen/Dense>

#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "polymeasure/rng.hpp"

namespace polymeasure::fusion {

// Dense feature tensor in channel-major order (channel, then row, then
// column). Channels map onto contiguous row-major H x W blocks.
template <typename Scalar>
struct FeatureGrid {
  int channels = 0;
  int height = 0;
  int width = 0;
  Eigen::VectorX<Scalar> data;

  using ChannelMap =
      Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                               Eigen::RowMajor>>;
  using ConstChannelMap =
      Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                                     Eigen::RowMajor>>;

  static FeatureGrid zero(int c, int h, int w) {
    FeatureGrid g;
    g.channels = c;
    g.height = h;
    g.width = w;
    g.data = Eigen::VectorX<Scalar>::Zero(static_cast<Eigen::Index>(c) * h * w);
    return g;
  }

  static FeatureGrid random(int c, int h, int w, CounterRng& rng,
                            Scalar bound = Scalar(1)) {
    FeatureGrid g = zero(c, h, w);
    for (Eigen::Index i = 0; i < g.data.size(); ++i)
      g.data(i) = static_cast<Scalar>(rng.uniform(-double(bound), double(bound)));
    return g;
  }

  bool same_shape(const FeatureGrid& other) const {
    return channels == other.channels && height == other.height &&
           width == other.width;
  }

  Scalar& at(int c, int y, int x) {
    return data(static_cast<Eigen::Index>(c) * height * width +
                static_cast<Eigen::Index>(y) * width + x);
  }
  Scalar at(int c, int y, int x) const {
    return data(static_cast<Eigen::Index>(c) * height * width +
                static_cast<Eigen::Index>(y) * width + x);
  }

  ChannelMap channel(int c) {
    return ChannelMap(data.data() + static_cast<Eigen::Index>(c) * height * width,
                      height, width);
  }
  ConstChannelMap channel(int c) const {
    return ConstChannelMap(
        data.data() + static_cast<Eigen::Index>(c) * height * width, height,
        width);
  }

  // channels x (height*width) view; channel-major storage makes each row a
  // contiguous channel plane.
  auto as_matrix() const {
    return Eigen::Map<const Eigen::Matrix<Scalar, Eigen::Dynamic,
                                          Eigen::Dynamic, Eigen::RowMajor>>(
        data.data(), channels, static_cast<Eigen::Index>(height) * width);
  }
};

using FeatureGridd = FeatureGrid<double>;

struct MixupParams {
  double delta = 0.3;  // Beta shape, must stay within [0.2, 0.4]
  std::uint64_t seed = 0;
};

// Symmetric Beta(shape, shape) draw via Johnk's two-uniform acceptance
// method, valid for shape < 1. Always strictly inside (0, 1).
inline double beta_symmetric(double shape, CounterRng& rng) {
  if (!(shape > 0.0 && shape < 1.0))
    throw std::invalid_argument("beta_symmetric: shape must be in (0,1)");
  for (;;) {
    const double x = std::pow(rng.next_open01(), 1.0 / shape);
    const double y = std::pow(rng.next_open01(), 1.0 / shape);
    const double s = x + y;
    if (s > 0.0 && s <= 1.0) {
      const double lambda = x / s;
      if (lambda > 0.0 && lambda < 1.0) return lambda;
    }
  }
}

// Mixing coefficient for mask-feature mixup; a pure function of the params,
// so repeated calls with the same seed return the same draw.
inline double sample_lambda(const MixupParams& params) {
  if (params.delta < 0.2 || params.delta > 0.4)
    throw std::invalid_argument("sample_lambda: delta outside [0.2, 0.4]");
  CounterRng rng = CounterRng(params.seed).split(0x6265746131ull);  // "beta1"
  return beta_symmetric(params.delta, rng);
}

// Element-wise convex combination of two feature grids.
template <typename Scalar>
FeatureGrid<Scalar> mixup(const FeatureGrid<Scalar>& strong,
                          const FeatureGrid<Scalar>& weak, double lambda) {
  if (!strong.same_shape(weak))
    throw std::invalid_argument("mixup: shape mismatch");
  if (!(lambda >= 0.0 && lambda <= 1.0))
    throw std::invalid_argument("mixup: lambda outside [0,1]");
  FeatureGrid<Scalar> out = strong;
  out.data = Scalar(lambda) * strong.data + Scalar(1.0 - lambda) * weak.data;
  return out;
}

namespace detail {

template <typename Scalar>
FeatureGrid<Scalar> pointwise_conv(const FeatureGrid<Scalar>& in,
                                   const Eigen::MatrixX<Scalar>& weight,
                                   const Eigen::VectorX<Scalar>& bias) {
  if (weight.cols() != in.channels || bias.size() != weight.rows())
    throw std::invalid_argument("pointwise_conv: weight shape mismatch");
  FeatureGrid<Scalar> out =
      FeatureGrid<Scalar>::zero(static_cast<int>(weight.rows()), in.height,
                                in.width);
  Eigen::Map<Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic,
                           Eigen::RowMajor>>
      out_m(out.data.data(), out.channels,
            static_cast<Eigen::Index>(out.height) * out.width);
  out_m = weight * in.as_matrix();
  out_m.colwise() += bias;
  return out;
}

// 3x3 depthwise convolution, stride 1, zero same-padding.
template <typename Scalar>
void depthwise_3x3_into(const FeatureGrid<Scalar>& in, int in_channel,
                        const Eigen::Matrix<Scalar, 3, 3>& kernel, Scalar bias,
                        FeatureGrid<Scalar>& out, int out_channel) {
  const int h = in.height;
  const int w = in.width;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      Scalar acc = bias;
      for (int ky = -1; ky <= 1; ++ky) {
        const int yy = y + ky;
        if (yy < 0 || yy >= h) continue;
        for (int kx = -1; kx <= 1; ++kx) {
          const int xx = x + kx;
          if (xx < 0 || xx >= w) continue;
          acc += kernel(ky + 1, kx + 1) * in.at(in_channel, yy, xx);
        }
      }
      out.at(out_channel, y, x) = acc;
    }
  }
}

template <typename Scalar>
void relu_inplace(FeatureGrid<Scalar>& g) {
  g.data = g.data.cwiseMax(Scalar(0));
}

// Exact Gaussian-CDF GELU.
template <typename Scalar>
Scalar gelu(Scalar x) {
  return Scalar(0.5) * x *
         (Scalar(1) + Scalar(std::erf(double(x) / std::numbers::sqrt2)));
}

}  // namespace detail

// Inverted-residual feature extraction block: two pointwise convolutions,
// ReLU, a 3x3 depthwise convolution, ReLU, plus the identity shortcut.
// Channel count is preserved end to end; all-zero weights therefore make
// the block an exact identity.
template <typename Scalar>
struct FeWeights {
  Eigen::MatrixX<Scalar> w1, w2;            // C x C pointwise
  Eigen::VectorX<Scalar> b1, b2;            // C
  std::vector<Eigen::Matrix<Scalar, 3, 3>> dw;  // C depthwise kernels
  Eigen::VectorX<Scalar> b_dw;              // C

  static FeWeights zero(int channels) {
    FeWeights w;
    w.w1 = Eigen::MatrixX<Scalar>::Zero(channels, channels);
    w.w2 = Eigen::MatrixX<Scalar>::Zero(channels, channels);
    w.b1 = Eigen::VectorX<Scalar>::Zero(channels);
    w.b2 = Eigen::VectorX<Scalar>::Zero(channels);
    w.dw.assign(channels, Eigen::Matrix<Scalar, 3, 3>::Zero());
    w.b_dw = Eigen::VectorX<Scalar>::Zero(channels);
    return w;
  }

  static FeWeights random(int channels, CounterRng& rng, Scalar bound = Scalar(1)) {
    FeWeights w = zero(channels);
    auto fill = [&rng, bound](auto& m) {
      for (Eigen::Index i = 0; i < m.size(); ++i)
        m.data()[i] = static_cast<Scalar>(rng.uniform(-double(bound), double(bound)));
    };
    fill(w.w1);
    fill(w.w2);
    fill(w.b1);
    fill(w.b2);
    fill(w.b_dw);
    for (auto& k : w.dw) fill(k);
    return w;
  }
};

template <typename Scalar>
FeatureGrid<Scalar> fe_forward(const FeatureGrid<Scalar>& f,
                               const FeWeights<Scalar>& w) {
  const int c = f.channels;
  if (w.w1.rows() != c || w.w1.cols() != c || w.w2.rows() != c ||
      w.w2.cols() != c || static_cast<int>(w.dw.size()) != c ||
      w.b1.size() != c || w.b2.size() != c || w.b_dw.size() != c)
    throw std::invalid_argument("fe_forward: weight shapes inconsistent");

  FeatureGrid<Scalar> t = detail::pointwise_conv(f, w.w1, w.b1);
  t = detail::pointwise_conv(t, w.w2, w.b2);
  detail::relu_inplace(t);
  FeatureGrid<Scalar> d = FeatureGrid<Scalar>::zero(c, f.height, f.width);
  for (int ch = 0; ch < c; ++ch)
    detail::depthwise_3x3_into(t, ch, w.dw[ch], w.b_dw(ch), d, ch);
  detail::relu_inplace(d);
  d.data += f.data;
  return d;
}

// Feature merger: concatenate image and mask features along channels (2C),
// expand with a multiplier-4 depthwise convolution (8C), split in half,
// gate the first half with GELU of the second, and project back to C with a
// pointwise convolution. Output channel 4c+m of the expansion comes from
// input channel c and kernel m.
template <typename Scalar>
struct FmWeights {
  std::vector<Eigen::Matrix<Scalar, 3, 3>> dw;  // 2C*4 kernels, grouped by input channel
  Eigen::VectorX<Scalar> b_dw;                  // 8C
  Eigen::MatrixX<Scalar> proj;                  // C x 4C pointwise
  Eigen::VectorX<Scalar> b_proj;                // C

  static FmWeights zero(int channels) {
    FmWeights w;
    w.dw.assign(static_cast<std::size_t>(2 * channels) * 4,
                Eigen::Matrix<Scalar, 3, 3>::Zero());
    w.b_dw = Eigen::VectorX<Scalar>::Zero(8 * channels);
    w.proj = Eigen::MatrixX<Scalar>::Zero(channels, 4 * channels);
    w.b_proj = Eigen::VectorX<Scalar>::Zero(channels);
    return w;
  }

  static FmWeights random(int channels, CounterRng& rng, Scalar bound = Scalar(1)) {
    FmWeights w = zero(channels);
    for (auto& k : w.dw)
      for (Eigen::Index i = 0; i < k.size(); ++i)
        k.data()[i] = static_cast<Scalar>(rng.uniform(-double(bound), double(bound)));
    for (Eigen::Index i = 0; i < w.b_dw.size(); ++i)
      w.b_dw(i) = static_cast<Scalar>(rng.uniform(-double(bound), double(bound)));
    for (Eigen::Index i = 0; i < w.proj.size(); ++i)
      w.proj.data()[i] = static_cast<Scalar>(rng.uniform(-double(bound), double(bound)));
    for (Eigen::Index i = 0; i < w.b_proj.size(); ++i)
      w.b_proj(i) = static_cast<Scalar>(rng.uniform(-double(bound), double(bound)));
    return w;
  }
};

template <typename Scalar>
FeatureGrid<Scalar> fm_forward(const FeatureGrid<Scalar>& f_image,
                               const FeatureGrid<Scalar>& f_mask,
                               const FmWeights<Scalar>& w) {
  if (!f_image.same_shape(f_mask))
    throw std::invalid_argument("fm_forward: shape mismatch");
  const int c = f_image.channels;
  const int h = f_image.height;
  const int width = f_image.width;
  if (static_cast<int>(w.dw.size()) != 8 * c || w.b_dw.size() != 8 * c ||
      w.proj.rows() != c || w.proj.cols() != 4 * c || w.b_proj.size() != c)
    throw std::invalid_argument("fm_forward: weight shapes inconsistent");

  FeatureGrid<Scalar> cat = FeatureGrid<Scalar>::zero(2 * c, h, width);
  cat.data.head(f_image.data.size()) = f_image.data;
  cat.data.tail(f_mask.data.size()) = f_mask.data;

  FeatureGrid<Scalar> expanded = FeatureGrid<Scalar>::zero(8 * c, h, width);
  for (int ch = 0; ch < 2 * c; ++ch)
    for (int m = 0; m < 4; ++m) {
      const int oc = 4 * ch + m;
      detail::depthwise_3x3_into(cat, ch, w.dw[static_cast<std::size_t>(oc)],
                                 w.b_dw(oc), expanded, oc);
    }

  // Halves of the expansion; the second half acts as the GELU gate.
  FeatureGrid<Scalar> gated = FeatureGrid<Scalar>::zero(4 * c, h, width);
  const Eigen::Index half = gated.data.size();
  for (Eigen::Index i = 0; i < half; ++i)
    gated.data(i) =
        expanded.data(i) * detail::gelu(expanded.data(half + i));

  return detail::pointwise_conv(gated, w.proj, w.b_proj);
}

// ---------------------------------------------------------------------------
// Flat binary weight files: magic "PMW1", then per tensor a u32 rank, u32
// dims, and float32 data, everything little-endian.

struct TensorBlob {
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

namespace detail {

inline std::uint32_t to_le(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::little) return v;
  return ((v & 0xFFu) << 24) | ((v & 0xFF00u) << 8) | ((v >> 8) & 0xFF00u) |
         (v >> 24);
}

inline void write_u32(std::ostream& os, std::uint32_t v) {
  const std::uint32_t le = to_le(v);
  os.write(reinterpret_cast<const char*>(&le), 4);
}

inline std::uint32_t read_u32(std::istream& is) {
  std::uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  if (!is) throw std::runtime_error("weight file: truncated header");
  return to_le(v);
}

inline void write_f32(std::ostream& os, float f) {
  std::uint32_t bits;
  std::memcpy(&bits, &f, 4);
  write_u32(os, bits);
}

inline float read_f32(std::istream& is) {
  const std::uint32_t bits = read_u32(is);
  float f;
  std::memcpy(&f, &bits, 4);
  return f;
}

}  // namespace detail

inline constexpr char kWeightsMagic[4] = {'P', 'M', 'W', '1'};

inline void write_weight_blobs(const std::filesystem::path& path,
                               const std::vector<TensorBlob>& blobs) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("weight file: cannot open for writing");
  os.write(kWeightsMagic, 4);
  detail::write_u32(os, static_cast<std::uint32_t>(blobs.size()));
  for (const auto& blob : blobs) {
    detail::write_u32(os, static_cast<std::uint32_t>(blob.dims.size()));
    std::size_t count = 1;
    for (const std::uint32_t d : blob.dims) {
      detail::write_u32(os, d);
      count *= d;
    }
    if (count != blob.data.size())
      throw std::runtime_error("weight file: dims do not match data size");
    for (const float f : blob.data) detail::write_f32(os, f);
  }
}

inline std::vector<TensorBlob> read_weight_blobs(
    const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("weight file: cannot open " + path.string());
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kWeightsMagic, 4) != 0)
    throw std::runtime_error("weight file: bad magic");
  const std::uint32_t count = detail::read_u32(is);
  std::vector<TensorBlob> blobs(count);
  for (auto& blob : blobs) {
    const std::uint32_t rank = detail::read_u32(is);
    blob.dims.resize(rank);
    std::size_t total = 1;
    for (auto& d : blob.dims) {
      d = detail::read_u32(is);
      total *= d;
    }
    blob.data.resize(total);
    for (auto& f : blob.data) f = detail::read_f32(is);
  }
  return blobs;
}

namespace detail {

inline void expect_dims(const TensorBlob& blob,
                        std::initializer_list<std::uint32_t> dims,
                        const char* name) {
  if (blob.dims != std::vector<std::uint32_t>(dims))
    throw std::runtime_error(std::string("weight file: unexpected shape for ") +
                             name);
}

}  // namespace detail

// Tensor order: w1 (C,C), b1 (C), w2 (C,C), b2 (C), dw (C,3,3), b_dw (C).
inline FeWeights<double> fe_weights_from_blobs(const std::vector<TensorBlob>& blobs,
                                               int channels) {
  if (blobs.size() != 6)
    throw std::runtime_error("weight file: FE block expects 6 tensors");
  const auto c = static_cast<std::uint32_t>(channels);
  detail::expect_dims(blobs[0], {c, c}, "w1");
  detail::expect_dims(blobs[1], {c}, "b1");
  detail::expect_dims(blobs[2], {c, c}, "w2");
  detail::expect_dims(blobs[3], {c}, "b2");
  detail::expect_dims(blobs[4], {c, 3, 3}, "dw");
  detail::expect_dims(blobs[5], {c}, "b_dw");

  FeWeights<double> w = FeWeights<double>::zero(channels);
  auto fill_matrix = [](Eigen::MatrixXd& m, const TensorBlob& blob) {
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index col = 0; col < m.cols(); ++col)
        m(r, col) = blob.data[static_cast<std::size_t>(r) * m.cols() + col];
  };
  auto fill_vector = [](Eigen::VectorXd& v, const TensorBlob& blob) {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = blob.data[i];
  };
  fill_matrix(w.w1, blobs[0]);
  fill_vector(w.b1, blobs[1]);
  fill_matrix(w.w2, blobs[2]);
  fill_vector(w.b2, blobs[3]);
  for (int ch = 0; ch < channels; ++ch)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx)
        w.dw[ch](ky, kx) = blobs[4].data[(ch * 3 + ky) * 3 + kx];
  fill_vector(w.b_dw, blobs[5]);
  return w;
}

// Tensor order: dw (2C*4,3,3), b_dw (8C), proj (C,4C), b_proj (C).
inline FmWeights<double> fm_weights_from_blobs(const std::vector<TensorBlob>& blobs,
                                               int channels) {
  if (blobs.size() != 4)
    throw std::runtime_error("weight file: FM block expects 4 tensors");
  const auto c = static_cast<std::uint32_t>(channels);
  detail::expect_dims(blobs[0], {8 * c, 3, 3}, "dw");
  detail::expect_dims(blobs[1], {8 * c}, "b_dw");
  detail::expect_dims(blobs[2], {c, 4 * c}, "proj");
  detail::expect_dims(blobs[3], {c}, "b_proj");

  FmWeights<double> w = FmWeights<double>::zero(channels);
  for (int k = 0; k < 8 * channels; ++k)
    for (int ky = 0; ky < 3; ++ky)
      for (int kx = 0; kx < 3; ++kx)
        w.dw[static_cast<std::size_t>(k)](ky, kx) =
            blobs[0].data[(k * 3 + ky) * 3 + kx];
  for (int i = 0; i < 8 * channels; ++i) w.b_dw(i) = blobs[1].data[i];
  for (int r = 0; r < channels; ++r)
    for (int col = 0; col < 4 * channels; ++col)
      w.proj(r, col) = blobs[2].data[static_cast<std::size_t>(r) * 4 * channels + col];
  for (int i = 0; i < channels; ++i) w.b_proj(i) = blobs[3].data[i];
  return w;
}

inline FeWeights<double> fe_weights_from_file(const std::filesystem::path& path,
                                              int channels) {
  return fe_weights_from_blobs(read_weight_blobs(path), channels);
}

inline FmWeights<double> fm_weights_from_file(const std::filesystem::path& path,
                                              int channels) {
  return fm_weights_from_blobs(read_weight_blobs(path), channels);
}

}  // namespace polymeasure::fusion
