#pragma once

#include <idemqe/image.hpp>

#include <array>
#include <cmath>
#include <stdexcept>
#include <string>

namespace idemqe {

using QuantTable = std::array<std::array<int, 8>, 8>;

// standard base luminance quantization table (8x8, byte units)
inline const QuantTable& base_luma_quant_table() {
  static const QuantTable table = {{
      {16, 11, 10, 16, 24, 40, 51, 61},
      {12, 12, 14, 19, 26, 58, 60, 55},
      {14, 13, 16, 24, 40, 57, 69, 56},
      {14, 17, 22, 29, 51, 87, 80, 62},
      {18, 22, 37, 56, 68, 109, 103, 77},
      {24, 35, 55, 64, 81, 104, 113, 92},
      {49, 64, 78, 87, 103, 121, 120, 101},
      {72, 92, 95, 98, 112, 100, 103, 99},
  }};
  return table;
}

// Quality 1..100 -> table: scale = 5000/q below 50 else 200-2q, each entry
// floor((entry*scale + 50)/100) clamped to [1,255]. Quality 50 is identity.
inline QuantTable quant_table_for_quality(int quality) {
  if (quality < 1 || quality > 100) {
    throw std::invalid_argument("quality must be in [1,100], got " + std::to_string(quality));
  }
  int scale = quality < 50 ? 5000 / quality : 200 - 2 * quality;
  QuantTable out;
  const QuantTable& base = base_luma_quant_table();
  for (int i = 0; i < 8; ++i) {
    for (int j = 0; j < 8; ++j) {
      int v = (base[i][j] * scale + 50) / 100;
      out[i][j] = std::clamp(v, 1, 255);
    }
  }
  return out;
}

// Block-transform codec round trip at a quality factor. One table for all
// channels; no bitstream, no chroma path. Fully deterministic.
struct CodecConfig {
  int quality = 50;
  QuantTable table = base_luma_quant_table();

  static CodecConfig for_quality(int q) { return CodecConfig{q, quant_table_for_quality(q)}; }
  // HEVC-style operating point: QP mapped onto the quality axis as 100-2*QP
  static CodecConfig for_qp(int qp) {
    int q = 100 - 2 * qp;
    if (q < 1 || q > 100) throw std::invalid_argument("qp must be in [0,49], got " + std::to_string(qp));
    return for_quality(q);
  }
};

namespace detail {

// orthonormal DCT-II basis: M[k][n] = c_k cos(pi (2n+1) k / 16)
inline const std::array<std::array<double, 8>, 8>& dct_matrix() {
  static const auto m = [] {
    std::array<std::array<double, 8>, 8> out{};
    const double pi = std::acos(-1.0);
    for (int k = 0; k < 8; ++k) {
      double ck = k == 0 ? std::sqrt(1.0 / 8.0) : std::sqrt(2.0 / 8.0);
      for (int n = 0; n < 8; ++n) {
        out[k][n] = ck * std::cos(pi * (2 * n + 1) * k / 16.0);
      }
    }
    return out;
  }();
  return m;
}

using Block = std::array<std::array<double, 8>, 8>;

// Y = M X M^T (fixed loop order; bit-deterministic)
inline Block dct2(const Block& x) {
  const auto& m = dct_matrix();
  Block tmp{}, y{};
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += m[i][k] * x[k][j];
      tmp[i][j] = s;
    }
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += tmp[i][k] * m[j][k];
      y[i][j] = s;
    }
  return y;
}

// X = M^T Y M
inline Block idct2(const Block& y) {
  const auto& m = dct_matrix();
  Block tmp{}, x{};
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += m[k][i] * y[k][j];
      tmp[i][j] = s;
    }
  for (int i = 0; i < 8; ++i)
    for (int j = 0; j < 8; ++j) {
      double s = 0.0;
      for (int k = 0; k < 8; ++k) s += tmp[i][k] * m[k][j];
      x[i][j] = s;
    }
  return x;
}

}  // namespace detail

// Lossy round trip: per 8x8 block and channel, level-shift by 128/255,
// orthonormal 2-D DCT, quantize each coefficient to a multiple of its table
// step (byte units / 255, round half away from zero), inverse DCT, unshift,
// clamp to [0,1]. Non-multiple-of-8 images are edge-replicated up and
// cropped back.
inline ImageBuffer encode_decode(const ImageBuffer& img, const CodecConfig& cfg) {
  if (img.height == 0 || img.width == 0 || img.samples.empty()) {
    throw std::invalid_argument("encode_decode: empty image");
  }
  for (const auto& row : cfg.table) {
    for (int v : row) {
      if (v < 1 || v > 255) {
        throw std::invalid_argument("quantization table entries must be in [1,255], got " +
                                    std::to_string(v));
      }
    }
  }
  const double shift = 128.0 / 255.0;
  const std::size_t ph = (img.height + 7) / 8 * 8;
  const std::size_t pw = (img.width + 7) / 8 * 8;

  ImageBuffer out = ImageBuffer::make(img.height, img.width, img.channels);
  std::vector<double> plane(ph * pw);
  for (std::size_t c = 0; c < img.channels; ++c) {
    // edge-replicated padded plane
    for (std::size_t y = 0; y < ph; ++y) {
      std::size_t sy = std::min(y, img.height - 1);
      for (std::size_t x = 0; x < pw; ++x) {
        std::size_t sx = std::min(x, img.width - 1);
        plane[y * pw + x] = img.at(sy, sx, c);
      }
    }
    for (std::size_t by = 0; by < ph; by += 8) {
      for (std::size_t bx = 0; bx < pw; bx += 8) {
        detail::Block block;
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j)
            block[i][j] = plane[(by + i) * pw + (bx + j)] - shift;
        detail::Block coef = detail::dct2(block);
        for (int i = 0; i < 8; ++i) {
          for (int j = 0; j < 8; ++j) {
            double step = cfg.table[i][j] / 255.0;
            coef[i][j] = std::round(coef[i][j] / step) * step;
          }
        }
        detail::Block rec = detail::idct2(coef);
        for (int i = 0; i < 8; ++i)
          for (int j = 0; j < 8; ++j)
            plane[(by + i) * pw + (bx + j)] = rec[i][j] + shift;
      }
    }
    for (std::size_t y = 0; y < img.height; ++y) {
      for (std::size_t x = 0; x < img.width; ++x) {
        out.at(y, x, c) = std::clamp(plane[y * pw + x], 0.0, 1.0);
      }
    }
  }
  return out;
}

}  // namespace idemqe
