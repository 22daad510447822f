#pragma once

#include <idemqe/distance.hpp>
#include <idemqe/image.hpp>

#include <array>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace idemqe {

// mean squared error over all samples (peak 1.0 domain)
inline double mse(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_geometry(b)) {
    throw std::invalid_argument("mse: image geometry mismatch " + std::to_string(a.height) + "x" +
                                std::to_string(a.width) + "x" + std::to_string(a.channels) + " vs " +
                                std::to_string(b.height) + "x" + std::to_string(b.width) + "x" +
                                std::to_string(b.channels));
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < a.samples.size(); ++i) {
    double d = a.samples[i] - b.samples[i];
    acc += d * d;
  }
  return acc / static_cast<double>(a.samples.size());
}

// 10 log10(1/MSE) dB with peak 1.0; identical images yield the +infinity
// sentinel (serialized as "inf")
inline double psnr(const ImageBuffer& a, const ImageBuffer& b) {
  double m = mse(a, b);
  if (m == 0.0) return std::numeric_limits<double>::infinity();
  return 10.0 * std::log10(1.0 / m);
}

namespace detail {

// 11x11 Gaussian window, sigma 1.5, normalized to sum 1
inline const std::array<double, 121>& ssim_window() {
  static const auto w = [] {
    std::array<double, 121> out{};
    double sum = 0.0;
    for (int y = -5; y <= 5; ++y) {
      for (int x = -5; x <= 5; ++x) {
        double g = std::exp(-(x * x + y * y) / (2.0 * 1.5 * 1.5));
        out[(y + 5) * 11 + (x + 5)] = g;
        sum += g;
      }
    }
    for (double& v : out) v /= sum;
    return out;
  }();
  return w;
}

}  // namespace detail

// Single-scale structural similarity: 11x11 Gaussian window (sigma 1.5),
// K1 = 0.01, K2 = 0.03, dynamic range 1.0. Local map over fully interior
// window positions, averaged per channel, channels averaged.
inline double ssim(const ImageBuffer& a, const ImageBuffer& b) {
  if (!a.same_geometry(b)) {
    throw std::invalid_argument("ssim: image geometry mismatch");
  }
  if (a.height < 11 || a.width < 11) {
    throw std::invalid_argument("ssim requires min side >= 11, got " + std::to_string(a.height) +
                                "x" + std::to_string(a.width));
  }
  const auto& win = detail::ssim_window();
  const double c1 = 1e-4;  // (K1*L)^2
  const double c2 = 9e-4;  // (K2*L)^2
  double total = 0.0;
  for (std::size_t c = 0; c < a.channels; ++c) {
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t oy = 0; oy + 11 <= a.height; ++oy) {
      for (std::size_t ox = 0; ox + 11 <= a.width; ++ox) {
        double ma = 0.0, mb = 0.0, sa = 0.0, sb = 0.0, sab = 0.0;
        for (int y = 0; y < 11; ++y) {
          for (int x = 0; x < 11; ++x) {
            double w = win[y * 11 + x];
            double va = a.at(oy + y, ox + x, c);
            double vb = b.at(oy + y, ox + x, c);
            ma += w * va;
            mb += w * vb;
            sa += w * va * va;
            sb += w * vb * vb;
            sab += w * va * vb;
          }
        }
        double var_a = sa - ma * ma;
        double var_b = sb - mb * mb;
        double cov = sab - ma * mb;
        double v = ((2.0 * ma * mb + c1) * (2.0 * cov + c2)) /
                   ((ma * ma + mb * mb + c1) * (var_a + var_b + c2));
        acc += v;
        ++count;
      }
    }
    total += acc / static_cast<double>(count);
  }
  return total / static_cast<double>(a.channels);
}

// Quality trajectory of one metric across enhancement cycles. orientation
// +1 when higher values are better (PSNR, SSIM), -1 when lower are better.
struct MetricSeries {
  std::string name;
  int orientation = +1;
  std::vector<double> values;
};

// Normalized per-cycle quality-loss slope, in percent: positive means the
// series worsens under its orientation. Scale-invariant in the values.
inline double degradation_index(const MetricSeries& s) {
  if (s.orientation != 1 && s.orientation != -1) {
    throw std::invalid_argument("metric orientation must be +1 or -1, got " +
                                std::to_string(s.orientation));
  }
  std::size_t n = s.values.size();
  if (n < 2) {
    throw std::invalid_argument("degradation index needs at least 2 values, got " +
                                std::to_string(n));
  }
  double q1 = s.values.front();
  double qn = s.values.back();
  if (q1 == 0.0) throw std::invalid_argument("degradation index undefined for first value 0");
  return s.orientation * ((q1 - qn) / q1) / static_cast<double>(n - 1) * 100.0;
}

// One-step self-distance delta(x) = D(F(x), x) for any image->image
// operator; low drift on clean inputs indicates the operator preserves
// them. The model-specific overload lives with the model code.
template <typename EnhanceFn>
double drift(EnhanceFn&& enhance, const ImageBuffer& x, Distance kind) {
  ImageBuffer fx = enhance(x);
  if (!fx.same_geometry(x)) {
    throw std::invalid_argument("drift: operator changed image geometry");
  }
  return distance(image_to_tensor(fx), image_to_tensor(x), kind).value();
}

}  // namespace idemqe
