// Generates the bundled grayscale test corpus: each image layers a smooth
// gradient, a few Gaussian blobs, hard edges (lines and rectangles), and
// band-limited sinusoidal texture, then normalizes into [0.04, 0.96].
// Content is a pure function of (seed, file name), so re-running over a
// checkout rewrites identical bytes unless parameters changed.
#include <CLI11.hpp>

#include <idemqe/image.hpp>
#include <idemqe/rng.hpp>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

namespace {

idemqe::ImageBuffer synth_image(std::uint64_t seed, const std::string& name, std::size_t size) {
  idemqe::Rng rng = idemqe::Rng::substream(seed, name);
  const double s = static_cast<double>(size);
  idemqe::ImageBuffer img = idemqe::ImageBuffer::make(size, size, 1);

  // oriented linear gradient plus an optional radial bowl
  double theta = rng.uniform(0.0, 2.0 * M_PI);
  double grad_amp = rng.uniform(0.2, 0.6);
  double gx = std::cos(theta) * grad_amp / s;
  double gy = std::sin(theta) * grad_amp / s;
  double radial_amp = rng.uniform01() < 0.5 ? rng.uniform(-0.3, 0.3) : 0.0;
  double cx0 = rng.uniform(0.3, 0.7) * s;
  double cy0 = rng.uniform(0.3, 0.7) * s;

  struct Blob {
    double cx, cy, sigma, amp;
  };
  std::vector<Blob> blobs;
  std::size_t blob_count = 2 + rng.index(4);
  for (std::size_t i = 0; i < blob_count; ++i) {
    double amp = rng.uniform(0.12, 0.38) * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
    blobs.push_back({rng.uniform(0.1, 0.9) * s, rng.uniform(0.1, 0.9) * s,
                     rng.uniform(4.0, 11.0), amp});
  }

  // step edge across a random line; tanh softness down to under a pixel
  bool has_edge = rng.uniform01() < 0.75;
  double edge_px = rng.uniform(0.2, 0.8) * s;
  double edge_py = rng.uniform(0.2, 0.8) * s;
  double edge_theta = rng.uniform(0.0, 2.0 * M_PI);
  double edge_nx = std::cos(edge_theta);
  double edge_ny = std::sin(edge_theta);
  double edge_amp = rng.uniform(0.15, 0.35) * (rng.uniform01() < 0.5 ? -1.0 : 1.0);
  double edge_soft = rng.uniform(0.5, 2.0);

  // axis-aligned constant rectangle: sharp borders in both directions
  bool has_rect = rng.uniform01() < 0.4;
  double rw = rng.uniform(0.18, 0.45) * s;
  double rh = rng.uniform(0.18, 0.45) * s;
  double rx = rng.uniform(0.05, 0.92 - rw / s) * s;
  double ry = rng.uniform(0.05, 0.92 - rh / s) * s;
  double rect_amp = rng.uniform(0.12, 0.3) * (rng.uniform01() < 0.5 ? -1.0 : 1.0);

  struct Wave {
    double fx, fy, phase, amp;
  };
  std::vector<Wave> waves;
  for (std::size_t i = 0; i < 8; ++i) {
    double wavelength = rng.uniform(4.0, 16.0);
    double phi = rng.uniform(0.0, 2.0 * M_PI);
    double f = 2.0 * M_PI / wavelength;
    waves.push_back({f * std::cos(phi), f * std::sin(phi), rng.uniform(0.0, 2.0 * M_PI),
                     rng.uniform(0.02, 0.06)});
  }

  double lo = 1e300;
  double hi = -1e300;
  for (std::size_t y = 0; y < size; ++y) {
    for (std::size_t x = 0; x < size; ++x) {
      double px = static_cast<double>(x);
      double py = static_cast<double>(y);
      double v = 0.5 + gx * (px - s / 2.0) + gy * (py - s / 2.0);
      double rdx = (px - cx0) / s;
      double rdy = (py - cy0) / s;
      v += radial_amp * (rdx * rdx + rdy * rdy);
      for (const Blob& b : blobs) {
        double dx = px - b.cx;
        double dy = py - b.cy;
        v += b.amp * std::exp(-(dx * dx + dy * dy) / (2.0 * b.sigma * b.sigma));
      }
      if (has_edge) {
        double d = (px - edge_px) * edge_nx + (py - edge_py) * edge_ny;
        v += edge_amp * std::tanh(d / edge_soft);
      }
      if (has_rect && px >= rx && px < rx + rw && py >= ry && py < ry + rh) {
        v += rect_amp;
      }
      for (const Wave& w : waves) {
        v += w.amp * std::sin(w.fx * px + w.fy * py + w.phase);
      }
      img.at(y, x, 0) = v;
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }

  double span = hi - lo;
  if (span < 1e-12) span = 1.0;
  for (double& v : img.samples) v = 0.04 + 0.92 * (v - lo) / span;
  return img;
}

void write_split(const std::string& dir, const char* prefix, std::size_t count,
                 std::uint64_t seed, std::size_t size) {
  std::filesystem::create_directories(dir);
  for (std::size_t i = 0; i < count; ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "%s%03zu.pgm", prefix, i);
    idemqe::write_pnm_file(synth_image(seed, name, size), dir + "/" + name);
    std::printf("%s/%s\n", dir.c_str(), name);
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"bundled test-corpus generator"};
  std::string out = "data/desk";
  std::uint64_t seed = 11;
  std::size_t train_count = 56;
  std::size_t holdout_count = 12;
  std::size_t size = 64;
  app.add_option("--out", out, "corpus root; writes <out>/train and <out>/holdout");
  app.add_option("--seed", seed, "master seed; each image derives a named sub-stream");
  app.add_option("--train", train_count, "training image count");
  app.add_option("--holdout", holdout_count, "held-out image count");
  app.add_option("--size", size, "image side length in pixels");
  CLI11_PARSE(app, argc, argv);

  try {
    write_split(out + "/train", "t", train_count, seed, size);
    write_split(out + "/holdout", "h", holdout_count, seed, size);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "deskgen: %s\n", e.what());
    return 1;
  }
  std::printf("wrote %zu train + %zu holdout images under %s\n", train_count, holdout_count,
              out.c_str());
  return 0;
}
