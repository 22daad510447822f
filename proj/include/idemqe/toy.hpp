#pragma once

#include <idemqe/training.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

// Desk-scale 2-D sandbox: train the same four-term objective on points
// drawn from a known mixture, where distribution alignment and drift
// behavior can be measured exactly instead of eyeballed on images. The
// point model is an `mlp` ModelSpec, so forward, losses, and the optimizer
// are the very same code paths the image trainer runs.

namespace idemqe {

using Point2 = std::array<double, 2>;

// ---------------------------------------------------------------------------
// target distribution

struct ToyDistribution {
  struct Component {
    Point2 mean{0.0, 0.0};
    // row-major 2x2 covariance [[xx, xy], [yx, yy]]; must be symmetric
    // positive-definite
    std::array<double, 4> cov{1.0, 0.0, 0.0, 1.0};
    double weight = 1.0;
  };

  std::vector<Component> components;
  std::uint64_t seed = 0;  // default sampling stream

  void validate() const {
    if (components.empty()) {
      throw std::invalid_argument("mixture needs at least one component");
    }
    double total = 0.0;
    for (std::size_t i = 0; i < components.size(); ++i) {
      const Component& c = components[i];
      if (!(c.weight > 0.0)) {
        throw std::invalid_argument("component " + std::to_string(i) +
                                    " weight must be positive");
      }
      total += c.weight;
      if (c.cov[1] != c.cov[2]) {
        throw std::invalid_argument("component " + std::to_string(i) +
                                    " covariance is not symmetric");
      }
      double det = c.cov[0] * c.cov[3] - c.cov[1] * c.cov[2];
      if (!(c.cov[0] > 0.0) || !(det > 0.0)) {
        throw std::invalid_argument("component " + std::to_string(i) +
                                    " covariance is not positive-definite");
      }
    }
    if (std::fabs(total - 1.0) > 1e-12) {
      throw std::invalid_argument("component weights must sum to 1, got " + fmt_double(total));
    }
  }

  // sqrt of the largest covariance eigenvalue across components: the scale
  // of one component cloud, used to size the corruption noise
  double spread() const {
    validate();
    double max_eig = 0.0;
    for (const Component& c : components) {
      double half_tr = 0.5 * (c.cov[0] + c.cov[3]);
      double half_gap = 0.5 * (c.cov[0] - c.cov[3]);
      double eig = half_tr + std::sqrt(half_gap * half_gap + c.cov[1] * c.cov[1]);
      max_eig = std::max(max_eig, eig);
    }
    return std::sqrt(max_eig);
  }

  // draws consume the stream: component choice, then two normals
  std::vector<Point2> sample(std::size_t count, Rng& rng) const {
    validate();
    // per-component Cholesky factors [[l11, 0], [l21, l22]]
    std::vector<std::array<double, 3>> chol;
    chol.reserve(components.size());
    for (const Component& c : components) {
      double l11 = std::sqrt(c.cov[0]);
      double l21 = c.cov[1] / l11;
      double l22 = std::sqrt(c.cov[3] - l21 * l21);
      chol.push_back({l11, l21, l22});
    }
    std::vector<Point2> out(count);
    for (Point2& p : out) {
      double u = rng.uniform01();
      std::size_t k = 0;
      double cum = components[0].weight;
      while (u >= cum && k + 1 < components.size()) cum += components[++k].weight;
      double n1 = rng.normal();
      double n2 = rng.normal();
      p[0] = components[k].mean[0] + chol[k][0] * n1;
      p[1] = components[k].mean[1] + chol[k][1] * n1 + chol[k][2] * n2;
    }
    return out;
  }

  std::vector<Point2> sample(std::size_t count, std::uint64_t sample_seed) const {
    Rng rng(sample_seed);
    return sample(count, rng);
  }

  std::vector<Point2> sample(std::size_t count) const { return sample(count, seed); }

  // Well-separated mixture with 2-4 components inside roughly [-3,3]^2; one
  // component is anisotropic so the correlated-sampling path is exercised.
  // Component scale (spread) is about 0.45.
  static ToyDistribution standard_mixture(std::size_t n_components) {
    if (n_components < 2 || n_components > 4) {
      throw std::invalid_argument("standard mixture has 2-4 components, got " +
                                  std::to_string(n_components));
    }
    std::vector<Component> all = {
        {{-2.0, -1.0}, {0.16, 0.0, 0.0, 0.16}, 0.0},
        {{2.0, 1.0}, {0.2, 0.05, 0.05, 0.12}, 0.0},
        {{0.0, 2.2}, {0.09, 0.0, 0.0, 0.18}, 0.0},
        {{0.5, -2.2}, {0.14, -0.04, -0.04, 0.14}, 0.0},
    };
    all.resize(n_components);
    for (Component& c : all) c.weight = 1.0 / static_cast<double>(n_components);
    ToyDistribution dist{std::move(all), 0};
    dist.validate();
    return dist;
  }
};

// aligned (corrupted, target) sample columns: corrupted[i] is target[i]
// plus isotropic Gaussian noise of scale sigma
struct ToyPairs {
  std::vector<Point2> target;
  std::vector<Point2> corrupted;
};

inline ToyPairs sample_pair(const ToyDistribution& dist, double sigma, std::size_t count,
                            std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw std::invalid_argument("corruption sigma must be >= 0");
  if (count == 0) throw std::invalid_argument("sample count must be >= 1");
  Rng target_rng = Rng::substream(seed, "toy-target");
  ToyPairs out;
  out.target = dist.sample(count, target_rng);
  out.corrupted = out.target;
  if (sigma > 0.0) {  // sigma == 0 leaves the points bitwise untouched
    Rng noise_rng = Rng::substream(seed, "toy-noise");
    for (Point2& z : out.corrupted) {
      z[0] += sigma * noise_rng.normal();
      z[1] += sigma * noise_rng.normal();
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// distribution-distance oracle

// 2*E|a-b| - E|a-a'| - E|b-b'| over Euclidean norms, each expectation the
// exact mean over all (ordered) pairs including i == j. Zero iff the
// empirical distributions coincide; exact sums keep identical multisets at
// exactly 0. Desk-scale sizes only (all-pairs is quadratic).
inline double energy_distance(const std::vector<std::vector<double>>& a,
                              const std::vector<std::vector<double>>& b) {
  if (a.empty() || b.empty()) throw std::invalid_argument("energy distance of an empty set");
  std::size_t dim = a.front().size();
  for (const auto& row : a) {
    if (row.size() != dim) throw std::invalid_argument("ragged sample set");
  }
  for (const auto& row : b) {
    if (row.size() != dim) {
      throw std::invalid_argument("sample sets have mismatched dimensions: " +
                                  std::to_string(dim) + " vs " + std::to_string(row.size()));
    }
  }
  auto mean_cross = [dim](const std::vector<std::vector<double>>& u,
                          const std::vector<std::vector<double>>& v) {
    double sum = 0.0;
    for (const auto& x : u) {
      for (const auto& y : v) {
        double sq = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
          double diff = x[d] - y[d];
          sq += diff * diff;
        }
        sum += std::sqrt(sq);
      }
    }
    return sum / (static_cast<double>(u.size()) * static_cast<double>(v.size()));
  };
  double e = 2.0 * mean_cross(a, b) - mean_cross(a, a) - mean_cross(b, b);
  // >= 0 in exact arithmetic; the final subtraction may round a hair below
  return e < 0.0 ? 0.0 : e;
}

inline std::vector<std::vector<double>> as_rows(const std::vector<Point2>& pts) {
  std::vector<std::vector<double>> rows;
  rows.reserve(pts.size());
  for (const Point2& p : pts) rows.push_back({p[0], p[1]});
  return rows;
}

inline double energy_distance(const std::vector<Point2>& a, const std::vector<Point2>& b) {
  return energy_distance(as_rows(a), as_rows(b));
}

// ---------------------------------------------------------------------------
// point model plumbing

struct ToyModel {
  ModelSpec spec;
  ModelParams params;
};

inline Tensor points_to_batch(const std::vector<Point2>& pts) {
  if (pts.empty()) throw std::invalid_argument("empty point batch");
  std::vector<double> data;
  data.reserve(pts.size() * 2);
  for (const Point2& p : pts) {
    data.push_back(p[0]);
    data.push_back(p[1]);
  }
  return Tensor::from_data({pts.size(), 2, 1, 1}, std::move(data));
}

inline std::vector<Point2> batch_to_points(const Tensor& t) {
  const Shape& s = t.shape();
  if (s.size() != 4 || s[1] != 2 || s[2] != 1 || s[3] != 1) {
    throw std::invalid_argument("point batch must be Nx2x1x1, got " + shape_str(s));
  }
  std::vector<Point2> out(s[0]);
  for (std::size_t i = 0; i < s[0]; ++i) out[i] = {t.vec()[2 * i], t.vec()[2 * i + 1]};
  return out;
}

// one untaped application of the model to every point
inline std::vector<Point2> map_points(const ToyModel& model, const std::vector<Point2>& pts) {
  return batch_to_points(forward(model.params, model.spec, points_to_batch(pts)));
}

// per-point drift D(f(p), p): mean |.| over the two coordinates for l1,
// mean squared difference for l2 — the scalar distance at point granularity
inline std::vector<double> point_drifts(const ToyModel& model, const std::vector<Point2>& pts,
                                        Distance kind) {
  std::vector<Point2> mapped = map_points(model, pts);
  std::vector<double> out(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double d0 = mapped[i][0] - pts[i][0];
    double d1 = mapped[i][1] - pts[i][1];
    out[i] = kind == Distance::kL1 ? 0.5 * (std::fabs(d0) + std::fabs(d1))
                                   : 0.5 * (d0 * d0 + d1 * d1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// training and diagnostics

struct ToyTrainConfig {
  TrainConfig train;
  StraightforwardConfig straightforward;
  std::size_t hidden = 16;
  std::size_t depth = 3;  // 2 -> hidden -> hidden -> 2
  bool residual = true;
  // Noise scale for the corrupted copies; defaults to dist.spread(). At
  // desk-scale sample counts the energy statistic cannot resolve much
  // smaller corruptions: below ~0.6 * spread the corrupted cloud sits
  // inside the sampling noise floor of two independent target draws.
  std::optional<double> corruption_sigma;
  std::size_t train_count = 512;
  std::size_t eval_count = 512;

  void validate() const {
    train.validate();
    if (train.mode == TrainMode::kStraightforward) straightforward.validate();
    if (hidden == 0 || hidden > 64) {
      throw std::invalid_argument("toy hidden width must be in [1, 64], got " +
                                  std::to_string(hidden));
    }
    if (depth < 2) throw std::invalid_argument("toy model needs at least 2 layers");
    if (train_count == 0 || eval_count == 0) {
      throw std::invalid_argument("toy sample counts must be >= 1");
    }
    if (corruption_sigma && !(*corruption_sigma >= 0.0)) {
      throw std::invalid_argument("corruption sigma must be >= 0");
    }
  }
};

struct ToyDiagnostics {
  double corruption_sigma = 0.0;
  double energy_generated_target = 0.0;
  double energy_corrupted_target = 0.0;
  double mean_drift_target = 0.0;
  double mean_drift_corrupted = 0.0;
  std::vector<Point2> eval_target, eval_corrupted, eval_generated;
  std::vector<double> drift_target, drift_corrupted;
};

struct ToyRunResult {
  ToyModel model;
  std::vector<LossRecord> curve;
  ToyDiagnostics diag;
};

namespace detail {

inline void write_cloud_csv(const std::string& path, const ToyDiagnostics& d) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create cloud file: " + path);
  out << "set,x1,x2\n";
  auto dump = [&out](const char* name, const std::vector<Point2>& pts) {
    for (const Point2& p : pts) {
      out << name << ',' << fmt_double(p[0]) << ',' << fmt_double(p[1]) << '\n';
    }
  };
  dump("target", d.eval_target);
  dump("corrupted", d.eval_corrupted);
  dump("generated", d.eval_generated);
  if (!out) throw std::runtime_error("short write to cloud file: " + path);
}

inline void write_drift_csv(const std::string& path, const ToyDiagnostics& d) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create drift profile file: " + path);
  out << "set,x1,x2,drift\n";
  auto dump = [&out](const char* name, const std::vector<Point2>& pts,
                     const std::vector<double>& drifts) {
    for (std::size_t i = 0; i < pts.size(); ++i) {
      out << name << ',' << fmt_double(pts[i][0]) << ',' << fmt_double(pts[i][1]) << ','
          << fmt_double(drifts[i]) << '\n';
    }
  };
  dump("target", d.eval_target, d.drift_target);
  dump("corrupted", d.eval_corrupted, d.drift_corrupted);
  if (!out) throw std::runtime_error("short write to drift profile file: " + path);
}

inline void write_toy_summary_csv(const std::string& path, const ToyDiagnostics& d) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create summary file: " + path);
  out << "metric,value\n";
  out << "corruption_sigma," << fmt_double(d.corruption_sigma) << '\n';
  out << "energy_generated_target," << fmt_double(d.energy_generated_target) << '\n';
  out << "energy_corrupted_target," << fmt_double(d.energy_corrupted_target) << '\n';
  out << "mean_drift_target," << fmt_double(d.mean_drift_target) << '\n';
  out << "mean_drift_corrupted," << fmt_double(d.mean_drift_corrupted) << '\n';
  if (!out) throw std::runtime_error("short write to summary file: " + path);
}

}  // namespace detail

// Trains the point model on (corrupted, target) pairs with the configured
// objective — the identical step code the image trainer uses — then
// evaluates on held-out draws: energy distances of the generated and
// corrupted clouds against an independently drawn target cloud, and mean
// drift D(f(p), p) on target vs corrupted points. The reference cloud must
// be independent of the corrupted cloud's base points: measuring a cloud
// against its own perturbed copy cancels the shared randomness and
// understates the distributional gap several-fold. When out_dir is
// non-empty, writes loss_curve.csv, model.ckpt, clouds.csv,
// drift_profile.csv, summary.csv.
inline ToyRunResult train_toy(const ToyDistribution& dist, const ToyTrainConfig& cfg,
                              const LossWeights& w, const std::string& out_dir = "") {
  dist.validate();
  cfg.validate();
  w.validate();
  double sigma = cfg.corruption_sigma ? *cfg.corruption_sigma : dist.spread();
  ToyPairs pool = sample_pair(dist, sigma, cfg.train_count,
                              Rng::substream(cfg.train.seed, "toy-train-data").next_u64());

  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  ToyRunResult res;
  res.model.spec = ModelSpec::mlp(2, cfg.hidden, cfg.depth, cfg.residual);
  res.model.params = init_params(res.model.spec, cfg.train.seed);
  std::vector<Tensor> tensors = parameter_tensors(res.model.params);
  OptimizerState opt = OptimizerState::create(cfg.train, tensors);
  Rng batch_rng = Rng::substream(cfg.train.seed, "batch");

  std::vector<Point2> bc(cfg.train.batch_size), br(cfg.train.batch_size);
  for (std::size_t it = 1; it <= cfg.train.iterations; ++it) {
    for (std::size_t b = 0; b < cfg.train.batch_size; ++b) {
      std::size_t idx = batch_rng.index(pool.target.size());
      bc[b] = pool.corrupted[idx];
      br[b] = pool.target[idx];
    }
    LossRecord rec;
    try {
      rec = train_step(res.model.params, res.model.spec, points_to_batch(bc),
                       points_to_batch(br), cfg.train, cfg.straightforward, w, opt);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("toy training aborted at iteration " + std::to_string(it) + ": " +
                               e.what());
    }
    if (!std::isfinite(rec.total)) {
      throw std::runtime_error("toy training diverged at iteration " + std::to_string(it) +
                               ": loss " + fmt_double(rec.total));
    }
    rec.iteration = it;
    if (it % cfg.train.log_interval == 0 || it == cfg.train.iterations) {
      res.curve.push_back(rec);
    }
  }

  ToyPairs eval = sample_pair(dist, sigma, cfg.eval_count,
                              Rng::substream(cfg.train.seed, "toy-eval-data").next_u64());
  ToyDiagnostics& d = res.diag;
  d.corruption_sigma = sigma;
  d.eval_target =
      dist.sample(cfg.eval_count, Rng::substream(cfg.train.seed, "toy-eval-reference").next_u64());
  d.eval_corrupted = eval.corrupted;
  d.eval_generated = map_points(res.model, eval.corrupted);
  d.drift_target = point_drifts(res.model, eval.target, cfg.train.distance);
  d.drift_corrupted = point_drifts(res.model, eval.corrupted, cfg.train.distance);
  auto mean_of = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  d.mean_drift_target = mean_of(d.drift_target);
  d.mean_drift_corrupted = mean_of(d.drift_corrupted);
  d.energy_generated_target = energy_distance(d.eval_generated, d.eval_target);
  d.energy_corrupted_target = energy_distance(d.eval_corrupted, d.eval_target);

  if (!out_dir.empty()) {
    write_loss_csv(out_dir + "/loss_curve.csv", res.curve);
    save_checkpoint(res.model.params, res.model.spec, out_dir + "/model.ckpt");
    detail::write_cloud_csv(out_dir + "/clouds.csv", d);
    detail::write_drift_csv(out_dir + "/drift_profile.csv", d);
    detail::write_toy_summary_csv(out_dir + "/summary.csv", d);
  }
  return res;
}

}  // namespace idemqe
