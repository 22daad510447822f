#pragma once

#include <idemqe/distance.hpp>
#include <idemqe/image.hpp>
#include <idemqe/model.hpp>
#include <idemqe/rng.hpp>

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace idemqe {

// Coefficients of the four-objective overall loss
//   L_total = L_enh + li*L_iden + lp*L_idem - lc*bounded(L_comp)
// where bounded(.) = tanh(L_comp / (a*L_iden)) * a*L_iden caps the
// compactness reward at a*L_iden. When the compactness term is active, the
// counter-pressure it puts on the identity objective is at most lc*a, so
// lc*a < li keeps net identity pressure positive; with lc = 0 the term is
// gone and the constraint is vacuous.
struct LossWeights {
  double lambda_iden = 1e-2;
  double lambda_idem = 1e-2;
  double lambda_comp = 1e-3;
  double a = 1.5;

  void validate() const {
    if (lambda_iden < 0 || lambda_idem < 0 || lambda_comp < 0) {
      throw std::invalid_argument("loss weights must be non-negative");
    }
    if (a <= 0) throw std::invalid_argument("bound scale a must be positive");
    if (lambda_comp > 0 && lambda_comp * a >= lambda_iden) {
      throw std::invalid_argument("lambda_comp * a must stay below lambda_iden (got " +
                                  std::to_string(lambda_comp * a) + " vs " +
                                  std::to_string(lambda_iden) + ")");
    }
  }
};

enum class TrainMode { kBaseline, kStraightforward, kDomainConsistent };

inline const char* to_string(TrainMode m) {
  switch (m) {
    case TrainMode::kBaseline: return "baseline";
    case TrainMode::kStraightforward: return "straightforward";
    default: return "domain_consistent";
  }
}

inline TrainMode train_mode_from_string(const std::string& s) {
  if (s == "baseline") return TrainMode::kBaseline;
  if (s == "straightforward") return TrainMode::kStraightforward;
  if (s == "domain_consistent") return TrainMode::kDomainConsistent;
  throw std::invalid_argument("unknown training mode: " + s);
}

enum class OptimizerKind { kAdam, kSgd };

inline const char* to_string(OptimizerKind k) {
  return k == OptimizerKind::kAdam ? "adam" : "sgd";
}

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::kAdam;
  if (s == "sgd") return OptimizerKind::kSgd;
  throw std::invalid_argument("unknown optimizer: " + s);
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 4;
  std::size_t iterations = 1000;
  OptimizerKind optimizer = OptimizerKind::kAdam;
  AdamConfig adam;
  std::size_t patch_size = 32;
  std::uint64_t seed = 0;
  Distance distance = Distance::kL1;
  TrainMode mode = TrainMode::kDomainConsistent;
  std::size_t log_interval = 50;
  std::size_t checkpoint_interval = 0;  // 0 = final checkpoint only

  void validate() const {
    if (learning_rate <= 0) throw std::invalid_argument("learning_rate must be positive");
    if (iterations < 1) throw std::invalid_argument("iterations must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (patch_size < 1) throw std::invalid_argument("patch_size must be >= 1");
    if (log_interval < 1) throw std::invalid_argument("log_interval must be >= 1");
    if (adam.beta1 < 0 || adam.beta1 >= 1 || adam.beta2 < 0 || adam.beta2 >= 1 ||
        adam.epsilon <= 0) {
      throw std::invalid_argument("adam parameters out of range");
    }
  }
};

// Multi-supervision unroll: loss = sum_i w_i * D(F^(i)(I_C), I_R)
struct StraightforwardConfig {
  std::size_t m = 2;
  std::vector<double> weights = {1.0, 0.01};

  void validate() const {
    if (m < 1) throw std::invalid_argument("unroll depth m must be >= 1");
    if (weights.size() != m) {
      throw std::invalid_argument("need exactly " + std::to_string(m) + " unroll weights, got " +
                                  std::to_string(weights.size()));
    }
    for (double w : weights) {
      if (w < 0) throw std::invalid_argument("unroll weights must be non-negative");
    }
  }
};

// The four forward passes of one training step. i_ee carries gradient
// through both applications; i_ee_tilde only through the outer one (inner
// result frozen). i_ee and i_ee_tilde hold identical values.
struct ForwardPasses {
  Tensor i_e;        // F(I_C)
  Tensor i_re;       // F(I_R)
  Tensor i_ee;       // F(F(I_C))
  Tensor i_ee_tilde; // F(StopGrad(F(I_C)))
};

inline ForwardPasses forward_passes(const ModelParams& params, const ModelSpec& spec,
                                    const Tensor& i_c, const Tensor& i_r) {
  if (i_c.shape() != i_r.shape()) {
    throw std::invalid_argument("paired batches must share a shape, got " +
                                shape_str(i_c.shape()) + " vs " + shape_str(i_r.shape()));
  }
  ForwardPasses fp;
  fp.i_e = forward(params, spec, i_c);
  fp.i_re = forward(params, spec, i_r);
  fp.i_ee = forward(params, spec, fp.i_e);
  fp.i_ee_tilde = forward(params, spec, stop_gradient(fp.i_e));
  return fp;
}

// The four objectives plus the bounded compactness and the total:
//   enh  = D(I_E, I_R)                      pulls enhanced toward raw
//   iden = D(I_RE, I_R)                     raw inputs stay fixed
//   idem = D(StopGrad(I_EE), I_E)           second pass frozen: gradient
//                                           reaches theta via the inner
//                                           application only
//   comp = D(I_EE_tilde, StopGrad(I_E))     inner pass frozen: gradient via
//                                           the outer application only
//   comp_tilde = tanh(comp / (a*iden)) * a*iden   (reward, capped)
//   total = enh + li*iden + lp*idem - lc*comp_tilde
// Degenerate denominator: for a*iden below 1e-8 the pointwise limit of the
// bound is min(comp, a*iden), chosen by value with gradient through the
// selected branch.
struct Losses {
  Tensor enh, iden, idem, comp, comp_tilde, total;
};

inline Losses losses(const Tensor& i_e, const Tensor& i_re, const Tensor& i_ee,
                     const Tensor& i_ee_tilde, const Tensor& i_r, const LossWeights& w,
                     Distance kind) {
  w.validate();
  Losses L;
  L.enh = distance(i_e, i_r, kind);
  L.iden = distance(i_re, i_r, kind);
  L.idem = distance(stop_gradient(i_ee), i_e, kind);
  L.comp = distance(i_ee_tilde, stop_gradient(i_e), kind);
  double a_iden = w.a * L.iden.value();
  if (a_iden < 1e-8) {
    L.comp_tilde = L.comp.value() < a_iden ? L.comp : scale(L.iden, w.a);
  } else {
    Tensor bound = scale(L.iden, w.a);
    L.comp_tilde = mul(tanh(div(L.comp, bound)), bound);
  }
  L.total = add(L.enh, scale(L.iden, w.lambda_iden));
  L.total = add(L.total, scale(L.idem, w.lambda_idem));
  L.total = sub(L.total, scale(L.comp_tilde, w.lambda_comp));
  return L;
}

inline Losses losses(const ForwardPasses& fp, const Tensor& i_r, const LossWeights& w,
                     Distance kind) {
  return losses(fp.i_e, fp.i_re, fp.i_ee, fp.i_ee_tilde, i_r, w, kind);
}

// One CSV row of the loss curve
struct LossRecord {
  std::size_t iteration = 0;
  double enh = 0, iden = 0, idem = 0, comp = 0, comp_tilde = 0, total = 0;
};

namespace detail {

// value-only bounded compactness, same formula and guard as losses()
inline double comp_tilde_value(double comp, double iden, double a) {
  double a_iden = a * iden;
  if (a_iden < 1e-8) return comp < a_iden ? comp : a_iden;
  return std::tanh(comp / a_iden) * a_iden;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Optimizers. Parameters are updated in place between tapes; iteration
// order is the declaration order of the tensor list, so updates are
// bit-deterministic.

struct OptimizerState {
  OptimizerKind kind = OptimizerKind::kAdam;
  AdamConfig adam;
  std::uint64_t t = 0;
  std::vector<std::vector<double>> m, v;

  static OptimizerState create(const TrainConfig& cfg, const std::vector<Tensor>& params) {
    OptimizerState s;
    s.kind = cfg.optimizer;
    s.adam = cfg.adam;
    if (s.kind == OptimizerKind::kAdam) {
      for (const Tensor& p : params) {
        s.m.emplace_back(p.size(), 0.0);
        s.v.emplace_back(p.size(), 0.0);
      }
    }
    return s;
  }

  void apply(std::vector<Tensor>& params, const Gradients& grads, double lr) {
    ++t;
    for (std::size_t i = 0; i < params.size(); ++i) {
      const std::vector<double>& g = grads.at(params[i]);
      std::vector<double>& x = params[i].mutable_data();
      for (double gv : g) {
        if (!std::isfinite(gv)) {
          throw std::runtime_error("non-finite gradient in parameter tensor " + std::to_string(i));
        }
      }
      if (kind == OptimizerKind::kSgd) {
        for (std::size_t j = 0; j < x.size(); ++j) x[j] -= lr * g[j];
      } else {
        double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(t));
        double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(t));
        std::vector<double>& mi = m[i];
        std::vector<double>& vi = v[i];
        for (std::size_t j = 0; j < x.size(); ++j) {
          mi[j] = adam.beta1 * mi[j] + (1.0 - adam.beta1) * g[j];
          vi[j] = adam.beta2 * vi[j] + (1.0 - adam.beta2) * g[j] * g[j];
          double mhat = mi[j] / c1;
          double vhat = vi[j] / c2;
          x[j] -= lr * mhat / (std::sqrt(vhat) + adam.epsilon);
        }
      }
      for (double xv : x) {
        if (!std::isfinite(xv)) {
          throw std::runtime_error("non-finite parameter after update in tensor " +
                                   std::to_string(i));
        }
      }
    }
  }
};

// canonical flat parameter order: layer 0 weights, layer 0 bias, ...
inline std::vector<Tensor> parameter_tensors(const ModelParams& params) {
  std::vector<Tensor> out;
  for (std::size_t i = 0; i < params.layer_count(); ++i) {
    out.push_back(params.weights[i]);
    out.push_back(params.biases[i]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training steps. Every mode returns the full six-value record; entries the
// mode does not optimize are evaluated without a tape.

inline LossRecord domain_consistent_step(ModelParams& params, const ModelSpec& spec,
                                         const Tensor& batch_c, const Tensor& batch_r,
                                         const TrainConfig& cfg, const LossWeights& w,
                                         OptimizerState& opt) {
  GradientTape tape;
  Losses L = [&] {
    GradientTape::Scope scope(tape);
    ForwardPasses fp = forward_passes(params, spec, batch_c, batch_r);
    return losses(fp, batch_r, w, cfg.distance);
  }();
  Gradients grads = tape.backward(L.total);
  std::vector<Tensor> tensors = parameter_tensors(params);
  opt.apply(tensors, grads, cfg.learning_rate);
  return LossRecord{0,          L.enh.value(),        L.iden.value(), L.idem.value(),
                    L.comp.value(), L.comp_tilde.value(), L.total.value()};
}

inline LossRecord baseline_step(ModelParams& params, const ModelSpec& spec, const Tensor& batch_c,
                                const Tensor& batch_r, const TrainConfig& cfg,
                                const LossWeights& w, OptimizerState& opt) {
  GradientTape tape;
  Tensor i_e, loss;
  {
    GradientTape::Scope scope(tape);
    i_e = forward(params, spec, batch_c);
    loss = distance(i_e, batch_r, cfg.distance);
  }
  // untaped passes complete the record before the parameters move
  Tensor i_re = forward(params, spec, batch_r);
  Tensor i_ee = forward(params, spec, i_e);
  double iden = distance(i_re, batch_r, cfg.distance).value();
  double idem = distance(i_ee, i_e, cfg.distance).value();
  double ct = detail::comp_tilde_value(idem, iden, w.a);

  Gradients grads = tape.backward(loss);
  std::vector<Tensor> tensors = parameter_tensors(params);
  opt.apply(tensors, grads, cfg.learning_rate);
  return LossRecord{0, loss.value(), iden, idem, idem, ct, loss.value()};
}

inline LossRecord straightforward_step(ModelParams& params, const ModelSpec& spec,
                                       const Tensor& batch_c, const Tensor& batch_r,
                                       const TrainConfig& cfg, const StraightforwardConfig& sc,
                                       const LossWeights& w, OptimizerState& opt) {
  sc.validate();
  GradientTape tape;
  Tensor total, first_term, i_e, i_ee;
  {
    GradientTape::Scope scope(tape);
    Tensor cur = batch_c;
    for (std::size_t i = 0; i < sc.m; ++i) {
      cur = forward(params, spec, cur);  // gradient flows through all applications
      if (i == 0) i_e = cur;
      if (i == 1) i_ee = cur;
      Tensor d = distance(cur, batch_r, cfg.distance);
      if (i == 0) first_term = d;
      Tensor term = scale(d, sc.weights[i]);
      total = i == 0 ? term : add(total, term);
    }
  }
  Tensor i_re = forward(params, spec, batch_r);
  if (sc.m < 2) i_ee = forward(params, spec, i_e);
  double iden = distance(i_re, batch_r, cfg.distance).value();
  double idem = distance(i_ee, i_e, cfg.distance).value();
  double ct = detail::comp_tilde_value(idem, iden, w.a);

  Gradients grads = tape.backward(total);
  std::vector<Tensor> tensors = parameter_tensors(params);
  opt.apply(tensors, grads, cfg.learning_rate);
  return LossRecord{0, first_term.value(), iden, idem, idem, ct, total.value()};
}

inline LossRecord train_step(ModelParams& params, const ModelSpec& spec, const Tensor& batch_c,
                             const Tensor& batch_r, const TrainConfig& cfg,
                             const StraightforwardConfig& sc, const LossWeights& w,
                             OptimizerState& opt) {
  switch (cfg.mode) {
    case TrainMode::kBaseline:
      return baseline_step(params, spec, batch_c, batch_r, cfg, w, opt);
    case TrainMode::kStraightforward:
      return straightforward_step(params, spec, batch_c, batch_r, cfg, sc, w, opt);
    default:
      return domain_consistent_step(params, spec, batch_c, batch_r, cfg, w, opt);
  }
}

// ---------------------------------------------------------------------------
// Training loop over aligned patch pairs.

struct TrainResult {
  ModelParams params;
  std::vector<LossRecord> curve;
};

// round-trippable decimal form, stable across runs
inline std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline void write_loss_csv(const std::string& path, const std::vector<LossRecord>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot create loss curve file: " + path);
  out << "iteration,L_enh,L_iden,L_idem,L_comp,L_comp_tilde,L_total\n";
  for (const LossRecord& r : rows) {
    out << r.iteration << ',' << fmt_double(r.enh) << ',' << fmt_double(r.iden) << ','
        << fmt_double(r.idem) << ',' << fmt_double(r.comp) << ',' << fmt_double(r.comp_tilde)
        << ',' << fmt_double(r.total) << '\n';
  }
  if (!out) throw std::runtime_error("short write to loss curve file: " + path);
}

// Runs cfg.iterations steps of cfg.mode over uniformly resampled batches
// (with replacement, "batch" sub-stream of cfg.seed). Records the loss at
// every log_interval-th iteration and at the last one. When out_dir is
// non-empty, writes loss_curve.csv + model.ckpt there, and intermediate
// checkpoint_iter<k>.ckpt when checkpoint_interval > 0.
inline TrainResult train_loop(const ModelSpec& spec, const TrainConfig& cfg,
                              const StraightforwardConfig& sc, const LossWeights& w,
                              const std::vector<ImageBuffer>& patches_c,
                              const std::vector<ImageBuffer>& patches_r,
                              const std::string& out_dir = "") {
  cfg.validate();
  w.validate();
  if (cfg.mode == TrainMode::kStraightforward) sc.validate();
  if (patches_c.empty() || patches_c.size() != patches_r.size()) {
    throw std::invalid_argument("training needs equally many compressed and raw patches");
  }
  for (std::size_t i = 0; i < patches_c.size(); ++i) {
    if (!patches_c[i].same_geometry(patches_r[i])) {
      throw std::invalid_argument("patch pair " + std::to_string(i) + " is not aligned");
    }
  }
  if (!out_dir.empty()) std::filesystem::create_directories(out_dir);
  TrainResult result;
  result.params = init_params(spec, cfg.seed);
  std::vector<Tensor> tensors = parameter_tensors(result.params);
  OptimizerState opt = OptimizerState::create(cfg, tensors);
  Rng batch_rng = Rng::substream(cfg.seed, "batch");

  std::vector<ImageBuffer> bc(cfg.batch_size), br(cfg.batch_size);
  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      std::size_t idx = batch_rng.index(patches_c.size());
      bc[b] = patches_c[idx];
      br[b] = patches_r[idx];
    }
    Tensor batch_c = images_to_batch(bc);
    Tensor batch_r = images_to_batch(br);
    LossRecord rec;
    try {
      rec = train_step(result.params, spec, batch_c, batch_r, cfg, sc, w, opt);
    } catch (const std::runtime_error& e) {
      throw std::runtime_error("training aborted at iteration " + std::to_string(it) + ": " +
                               e.what());
    }
    rec.iteration = it;
    if (it % cfg.log_interval == 0 || it == cfg.iterations) {
      result.curve.push_back(rec);
    }
    if (!out_dir.empty() && cfg.checkpoint_interval > 0 && it % cfg.checkpoint_interval == 0 &&
        it != cfg.iterations) {
      save_checkpoint(result.params, spec,
                      out_dir + "/checkpoint_iter" + std::to_string(it) + ".ckpt");
    }
  }
  if (!out_dir.empty()) {
    write_loss_csv(out_dir + "/loss_curve.csv", result.curve);
    save_checkpoint(result.params, spec, out_dir + "/model.ckpt");
  }
  return result;
}

}  // namespace idemqe
