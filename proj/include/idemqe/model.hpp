#pragma once

#include <idemqe/autodiff.hpp>
#include <idemqe/image.hpp>
#include <idemqe/metrics.hpp>
#include <idemqe/rng.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace idemqe {

enum class ModelFamily : std::uint32_t { kArcnnLike = 0, kDncnnLike = 1, kMlp = 2 };

inline const char* to_string(ModelFamily f) {
  switch (f) {
    case ModelFamily::kArcnnLike:
      return "arcnn_like";
    case ModelFamily::kDncnnLike:
      return "dncnn_like";
    default:
      return "mlp";
  }
}

inline ModelFamily model_family_from_string(const std::string& s) {
  if (s == "arcnn_like") return ModelFamily::kArcnnLike;
  if (s == "dncnn_like") return ModelFamily::kDncnnLike;
  if (s == "mlp") return ModelFamily::kMlp;
  throw std::invalid_argument("unknown model family: " + s);
}

// Small convolutional enhancement networks.
//  * arcnn_like: four stages (feature extraction 9x9, enhancement 7x7,
//    mapping 1x1, reconstruction 5x5) with hidden widths h and h/2; plain
//    stack, no residual.
//  * dncnn_like: depth 3x3 layers at a fixed hidden width; the stack
//    predicts a correction added to the input (residual), so zero
//    parameters give the exact identity.
//  * mlp: 1x1 kernels throughout, so on Nx(dim)x1x1 inputs each layer is a
//    fully-connected map dim -> h -> ... -> h -> dim. Lets low-dimensional
//    point models run through the exact same forward/loss/optimizer code
//    as the image models.
// Rectifier on all hidden layers, linear output layer, no normalization.
struct ModelSpec {
  ModelFamily family = ModelFamily::kDncnnLike;
  std::size_t channels_in = 1;
  std::size_t channels_hidden = 32;
  std::size_t depth = 8;  // total conv layers
  bool residual = true;

  struct Layer {
    std::size_t cin, cout, kernel;
    bool relu;
  };

  static ModelSpec arcnn_like(std::size_t channels_in, std::size_t hidden = 32) {
    if (hidden < 2 || hidden % 2 != 0) {
      throw std::invalid_argument("arcnn_like hidden width must be even and >= 2, got " +
                                  std::to_string(hidden));
    }
    return ModelSpec{ModelFamily::kArcnnLike, channels_in, hidden, 4, false};
  }

  static ModelSpec dncnn_like(std::size_t channels_in, std::size_t depth = 8,
                              std::size_t hidden = 32) {
    if (depth < 3) {
      throw std::invalid_argument("dncnn_like depth must be >= 3, got " + std::to_string(depth));
    }
    return ModelSpec{ModelFamily::kDncnnLike, channels_in, hidden, depth, true};
  }

  static ModelSpec mlp(std::size_t dim, std::size_t hidden, std::size_t depth = 3,
                       bool residual = true) {
    return ModelSpec{ModelFamily::kMlp, dim, hidden, depth, residual};
  }

  void validate() const {
    if (family == ModelFamily::kMlp) {
      if (channels_in == 0 || channels_hidden == 0) {
        throw std::invalid_argument("mlp input and hidden widths must be positive");
      }
      if (depth < 2) throw std::invalid_argument("mlp needs at least 2 layers");
      return;
    }
    if (channels_in != 1 && channels_in != 3) {
      throw std::invalid_argument("model channels_in must be 1 or 3, got " +
                                  std::to_string(channels_in));
    }
    if (family == ModelFamily::kArcnnLike) {
      if (depth != 4 || residual) {
        throw std::invalid_argument("arcnn_like must have exactly 4 layers and no residual");
      }
      if (channels_hidden < 2 || channels_hidden % 2 != 0) {
        throw std::invalid_argument("arcnn_like hidden width must be even and >= 2");
      }
    } else {
      if (depth < 3 || !residual) {
        throw std::invalid_argument("dncnn_like must have depth >= 3 and residual output");
      }
      if (channels_hidden == 0) throw std::invalid_argument("hidden width must be positive");
    }
  }

  std::vector<Layer> layers() const {
    validate();
    std::vector<Layer> out;
    if (family == ModelFamily::kArcnnLike) {
      std::size_t h1 = channels_hidden, h2 = channels_hidden / 2;
      out.push_back({channels_in, h1, 9, true});
      out.push_back({h1, h2, 7, true});
      out.push_back({h2, h2, 1, true});
      out.push_back({h2, channels_in, 5, false});
    } else {
      std::size_t k = family == ModelFamily::kMlp ? 1 : 3;
      out.push_back({channels_in, channels_hidden, k, true});
      for (std::size_t i = 2; i < depth; ++i) {
        out.push_back({channels_hidden, channels_hidden, k, true});
      }
      out.push_back({channels_hidden, channels_in, k, false});
    }
    return out;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const Layer& l : layers()) n += l.cout * l.cin * l.kernel * l.kernel + l.cout;
    return n;
  }

  bool operator==(const ModelSpec&) const = default;
};

// Ordered (weights, bias) pairs, one per layer, all participating in
// gradients. Weight layout OIKK, bias O.
struct ModelParams {
  std::vector<Tensor> weights;
  std::vector<Tensor> biases;

  std::size_t layer_count() const { return weights.size(); }

  void check_consistent(const ModelSpec& spec) const {
    auto layers = spec.layers();
    if (weights.size() != layers.size() || biases.size() != layers.size()) {
      throw std::invalid_argument("parameter list length does not match model layers");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
      Shape ws{layers[i].cout, layers[i].cin, layers[i].kernel, layers[i].kernel};
      if (weights[i].shape() != ws || biases[i].shape() != Shape{layers[i].cout}) {
        throw std::invalid_argument("parameter shapes inconsistent with spec at layer " +
                                    std::to_string(i));
      }
    }
  }
};

// Zero-mean normal weights with stddev sqrt(2 / fan_in) per layer, zero
// biases; deterministic under seed.
inline ModelParams init_params(const ModelSpec& spec, std::uint64_t seed) {
  ModelParams params;
  Rng rng = Rng::substream(seed, "init");
  for (const ModelSpec::Layer& l : spec.layers()) {
    std::size_t fan_in = l.cin * l.kernel * l.kernel;
    double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
    std::vector<double> w(l.cout * fan_in);
    for (double& v : w) v = stddev * rng.normal();
    params.weights.push_back(Tensor::param({l.cout, l.cin, l.kernel, l.kernel}, std::move(w)));
    params.biases.push_back(Tensor::param({l.cout}, std::vector<double>(l.cout, 0.0)));
  }
  return params;
}

// F(x; theta): NCHW in, NCHW out, spatial shape preserved, raw output (no
// clamping; serialization boundaries clamp). Participates in the active
// tape.
inline Tensor forward(const ModelParams& params, const ModelSpec& spec, const Tensor& x) {
  params.check_consistent(spec);
  const Shape& s = x.shape();
  if (s.size() != 4 || s[1] != spec.channels_in) {
    throw std::invalid_argument("model input must be Nx" + std::to_string(spec.channels_in) +
                                "xHxW, got " + shape_str(s));
  }
  Tensor h = x;
  auto layers = spec.layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    h = conv2d(h, params.weights[i], params.biases[i]);
    if (layers[i].relu) h = relu(h);
  }
  return spec.residual ? add(x, h) : h;
}

// one whole-image enhancement pass outside any tape
inline ImageBuffer enhance_image(const ModelParams& params, const ModelSpec& spec,
                                 const ImageBuffer& img, bool clamp = true) {
  return tensor_to_image(forward(params, spec, image_to_tensor(img)), clamp);
}

// delta(x) = D(F(x), x) on the raw (unclamped) model output
inline double drift(const ModelParams& params, const ModelSpec& spec, const ImageBuffer& x,
                    Distance kind) {
  Tensor tx = image_to_tensor(x);
  return distance(forward(params, spec, tx), tx, kind).value();
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic, format version, spec, then each layer's
// weights and bias as raw 64-bit little-endian reals in declaration order.
// Write/read round-trip is bit-exact.

namespace detail {

constexpr char kCheckpointMagic[8] = {'I', 'D', 'Q', 'E', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void put_raw(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <typename T>
T get_raw(const std::string& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) {
    throw std::runtime_error("checkpoint truncated at byte " + std::to_string(pos));
  }
  T v;
  std::memcpy(&v, in.data() + pos, sizeof(T));
  pos += sizeof(T);
  return v;
}

}  // namespace detail

inline void save_checkpoint(const ModelParams& params, const ModelSpec& spec,
                            const std::string& path) {
  params.check_consistent(spec);
  std::string out;
  out.append(detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic));
  detail::put_raw<std::uint32_t>(out, detail::kCheckpointVersion);
  detail::put_raw<std::uint32_t>(out, static_cast<std::uint32_t>(spec.family));
  detail::put_raw<std::uint64_t>(out, spec.channels_in);
  detail::put_raw<std::uint64_t>(out, spec.channels_hidden);
  detail::put_raw<std::uint64_t>(out, spec.depth);
  detail::put_raw<std::uint8_t>(out, spec.residual ? 1 : 0);
  detail::put_raw<std::uint64_t>(out, params.layer_count());
  for (std::size_t i = 0; i < params.layer_count(); ++i) {
    for (const Tensor* t : {&params.weights[i], &params.biases[i]}) {
      detail::put_raw<std::uint64_t>(out, t->size());
      for (double v : t->vec()) detail::put_raw<double>(out, v);
    }
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw std::runtime_error("cannot create checkpoint file: " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw std::runtime_error("short write to checkpoint file: " + path);
}

inline std::pair<ModelSpec, ModelParams> load_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open checkpoint file: " + path);
  std::string in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  std::size_t pos = 0;
  if (in.size() < sizeof(detail::kCheckpointMagic) ||
      std::memcmp(in.data(), detail::kCheckpointMagic, sizeof(detail::kCheckpointMagic)) != 0) {
    throw std::runtime_error("not a checkpoint file (bad magic): " + path);
  }
  pos = sizeof(detail::kCheckpointMagic);
  std::uint32_t version = detail::get_raw<std::uint32_t>(in, pos);
  if (version != detail::kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  ModelSpec spec;
  std::uint32_t family = detail::get_raw<std::uint32_t>(in, pos);
  if (family > 2) throw std::runtime_error("checkpoint has unknown model family");
  spec.family = static_cast<ModelFamily>(family);
  spec.channels_in = detail::get_raw<std::uint64_t>(in, pos);
  spec.channels_hidden = detail::get_raw<std::uint64_t>(in, pos);
  spec.depth = detail::get_raw<std::uint64_t>(in, pos);
  spec.residual = detail::get_raw<std::uint8_t>(in, pos) != 0;
  auto layers = spec.layers();  // validates
  std::uint64_t layer_count = detail::get_raw<std::uint64_t>(in, pos);
  if (layer_count != layers.size()) {
    throw std::runtime_error("checkpoint layer count does not match its spec");
  }
  ModelParams params;
  for (const ModelSpec::Layer& l : layers) {
    Shape ws{l.cout, l.cin, l.kernel, l.kernel};
    for (int which = 0; which < 2; ++which) {
      Shape shape = which == 0 ? ws : Shape{l.cout};
      std::uint64_t numel = detail::get_raw<std::uint64_t>(in, pos);
      if (numel != shape_numel(shape)) {
        throw std::runtime_error("checkpoint array size mismatch at byte " + std::to_string(pos));
      }
      std::vector<double> data(numel);
      for (double& v : data) v = detail::get_raw<double>(in, pos);
      (which == 0 ? params.weights : params.biases).push_back(Tensor::param(shape, std::move(data)));
    }
  }
  if (pos != in.size()) {
    throw std::runtime_error("checkpoint has " + std::to_string(in.size() - pos) +
                             " trailing bytes");
  }
  return {spec, std::move(params)};
}

}  // namespace idemqe
