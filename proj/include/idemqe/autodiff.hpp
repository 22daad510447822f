#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace idemqe {

// Reverse-mode automatic differentiation over an explicit gradient tape.
//
// Design constraints:
//  * 64-bit floats throughout; small tensors, so clarity and determinism
//    beat raw throughput everywhere except conv2d (which runs on GEMM).
//  * One tape per training step; first-order gradients only.
//  * Broadcasting is restricted to exact-shape and scalar operands so each
//    gradient rule stays auditable.
//  * stop_gradient produces an off-tape constant: gradients cannot flow
//    into it because no tape edge exists.

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
  os << "]";
  return os.str();
}

inline std::size_t shape_numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) {
    if (d == 0) throw std::invalid_argument("tensor dimensions must be positive, got " + shape_str(s));
    n *= d;
  }
  return n;
}

class GradientTape;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  bool requires_grad = false;
  // Reference into the active tape; valid only while tape_id matches the
  // live tape. A stale pair is treated as "not on tape".
  std::uint64_t tape_id = 0;
  int node = -1;
};

inline void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) {
      throw std::runtime_error(std::string("non-finite value produced by ") + op);
    }
  }
}

}  // namespace detail

class Tensor {
 public:
  Tensor() : impl_(std::make_shared<detail::TensorImpl>()) {}

  static Tensor zeros(Shape shape) {
    return from_data(std::move(shape), {}, /*fill*/ true, 0.0);
  }
  static Tensor full(Shape shape, double value) {
    return from_data(std::move(shape), {}, true, value);
  }
  static Tensor from_data(Shape shape, std::vector<double> data) {
    return from_data(std::move(shape), std::move(data), false, 0.0);
  }
  static Tensor scalar(double value) { return full({1}, value); }
  // leaf parameter: participates in gradients
  static Tensor param(Shape shape, std::vector<double> data) {
    Tensor t = from_data(std::move(shape), std::move(data));
    t.impl_->requires_grad = true;
    return t;
  }

  const Shape& shape() const { return impl_->shape; }
  std::size_t size() const { return impl_->data.size(); }
  bool is_scalar() const { return impl_->data.size() == 1; }
  bool requires_grad() const { return impl_->requires_grad; }

  std::span<const double> data() const { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  // Raw mutable access for optimizers; never call while the tensor is
  // recorded on a live tape.
  std::vector<double>& mutable_data() { return impl_->data; }

  double value() const {
    if (!is_scalar()) {
      throw std::invalid_argument("value() requires a scalar tensor, got shape " + shape_str(shape()));
    }
    return impl_->data[0];
  }

  double at(std::size_t i) const { return impl_->data.at(i); }

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  detail::TensorImpl* impl() const { return impl_.get(); }
  const std::shared_ptr<detail::TensorImpl>& impl_ptr() const { return impl_; }

 private:
  static Tensor from_data(Shape shape, std::vector<double> data, bool fill, double fill_value) {
    Tensor t;
    std::size_t n = shape_numel(shape);
    if (fill) {
      data.assign(n, fill_value);
    } else if (data.size() != n) {
      throw std::invalid_argument("data length " + std::to_string(data.size()) +
                                  " does not match shape " + shape_str(shape));
    }
    t.impl_->shape = std::move(shape);
    t.impl_->data = std::move(data);
    return t;
  }

  std::shared_ptr<detail::TensorImpl> impl_;
};

// Gradient map returned by backward(): zeros for requires_grad tensors the
// loss never reached.
class Gradients {
 public:
  const std::vector<double>& at(const Tensor& t) const {
    auto it = grads_.find(t.impl());
    if (it != grads_.end()) return it->second;
    auto [jt, inserted] = zero_cache_.try_emplace(t.impl(), std::vector<double>(t.size(), 0.0));
    return jt->second;
  }

  // true iff the loss actually depended on t (zero-filled leaves are "set"
  // but not reached)
  bool reached(const Tensor& t) const { return reached_.count(t.impl()) > 0; }

  void set(const std::shared_ptr<detail::TensorImpl>& impl, std::vector<double> g, bool reached) {
    keepalive_.push_back(impl);
    grads_[impl.get()] = std::move(g);
    if (reached) reached_.insert(impl.get());
  }

 private:
  std::unordered_map<const detail::TensorImpl*, std::vector<double>> grads_;
  std::unordered_set<const detail::TensorImpl*> reached_;
  mutable std::unordered_map<const detail::TensorImpl*, std::vector<double>> zero_cache_;
  std::vector<std::shared_ptr<detail::TensorImpl>> keepalive_;
};

class GradientTape {
 public:
  GradientTape() : id_(next_id()) {}
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;
  ~GradientTape() {
    if (active_tape() == this) active_tape() = nullptr;
  }

  // RAII activation; ops record onto the innermost active tape.
  class Scope {
   public:
    explicit Scope(GradientTape& tape) : prev_(active_tape()) { active_tape() = &tape; }
    ~Scope() { active_tape() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    GradientTape* prev_;
  };

  static GradientTape* active() { return active_tape(); }

  std::uint64_t id() const { return id_; }
  std::size_t node_count() const { return nodes_.size(); }
  bool frozen() const { return frozen_; }

  // Effective tape node for an op input: an existing node on this tape, a
  // fresh leaf for requires_grad tensors, or -1 for plain constants.
  int input_node(const Tensor& t) {
    detail::TensorImpl* impl = t.impl();
    if (impl->tape_id == id_ && impl->node >= 0) return impl->node;
    if (!impl->requires_grad) return -1;
    return register_leaf(t.impl_ptr());
  }

  int register_leaf(const std::shared_ptr<detail::TensorImpl>& impl) {
    if (impl->tape_id == id_ && impl->node >= 0) return impl->node;
    int node = add_node({}, {});
    leaves_.emplace_back(node, impl);
    impl->tape_id = id_;
    impl->node = node;
    return node;
  }

  using BackwardFn = std::function<void(GradientTape&, const std::vector<double>&)>;

  int add_node(std::vector<int> parents, BackwardFn backward) {
    if (frozen_) throw std::logic_error("cannot record onto a frozen gradient tape");
    nodes_.push_back(Node{std::move(parents), std::move(backward)});
    grads_.emplace_back();
    return static_cast<int>(nodes_.size()) - 1;
  }

  void attach_output(Tensor& out, int node) {
    out.impl()->tape_id = id_;
    out.impl()->node = node;
  }

  // Accumulate into a node's gradient buffer (allocated lazily so branches
  // the loss never reaches cost nothing in the reverse sweep).
  void accumulate(int node, std::size_t numel, const double* g, std::size_t count) {
    auto& buf = grads_[static_cast<std::size_t>(node)];
    if (buf.empty()) buf.assign(numel, 0.0);
    for (std::size_t i = 0; i < count; ++i) buf[i] += g[i];
  }
  void accumulate_at(int node, std::size_t numel, std::size_t offset, double g) {
    auto& buf = grads_[static_cast<std::size_t>(node)];
    if (buf.empty()) buf.assign(numel, 0.0);
    buf[offset] += g;
  }

  std::vector<double>* grad_buffer(int node) {
    auto& buf = grads_[static_cast<std::size_t>(node)];
    return buf.empty() ? nullptr : &buf;
  }

  // Reverse sweep from a scalar loss. Visits each recorded node at most
  // once, in reverse topological (= recording) order. Repeated use of a
  // tape is rejected; one tape serves one backward pass.
  Gradients backward(const Tensor& loss) {
    if (!loss.is_scalar()) {
      throw std::invalid_argument("backward requires a scalar loss, got shape " + shape_str(loss.shape()));
    }
    detail::TensorImpl* impl = loss.impl();
    if (impl->tape_id != id_ || impl->node < 0) {
      throw std::invalid_argument("loss was not produced on this gradient tape");
    }
    if (frozen_) throw std::logic_error("gradient tape already replayed");
    frozen_ = true;

    grads_[static_cast<std::size_t>(impl->node)] = {1.0};
    for (std::size_t i = nodes_.size(); i-- > 0;) {
      auto& g = grads_[i];
      if (g.empty() || !nodes_[i].backward) continue;
      nodes_[i].backward(*this, g);
    }

    Gradients out;
    for (auto& [node, leaf] : leaves_) {
      if (!leaf->requires_grad) continue;
      auto& buf = grads_[static_cast<std::size_t>(node)];
      bool was_reached = !buf.empty();
      if (!was_reached) buf.assign(leaf->data.size(), 0.0);
      out.set(leaf, std::move(buf), was_reached);
    }
    return out;
  }

 private:
  struct Node {
    std::vector<int> parents;
    BackwardFn backward;
  };

  static std::uint64_t next_id() {
    static std::uint64_t counter = 0;
    return ++counter;
  }
  static GradientTape*& active_tape() {
    thread_local GradientTape* tape = nullptr;
    return tape;
  }

  std::uint64_t id_;
  std::vector<Node> nodes_;
  std::vector<std::vector<double>> grads_;
  std::vector<std::pair<int, std::shared_ptr<detail::TensorImpl>>> leaves_;
  bool frozen_ = false;
};

// ---------------------------------------------------------------------------
// Primitive operations.

namespace detail {

enum class Broadcast { kNone, kLeftScalar, kRightScalar };

inline Broadcast broadcast_kind(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() == b.shape()) return Broadcast::kNone;
  if (a.is_scalar()) return Broadcast::kLeftScalar;
  if (b.is_scalar()) return Broadcast::kRightScalar;
  throw std::invalid_argument(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) +
                              " and " + shape_str(b.shape()));
}

// Record an elementwise binary op. fa/fb map the output gradient element to
// the two input gradients given (a_i, b_i).
template <typename FwdFn, typename GradA, typename GradB>
Tensor binary_op(const char* name, const Tensor& a, const Tensor& b, FwdFn fwd, GradA ga, GradB gb) {
  Broadcast bc = broadcast_kind(a, b, name);
  const Tensor& big = (bc == Broadcast::kLeftScalar) ? b : a;
  std::size_t n = big.size();
  std::vector<double> out(n);
  const auto& av = a.vec();
  const auto& bv = b.vec();
  for (std::size_t i = 0; i < n; ++i) {
    double x = av[bc == Broadcast::kLeftScalar ? 0 : i];
    double y = bv[bc == Broadcast::kRightScalar ? 0 : i];
    out[i] = fwd(x, y);
  }
  check_finite(out, name);
  Tensor result = Tensor::from_data(big.shape(), std::move(out));

  GradientTape* tape = GradientTape::active();
  if (!tape) return result;
  int na = tape->input_node(a);
  int nb = tape->input_node(b);
  if (na < 0 && nb < 0) return result;

  auto ai = a.impl_ptr();
  auto bi = b.impl_ptr();
  int node = tape->add_node(
      {na, nb}, [na, nb, bc, ai, bi, ga, gb](GradientTape& t, const std::vector<double>& gout) {
        std::size_t n = gout.size();
        for (std::size_t i = 0; i < n; ++i) {
          double x = ai->data[bc == Broadcast::kLeftScalar ? 0 : i];
          double y = bi->data[bc == Broadcast::kRightScalar ? 0 : i];
          double g = gout[i];
          if (na >= 0) {
            t.accumulate_at(na, ai->data.size(), bc == Broadcast::kLeftScalar ? 0 : i, ga(g, x, y));
          }
          if (nb >= 0) {
            t.accumulate_at(nb, bi->data.size(), bc == Broadcast::kRightScalar ? 0 : i, gb(g, x, y));
          }
        }
      });
  tape->attach_output(result, node);
  return result;
}

template <typename FwdFn, typename GradFn>
Tensor unary_op(const char* name, const Tensor& a, FwdFn fwd, GradFn grad) {
  std::size_t n = a.size();
  std::vector<double> out(n);
  const auto& av = a.vec();
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(av[i]);
  check_finite(out, name);
  Tensor result = Tensor::from_data(a.shape(), std::move(out));

  GradientTape* tape = GradientTape::active();
  if (!tape) return result;
  int na = tape->input_node(a);
  if (na < 0) return result;

  auto ai = a.impl_ptr();
  auto oi = result.impl_ptr();
  int node = tape->add_node({na}, [na, ai, oi, grad](GradientTape& t, const std::vector<double>& gout) {
    std::size_t n = gout.size();
    for (std::size_t i = 0; i < n; ++i) {
      t.accumulate_at(na, ai->data.size(), i, grad(gout[i], ai->data[i], oi->data[i]));
    }
  });
  tape->attach_output(result, node);
  return result;
}

}  // namespace detail

// Identity pass-through whose result is a plain constant: during backward the
// gradient arriving at the result is discarded and never reaches x.
inline Tensor stop_gradient(const Tensor& x) {
  return Tensor::from_data(x.shape(), std::vector<double>(x.vec()));
}

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "add", a, b, [](double x, double y) { return x + y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return g; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "sub", a, b, [](double x, double y) { return x - y; },
      [](double g, double, double) { return g; }, [](double g, double, double) { return -g; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "mul", a, b, [](double x, double y) { return x * y; },
      [](double g, double, double y) { return g * y; }, [](double g, double x, double) { return g * x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      "div", a, b, [](double x, double y) { return x / y; },
      [](double g, double, double y) { return g / y; },
      [](double g, double x, double y) { return -g * x / (y * y); });
}

inline Tensor scale(const Tensor& a, double c) {
  return detail::unary_op(
      "scale", a, [c](double x) { return c * x; }, [c](double g, double, double) { return c * g; });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary_op(
      "relu", a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double g, double x, double) { return x > 0.0 ? g : 0.0; });
}

inline Tensor tanh(const Tensor& a) {
  return detail::unary_op(
      "tanh", a, [](double x) { return std::tanh(x); },
      [](double g, double, double y) { return g * (1.0 - y * y); });
}

inline Tensor abs(const Tensor& a) {
  return detail::unary_op(
      "abs", a, [](double x) { return std::fabs(x); },
      [](double g, double x, double) { return x > 0.0 ? g : (x < 0.0 ? -g : 0.0); });
}

inline Tensor mean(const Tensor& a) {
  std::size_t n = a.size();
  double sum = 0.0;
  for (double x : a.vec()) sum += x;
  double m = sum / static_cast<double>(n);
  if (!std::isfinite(m)) throw std::runtime_error("non-finite value produced by mean");
  Tensor result = Tensor::scalar(m);

  GradientTape* tape = GradientTape::active();
  if (!tape) return result;
  int na = tape->input_node(a);
  if (na < 0) return result;

  std::size_t numel = n;
  int node = tape->add_node({na}, [na, numel](GradientTape& t, const std::vector<double>& gout) {
    double g = gout[0] / static_cast<double>(numel);
    std::vector<double> grad(numel, g);
    t.accumulate(na, numel, grad.data(), numel);
  });
  tape->attach_output(result, node);
  return result;
}

// ---------------------------------------------------------------------------
// conv2d: NCHW input, OIKK weights, O bias, zero "same" padding, square odd
// kernels. Forward and both backward passes run as im2col + GEMM.

namespace detail {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct ConvDims {
  std::size_t batch, cin, h, w, cout, k;
};

inline ConvDims conv_check(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  const Shape& is = input.shape();
  const Shape& ws = weights.shape();
  if (is.size() != 4) throw std::invalid_argument("conv2d: input must be NCHW, got " + shape_str(is));
  if (ws.size() != 4) throw std::invalid_argument("conv2d: weights must be OIKK, got " + shape_str(ws));
  if (ws[2] != ws[3]) throw std::invalid_argument("conv2d: kernel must be square, got " + shape_str(ws));
  if (ws[2] % 2 == 0) throw std::invalid_argument("conv2d: kernel side must be odd, got " + shape_str(ws));
  if (is[1] != ws[1]) {
    throw std::invalid_argument("conv2d: input channels " + std::to_string(is[1]) +
                                " do not match weight channels " + std::to_string(ws[1]));
  }
  if (bias.shape() != Shape{ws[0]}) {
    throw std::invalid_argument("conv2d: bias shape " + shape_str(bias.shape()) +
                                " must be [" + std::to_string(ws[0]) + "]");
  }
  return ConvDims{is[0], is[1], is[2], is[3], ws[0], ws[2]};
}

// gather one batch item into (cin*k*k) x (h*w) column matrix, zero padding
inline void im2col(const double* in, const ConvDims& d, double* cols) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(d.k / 2);
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(d.h);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(d.w);
  const std::size_t hw = d.h * d.w;
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < d.cin; ++ci) {
    for (std::size_t ky = 0; ky < d.k; ++ky) {
      for (std::size_t kx = 0; kx < d.k; ++kx, ++row) {
        double* col = cols + row * hw;
        std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          std::ptrdiff_t iy = y + dy;
          double* dst = col + y * W;
          if (iy < 0 || iy >= H) {
            std::fill(dst, dst + W, 0.0);
            continue;
          }
          const double* src = in + (ci * d.h + static_cast<std::size_t>(iy)) * d.w;
          for (std::ptrdiff_t x = 0; x < W; ++x) {
            std::ptrdiff_t ix = x + dx;
            dst[x] = (ix < 0 || ix >= W) ? 0.0 : src[ix];
          }
        }
      }
    }
  }
}

// scatter-add (cin*k*k) x (h*w) columns back onto one batch item
inline void col2im_add(const double* cols, const ConvDims& d, double* out) {
  const std::ptrdiff_t pad = static_cast<std::ptrdiff_t>(d.k / 2);
  const std::ptrdiff_t H = static_cast<std::ptrdiff_t>(d.h);
  const std::ptrdiff_t W = static_cast<std::ptrdiff_t>(d.w);
  const std::size_t hw = d.h * d.w;
  std::size_t row = 0;
  for (std::size_t ci = 0; ci < d.cin; ++ci) {
    for (std::size_t ky = 0; ky < d.k; ++ky) {
      for (std::size_t kx = 0; kx < d.k; ++kx, ++row) {
        const double* col = cols + row * hw;
        std::ptrdiff_t dy = static_cast<std::ptrdiff_t>(ky) - pad;
        std::ptrdiff_t dx = static_cast<std::ptrdiff_t>(kx) - pad;
        for (std::ptrdiff_t y = 0; y < H; ++y) {
          std::ptrdiff_t iy = y + dy;
          if (iy < 0 || iy >= H) continue;
          double* dst = out + (ci * d.h + static_cast<std::size_t>(iy)) * d.w;
          const double* src = col + y * W;
          for (std::ptrdiff_t x = 0; x < W; ++x) {
            std::ptrdiff_t ix = x + dx;
            if (ix >= 0 && ix < W) dst[ix] += src[x];
          }
        }
      }
    }
  }
}

}  // namespace detail

inline Tensor conv2d(const Tensor& input, const Tensor& weights, const Tensor& bias) {
  using detail::EMat;
  detail::ConvDims d = detail::conv_check(input, weights, bias);
  const std::size_t hw = d.h * d.w;
  const std::size_t ckk = d.cin * d.k * d.k;

  std::vector<double> out(d.batch * d.cout * hw);
  std::vector<double> cols(ckk * hw);
  Eigen::Map<const EMat> wmat(weights.vec().data(), static_cast<Eigen::Index>(d.cout),
                              static_cast<Eigen::Index>(ckk));
  for (std::size_t n = 0; n < d.batch; ++n) {
    detail::im2col(input.vec().data() + n * d.cin * hw, d, cols.data());
    Eigen::Map<const EMat> cmat(cols.data(), static_cast<Eigen::Index>(ckk),
                                static_cast<Eigen::Index>(hw));
    Eigen::Map<EMat> omat(out.data() + n * d.cout * hw, static_cast<Eigen::Index>(d.cout),
                          static_cast<Eigen::Index>(hw));
    omat.noalias() = wmat * cmat;
    for (std::size_t co = 0; co < d.cout; ++co) {
      omat.row(static_cast<Eigen::Index>(co)).array() += bias.vec()[co];
    }
  }
  detail::check_finite(out, "conv2d");
  Tensor result = Tensor::from_data({d.batch, d.cout, d.h, d.w}, std::move(out));

  GradientTape* tape = GradientTape::active();
  if (!tape) return result;
  int ni = tape->input_node(input);
  int nw = tape->input_node(weights);
  int nb = tape->input_node(bias);
  if (ni < 0 && nw < 0 && nb < 0) return result;

  auto ii = input.impl_ptr();
  auto wi = weights.impl_ptr();
  int node = tape->add_node(
      {ni, nw, nb}, [d, ni, nw, nb, ii, wi](GradientTape& t, const std::vector<double>& gout) {
        const std::size_t hw = d.h * d.w;
        const std::size_t ckk = d.cin * d.k * d.k;
        Eigen::Map<const EMat> wmat(wi->data.data(), static_cast<Eigen::Index>(d.cout),
                                    static_cast<Eigen::Index>(ckk));
        std::vector<double> cols(ckk * hw);
        std::vector<double> dcols(ni >= 0 ? ckk * hw : 0);
        std::vector<double> dw(nw >= 0 ? wi->data.size() : 0, 0.0);
        std::vector<double> dx(ni >= 0 ? ii->data.size() : 0, 0.0);
        std::vector<double> db(nb >= 0 ? d.cout : 0, 0.0);

        for (std::size_t n = 0; n < d.batch; ++n) {
          Eigen::Map<const EMat> gmat(gout.data() + n * d.cout * hw,
                                      static_cast<Eigen::Index>(d.cout), static_cast<Eigen::Index>(hw));
          if (nw >= 0 || ni >= 0) {
            // weight grad needs the input columns; input grad reuses W^T
            detail::im2col(ii->data.data() + n * d.cin * hw, d, cols.data());
            Eigen::Map<const EMat> cmat(cols.data(), static_cast<Eigen::Index>(ckk),
                                        static_cast<Eigen::Index>(hw));
            if (nw >= 0) {
              Eigen::Map<EMat> dwmat(dw.data(), static_cast<Eigen::Index>(d.cout),
                                     static_cast<Eigen::Index>(ckk));
              dwmat.noalias() += gmat * cmat.transpose();
            }
            if (ni >= 0) {
              Eigen::Map<EMat> dcmat(dcols.data(), static_cast<Eigen::Index>(ckk),
                                     static_cast<Eigen::Index>(hw));
              dcmat.noalias() = wmat.transpose() * gmat;
              detail::col2im_add(dcols.data(), d, dx.data() + n * d.cin * hw);
            }
          }
          if (nb >= 0) {
            // sequential sum: Eigen redux order varies with heap alignment,
            // which would break bit-level run-to-run determinism
            const double* gp = gout.data() + n * d.cout * hw;
            for (std::size_t co = 0; co < d.cout; ++co) {
              double s = 0.0;
              const double* row = gp + co * hw;
              for (std::size_t i = 0; i < hw; ++i) s += row[i];
              db[co] += s;
            }
          }
        }
        if (ni >= 0) t.accumulate(ni, dx.size(), dx.data(), dx.size());
        if (nw >= 0) t.accumulate(nw, dw.size(), dw.data(), dw.size());
        if (nb >= 0) t.accumulate(nb, db.size(), db.data(), db.size());
      });
  tape->attach_output(result, node);
  return result;
}

}  // namespace idemqe
