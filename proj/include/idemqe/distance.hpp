#pragma once

#include <idemqe/autodiff.hpp>

#include <stdexcept>
#include <string>

namespace idemqe {

enum class Distance { kL1, kL2 };

inline Distance distance_from_string(const std::string& s) {
  if (s == "l1" || s == "L1") return Distance::kL1;
  if (s == "l2" || s == "L2") return Distance::kL2;
  throw std::invalid_argument("unknown distance kind: " + s + " (expected l1 or l2)");
}

inline const char* to_string(Distance d) { return d == Distance::kL1 ? "l1" : "l2"; }

// Scalar distance between equally shaped tensors, differentiable on the
// active tape. L1 = mean |a-b|, L2 = mean (a-b)^2.
inline Tensor distance(const Tensor& a, const Tensor& b, Distance kind) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("distance: shape mismatch " + shape_str(a.shape()) + " vs " +
                                shape_str(b.shape()));
  }
  Tensor diff = sub(a, b);
  if (kind == Distance::kL1) return mean(abs(diff));
  return mean(mul(diff, diff));
}

}  // namespace idemqe
