#pragma once

namespace idemqe {

// Toolkit version, stamped into every run's config echo so an artifact
// directory always records what produced it.
inline constexpr const char* kVersion = "0.1.0";

}  // namespace idemqe
