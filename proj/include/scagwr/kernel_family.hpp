#pragma once

#include <string>
#include <string_view>

#include "scagwr/error.hpp"

namespace scagwr {

/// Base distance-decay kernels. Both are positive everywhere and equal 1 at
/// distance zero, which the polynomial kernel requires.
enum class KernelFamily { gaussian, exponential };

inline std::string_view to_string(KernelFamily f) {
  return f == KernelFamily::gaussian ? "gaussian" : "exponential";
}

inline KernelFamily parse_kernel_family(std::string_view name) {
  if (name == "gaussian") return KernelFamily::gaussian;
  if (name == "exponential") return KernelFamily::exponential;
  if (name == "bisquare" || name == "bi-square" || name == "tricube" || name == "tri-cube") {
    throw ValidationError("kernel '" + std::string(name) +
                          "' has a hard threshold and cannot serve as a base kernel; "
                          "use gaussian or exponential");
  }
  throw ValidationError("unknown kernel family '" + std::string(name) + "'");
}

}  // namespace scagwr
