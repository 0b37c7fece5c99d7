#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Dense>

namespace smpc {

using Eigen::MatrixXd;
using Eigen::RowVectorXd;
using Eigen::VectorXd;

/// Error categories raised by the toolkit. The C API maps them onto status
/// codes; the CLI maps them onto process exit codes.
enum class Errc {
  kBadParams,
  kDimensionMismatch,
  kEmptySet,
  kUnbounded,
  kNotStabilizable,
  kNotSchur,
  kNoFeasiblePair,
  kGridTooCoarse,
  kEmptyTerminalSet,
  kNonConvergence,
  kNonContractive,
  kInfeasible,
  kMaxIterations,
  kSchema,
  kDimensionUnsupported,
  kTighteningInfeasible,
  kIo,
};

std::string_view to_string(Errc code);

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

[[noreturn]] inline void fail(Errc code, const std::string& what) {
  throw Error(code, std::string(to_string(code)) + ": " + what);
}

inline void require(bool condition, Errc code, const std::string& what) {
  if (!condition) fail(code, what);
}

}  // namespace smpc
