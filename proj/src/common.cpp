#include "smpc/common.hpp"

namespace smpc {

std::string_view to_string(Errc code) {
  switch (code) {
    case Errc::kBadParams: return "BadParams";
    case Errc::kDimensionMismatch: return "DimensionMismatch";
    case Errc::kEmptySet: return "EmptySet";
    case Errc::kUnbounded: return "Unbounded";
    case Errc::kNotStabilizable: return "NotStabilizable";
    case Errc::kNotSchur: return "NotSchur";
    case Errc::kNoFeasiblePair: return "NoFeasiblePair";
    case Errc::kGridTooCoarse: return "GridTooCoarse";
    case Errc::kEmptyTerminalSet: return "EmptyTerminalSet";
    case Errc::kNonConvergence: return "NonConvergence";
    case Errc::kNonContractive: return "NonContractive";
    case Errc::kInfeasible: return "Infeasible";
    case Errc::kMaxIterations: return "MaxIterations";
    case Errc::kSchema: return "Schema";
    case Errc::kDimensionUnsupported: return "DimensionUnsupported";
    case Errc::kTighteningInfeasible: return "TighteningInfeasible";
    case Errc::kIo: return "Io";
  }
  return "Unknown";
}

}  // namespace smpc
