#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "smpc/disturbance.hpp"
#include "smpc/lti.hpp"
#include "smpc/polytope.hpp"

namespace smpc {

/// Sample count N and discard count r certifying, with confidence 1 − β,
/// that the sampled quantile has violation probability in [ε_l, ε_u].
struct SampledQuantileCertificate {
  std::int64_t samples = 0;
  std::int64_t discard = 0;
  double beta = 0.0;
  double eps_l = 0.0;
  double eps_u = 0.0;
};

/// Smallest N admitting an integer r with
///   r ≤ ε_u N − sqrt(2 ε_u N ln(1/β)),
///   r ≥ ε_l N − 1 + sqrt(3 ε_l N ln(2/β)),  ε_u N > r.
SampledQuantileCertificate campi_sample_size(double eps_l, double eps_u,
                                             double beta);
/// Re-substitutes (N, r) into both bounds.
bool certificate_holds(const SampledQuantileCertificate& cert);

/// The (N − r)-th smallest value, i.e. the maximum after discarding the r
/// largest. `values` is reordered.
double order_statistic(std::span<double> values, std::int64_t discard);

/// h_j − (N − r)-th order statistic of the first N samples.
double quantile_tighten(std::span<const double> samples, double h_j,
                        const SampledQuantileCertificate& cert);

struct ConstraintSpec {
  MatrixXd H;  // state rows, p × n
  VectorXd h;
  VectorXd eps;  // per-row violation levels
  MatrixXd G;  // input rows, q × m (hard in closed loop)
  VectorXd g;
  double eps_u = 0.05;  // violation level of predicted inputs, l ≥ 1
  double eps_terminal = 0.05;
};

struct SamplingSettings {
  double beta = 1e-4;
  double bracket_low = 0.95;   // ε_l = bracket_low · ε
  double bracket_high = 1.05;  // ε_u = bracket_high · ε
  std::uint64_t seed = 1;
};

enum class TighteningMethod { kSampled, kConvolution, kWorstCase };
std::string_view to_string(TighteningMethod m);

/// η_1..η_T (state), μ_0..μ_{T−1} (input) and η_f (terminal rows).
struct TighteningSchedule {
  std::vector<VectorXd> eta;  // eta[l − 1] = η_l
  std::vector<VectorXd> mu;   // mu[l] = μ_l
  VectorXd eta_f;
  Polytope terminal;  // (H_f, h_f) the rows refer to
  Polytope terminal_constraint;  // the set the terminal set was computed in
  int terminal_iterations = 0;
  bool terminal_maximal = true;
  std::string variant = "plain";
  double eps_f = 0.0;
  TighteningMethod method = TighteningMethod::kSampled;
  std::vector<SampledQuantileCertificate> certificates;
  std::uint64_t seed = 0;

  int horizon() const { return static_cast<int>(eta.size()); }
};

/// Quantile-based offsets against e_l for every row of `rows`:
/// out[l][j] = offsets_j − q_{1−ε_j}(rows_j e_l), l = 0..horizon.
/// Offsets at l = 0 are returned unchanged.
class QuantileTightener {
 public:
  QuantileTightener(const ErrorPropagation& prop, const DisturbanceModel& model,
                    const SamplingSettings& sampling,
                    TighteningMethod method = TighteningMethod::kSampled);

  std::vector<VectorXd> tighten(const MatrixXd& rows, const VectorXd& offsets,
                                const VectorXd& eps, int horizon,
                                std::uint64_t stream) const;

  /// Certificates used so far, one per distinct ε (deduplicated).
  const std::vector<SampledQuantileCertificate>& certificates() const {
    return certs_;
  }

 private:
  const SampledQuantileCertificate& certificate_for(double eps) const;

  const ErrorPropagation& prop_;
  const DisturbanceModel& model_;
  SamplingSettings sampling_;
  TighteningMethod method_;
  mutable std::vector<SampledQuantileCertificate> certs_;
};

/// η_1..η_T for the state rows.
std::vector<VectorXd> tighten_state(const QuantileTightener& q,
                                    const ConstraintSpec& c, int T);
/// μ_0..μ_{T−1} from rows G K against g; μ_0 = g exactly.
std::vector<VectorXd> tighten_input(const ControllerGains& gains,
                                    const QuantileTightener& q,
                                    const ConstraintSpec& c, int T);
/// η_f against e_T for the rows of Xf.
VectorXd tighten_terminal(const QuantileTightener& q, const Polytope& Xf,
                          double eps_terminal, int T);

/// Worst-case offsets over W: out[l][j] = offsets_j − Σ_{k<l} supp(W, (rows_j Acl^k Bw)ᵀ).
std::vector<VectorXd> worst_case_offsets(const ErrorPropagation& prop,
                                         const Polytope& W,
                                         const MatrixXd& rows,
                                         const VectorXd& offsets, int horizon);

/// Mixed tightening: for each l, min over i of (worst case over W_f of the
/// first i disturbances) + (plain quantile offsets of horizon l − i).
/// `plain[k]` must hold offsets at horizon k for k = 0..T (plain[0] = raw).
/// The branch index runs to l − 1, or to l when `include_full_branch`
/// (inputs and terminal rows, whose horizon-0 offsets are exact).
std::vector<VectorXd> mixed_offsets(const ErrorPropagation& prop,
                                    const Polytope& Wf, const MatrixXd& rows,
                                    const std::vector<VectorXd>& plain,
                                    int horizon, bool include_full_branch);

/// 1-D marginal of one disturbance coordinate for the convolution method.
struct Marginal {
  enum class Kind { kUniform, kGaussian, kTruncatedGaussian };
  Kind kind = Kind::kUniform;
  double a = -1.0;     // uniform lower bound
  double b = 1.0;      // uniform upper bound
  double sigma = 1.0;  // Gaussian scale
  double bound = 0.0;  // truncation |w| ≤ bound (truncated kind)

  double lower() const;
  double upper() const;
  double cdf(double x) const;
};

/// Marginals of a model with independent coordinates. Truncated Gaussian
/// models are approximated by independent marginals truncated at the radius
/// (demonstration only; radial truncation couples coordinates).
std::vector<Marginal> independent_marginals(const DisturbanceModel& model);

/// 1 − ε quantile of Σ_k c_k W_k (independent W_k ~ marginals[k]) by
/// discrete convolution on a grid of `grid` points.
double convolution_quantile(std::span<const Marginal> marginals,
                            std::span<const double> coefficients, double eps,
                            int grid = 1 << 14);

}  // namespace smpc
