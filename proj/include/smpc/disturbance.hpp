#pragma once

#include <cstdint>
#include <random>

#include "smpc/lti.hpp"
#include "smpc/polytope.hpp"

namespace smpc {

using Rng = std::mt19937_64;

/// Independent generator for (seed, stream); streams are decorrelated by a
/// SplitMix64 finalizer so neighbouring indices do not share state.
Rng make_rng(std::uint64_t seed, std::uint64_t stream);

enum class DisturbanceKind {
  kTruncatedGaussian,
  kUniformBox,
  kUniformPolytope,
  kEmpirical,
};

std::string_view to_string(DisturbanceKind kind);

/// I.i.d. zero-mean disturbance with bounded support.
class DisturbanceModel {
 public:
  /// Gaussian N(0, Σ) conditioned on ‖w‖² ≤ radius_squared.
  static DisturbanceModel truncated_gaussian(MatrixXd covariance,
                                             double radius_squared,
                                             int support_facets,
                                             std::uint64_t seed);
  static DisturbanceModel uniform_box(VectorXd lower, VectorXd upper,
                                      std::uint64_t seed);
  static DisturbanceModel uniform_polytope(Polytope region,
                                           std::uint64_t seed);
  /// Resamples rows of `samples`. Support is the hull of the samples inflated
  /// by `margin` (2-D) or their bounding box inflated by `margin`.
  static DisturbanceModel empirical(MatrixXd samples, double margin,
                                    std::uint64_t seed);

  DisturbanceKind kind() const { return kind_; }
  Eigen::Index dim() const { return dim_; }
  std::uint64_t seed() const { return seed_; }
  const MatrixXd& covariance() const { return covariance_; }
  double radius_squared() const { return radius_squared_; }
  const VectorXd& lower() const { return lower_; }
  const VectorXd& upper() const { return upper_; }
  const MatrixXd& samples() const { return samples_; }
  double margin() const { return margin_; }
  int support_facets() const { return facets_; }

  /// Outer polytopic approximation W used by every set computation.
  const Polytope& support() const { return support_; }
  /// Polytope with `facets` uniformly angled facets tangent to the true
  /// support (balls in 2-D); boxes and polytopes are returned unchanged.
  Polytope support_polytope(int facets) const;
  /// True when W = {0}.
  bool is_degenerate() const { return degenerate_; }

  VectorXd draw(Rng& rng) const;
  /// `count` sequences of length `horizon` from stream `stream`.
  DisturbanceBatch sample(Eigen::Index count, Eigen::Index horizon,
                          std::uint64_t stream) const;
  /// count × dim matrix of single draws (columns are samples).
  MatrixXd draws(Eigen::Index count, Rng& rng) const;

 private:
  DisturbanceModel() = default;
  void finish();

  DisturbanceKind kind_ = DisturbanceKind::kUniformBox;
  Eigen::Index dim_ = 0;
  std::uint64_t seed_ = 0;
  MatrixXd covariance_;
  MatrixXd chol_;
  double radius_squared_ = 0.0;
  VectorXd lower_;
  VectorXd upper_;
  Polytope region_;
  MatrixXd samples_;
  double margin_ = 0.0;
  int facets_ = 8;
  Polytope support_;
  bool degenerate_ = false;
};

/// Scaled support α·W with empirical coverage ≥ 1 − ε_f.
struct ConfidenceRegion {
  Polytope region;
  double eps_f = 0.0;
  double alpha = 1.0;
  /// "analytic" for ε_f = 0, otherwise "monte_carlo".
  std::string certified_by = "analytic";
  Eigen::Index samples = 0;
  double beta = 0.0;
  double empirical_coverage = 1.0;
  /// Coverage lower bound holding with confidence 1 − β (Hoeffding).
  double certified_coverage = 1.0;
};

ConfidenceRegion confidence_region(const DisturbanceModel& model, double eps_f,
                                   Eigen::Index samples = 1000000,
                                   double beta = 1e-4,
                                   std::uint64_t stream = 0xC0FFEE);

}  // namespace smpc
