#pragma once

#include <span>
#include <vector>

#include "smpc/common.hpp"

namespace smpc {

/// Convex set {x | H x ≤ h} in H-representation.
///
/// Values are immutable. Emptiness is decided once, at construction, by an
/// LP feasibility test, so `is_empty()` is always consistent with Hx ≤ h.
/// A polytope with zero rows is the whole space.
class Polytope {
 public:
  /// Zero-dimensional placeholder; assign a real polytope before use.
  Polytope() = default;
  Polytope(MatrixXd normals, VectorXd offsets);

  static Polytope universe(Eigen::Index dim);
  static Polytope empty(Eigen::Index dim);
  static Polytope box(const VectorXd& lower, const VectorXd& upper);
  static Polytope box(Eigen::Index dim, double half_width);
  static Polytope point(const VectorXd& p);

  Eigen::Index dim() const { return normals_.cols(); }
  Eigen::Index rows() const { return normals_.rows(); }
  const MatrixXd& normals() const { return normals_; }
  const VectorXd& offsets() const { return offsets_; }

  bool is_empty() const { return empty_; }
  bool is_bounded() const;
  bool contains_point(const VectorXd& x, double tol = 1e-9) const;

 private:
  MatrixXd normals_;
  VectorXd offsets_;
  bool empty_ = false;
};

/// Redundancy slack used by `reduce`.
inline constexpr double kRedundancyTol = 1e-9;
/// Support-function tolerance for set equality in fixed-point recursions.
inline constexpr double kSetEqualityTol = 1e-8;

/// max_{x∈P} dᵀx. Throws EmptySet / Unbounded.
double support(const Polytope& P, const VectorXd& d);

/// Minimal H-representation: unit-norm rows, duplicates merged, every
/// remaining row verified irredundant by LP. Empty input yields the canonical
/// empty polytope {x | 0ᵀx ≤ −1}.
Polytope reduce(const Polytope& P);

Polytope intersect(const Polytope& P, const Polytope& Q);

/// P ⊖ Q = {x | x + q ∈ P ∀q ∈ Q}; Q must be nonempty and bounded.
Polytope pontryagin_diff(const Polytope& P, const Polytope& Q);
/// P ⊖ M·Q without forming the image M·Q.
Polytope pontryagin_diff(const Polytope& P, const Polytope& Q,
                         const MatrixXd& M);

/// P ⊕ Q, by projecting the lifted set {(z, y) | z − y ∈ P, y ∈ Q}.
Polytope minkowski_sum(const Polytope& P, const Polytope& Q);

/// Orthogonal projection onto the coordinates in `keep` (in that order),
/// by Fourier–Motzkin elimination with redundancy removal after every step.
Polytope project(const Polytope& P, std::span<const Eigen::Index> keep);
Polytope project(const Polytope& P, std::initializer_list<Eigen::Index> keep);

/// {x | M x + c ∈ P}.
Polytope affine_preimage(const Polytope& P, const MatrixXd& M,
                         const VectorXd& c);
/// {M x | x ∈ P}.
Polytope linear_image(const Polytope& P, const MatrixXd& M);
/// {α x | x ∈ P} for α > 0.
Polytope scale(const Polytope& P, double alpha);

/// Q ⊆ P, tested with one support LP per row of P.
bool contains(const Polytope& P, const Polytope& Q,
              double tol = kSetEqualityTol);
bool equal(const Polytope& P, const Polytope& Q,
           double tol = kSetEqualityTol);

/// Axis-aligned bounds (lower, upper). Throws on empty/unbounded input.
std::pair<VectorXd, VectorXd> bounding_box(const Polytope& P);

/// Vertices of a bounded 2-D polytope in counter-clockwise order.
std::vector<VectorXd> vertices_2d(const Polytope& P);
double area_2d(const Polytope& P);
/// Convex hull of 2-D points as a counter-clockwise vertex list.
std::vector<VectorXd> convex_hull_2d(std::span<const VectorXd> points);
/// H-representation of the convex hull of 2-D points.
Polytope hull_2d(std::span<const VectorXd> points);

}  // namespace smpc
