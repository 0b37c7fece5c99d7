#include "smpc/polytope.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "smpc/lp.hpp"

namespace smpc {
namespace {

constexpr double kCoeffTol = 1e-12;

Polytope canonical_empty(Eigen::Index dim) {
  MatrixXd H = MatrixXd::Zero(1, dim);
  VectorXd h(1);
  h(0) = -1.0;
  return Polytope(std::move(H), std::move(h));
}

void require_same_dim(const Polytope& P, const Polytope& Q) {
  require(P.dim() == Q.dim(), Errc::kDimensionMismatch,
          "polytopes live in different dimensions");
}

// Rows stacked as a new polytope without reduction.
Polytope stack(const Polytope& P, const Polytope& Q) {
  MatrixXd H(P.rows() + Q.rows(), P.dim());
  VectorXd h(P.rows() + Q.rows());
  H << P.normals(), Q.normals();
  h << P.offsets(), Q.offsets();
  return Polytope(std::move(H), std::move(h));
}

// Normalize rows, drop zero rows and merge parallel duplicates, preserving
// first-occurrence order.
void normalize_and_merge(const MatrixXd& H, const VectorXd& h, MatrixXd& Hout,
                         VectorXd& hout) {
  std::vector<RowVectorXd> rows;
  std::vector<double> offs;
  for (Eigen::Index i = 0; i < H.rows(); ++i) {
    const double nrm = H.row(i).norm();
    if (nrm < kCoeffTol) continue;
    RowVectorXd r = H.row(i) / nrm;
    const double o = h(i) / nrm;
    bool merged = false;
    for (std::size_t k = 0; k < rows.size(); ++k) {
      if ((rows[k] - r).lpNorm<Eigen::Infinity>() < 1e-12) {
        offs[k] = std::min(offs[k], o);
        merged = true;
        break;
      }
    }
    if (!merged) {
      rows.push_back(std::move(r));
      offs.push_back(o);
    }
  }
  Hout.resize(static_cast<Eigen::Index>(rows.size()), H.cols());
  hout.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t k = 0; k < rows.size(); ++k) {
    Hout.row(static_cast<Eigen::Index>(k)) = rows[k];
    hout(static_cast<Eigen::Index>(k)) = offs[k];
  }
}

// Eliminates coordinate k from a (reduced) polytope by Fourier–Motzkin.
Polytope eliminate(const Polytope& P, Eigen::Index k) {
  const Eigen::Index n = P.dim();
  std::vector<Eigen::Index> pos, neg, zero;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    const double a = P.normals()(i, k);
    if (a > kCoeffTol) {
      pos.push_back(i);
    } else if (a < -kCoeffTol) {
      neg.push_back(i);
    } else {
      zero.push_back(i);
    }
  }
  const auto count =
      static_cast<Eigen::Index>(zero.size() + pos.size() * neg.size());
  MatrixXd H(count, n - 1);
  VectorXd h(count);
  auto drop_column = [&](const RowVectorXd& row) {
    RowVectorXd out(n - 1);
    out << row.head(k), row.tail(n - k - 1);
    return out;
  };
  Eigen::Index r = 0;
  for (auto i : zero) {
    H.row(r) = drop_column(P.normals().row(i));
    h(r) = P.offsets()(i);
    ++r;
  }
  for (auto p : pos) {
    const double ap = P.normals()(p, k);
    for (auto q : neg) {
      const double aq = -P.normals()(q, k);
      const RowVectorXd row = aq * P.normals().row(p) + ap * P.normals().row(q);
      H.row(r) = drop_column(row);
      h(r) = aq * P.offsets()(p) + ap * P.offsets()(q);
      ++r;
    }
  }
  return reduce(Polytope(std::move(H), std::move(h)));
}

}  // namespace

Polytope::Polytope(MatrixXd normals, VectorXd offsets)
    : normals_(std::move(normals)), offsets_(std::move(offsets)) {
  require(normals_.rows() == offsets_.size(), Errc::kDimensionMismatch,
          "normal rows and offsets differ in length");
  require(normals_.allFinite(), Errc::kBadParams, "non-finite normal entry");
  require(!offsets_.hasNaN(), Errc::kBadParams, "NaN offset");
  // +∞ offsets encode absent constraints; drop them.
  if (!offsets_.allFinite()) {
    std::vector<Eigen::Index> keep;
    for (Eigen::Index i = 0; i < offsets_.size(); ++i) {
      require(offsets_(i) != -std::numeric_limits<double>::infinity(),
              Errc::kBadParams, "offset of −∞");
      if (std::isfinite(offsets_(i))) keep.push_back(i);
    }
    MatrixXd H(static_cast<Eigen::Index>(keep.size()), normals_.cols());
    VectorXd h(static_cast<Eigen::Index>(keep.size()));
    for (std::size_t k = 0; k < keep.size(); ++k) {
      H.row(static_cast<Eigen::Index>(k)) = normals_.row(keep[k]);
      h(static_cast<Eigen::Index>(k)) = offsets_(keep[k]);
    }
    normals_ = std::move(H);
    offsets_ = std::move(h);
  }
  empty_ = !lp::feasible(normals_, offsets_);
}

Polytope Polytope::universe(Eigen::Index dim) {
  return Polytope(MatrixXd::Zero(0, dim), VectorXd::Zero(0));
}

Polytope Polytope::empty(Eigen::Index dim) { return canonical_empty(dim); }

Polytope Polytope::box(const VectorXd& lower, const VectorXd& upper) {
  require(lower.size() == upper.size(), Errc::kDimensionMismatch,
          "box bounds differ in length");
  const Eigen::Index n = lower.size();
  MatrixXd H(2 * n, n);
  VectorXd h(2 * n);
  H << MatrixXd::Identity(n, n), -MatrixXd::Identity(n, n);
  h << upper, -lower;
  return Polytope(std::move(H), std::move(h));
}

Polytope Polytope::box(Eigen::Index dim, double half_width) {
  return box(VectorXd::Constant(dim, -half_width),
             VectorXd::Constant(dim, half_width));
}

Polytope Polytope::point(const VectorXd& p) { return box(p, p); }

bool Polytope::is_bounded() const {
  if (empty_) return true;
  for (Eigen::Index i = 0; i < dim(); ++i) {
    for (double sign : {1.0, -1.0}) {
      VectorXd d = VectorXd::Zero(dim());
      d(i) = sign;
      if (lp::maximize(normals_, offsets_, d).status != lp::Status::kOptimal) {
        return false;
      }
    }
  }
  return true;
}

bool Polytope::contains_point(const VectorXd& x, double tol) const {
  require(x.size() == dim(), Errc::kDimensionMismatch, "point dimension");
  if (empty_) return false;
  for (Eigen::Index i = 0; i < rows(); ++i) {
    const double nrm = std::max(normals_.row(i).norm(), kCoeffTol);
    if (normals_.row(i).dot(x) - offsets_(i) > tol * nrm) return false;
  }
  return true;
}

double support(const Polytope& P, const VectorXd& d) {
  require(d.size() == P.dim(), Errc::kDimensionMismatch, "direction length");
  if (P.is_empty()) fail(Errc::kEmptySet, "support of an empty polytope");
  const lp::Result r = lp::maximize(P.normals(), P.offsets(), d);
  if (r.status == lp::Status::kUnbounded) {
    fail(Errc::kUnbounded, "support function is +inf in this direction");
  }
  if (r.status != lp::Status::kOptimal) {
    fail(Errc::kEmptySet, "support LP infeasible");
  }
  return r.value;
}

Polytope reduce(const Polytope& P) {
  if (P.is_empty()) return canonical_empty(P.dim());
  MatrixXd H;
  VectorXd h;
  normalize_and_merge(P.normals(), P.offsets(), H, h);
  const Eigen::Index m = H.rows();
  std::vector<bool> alive(static_cast<std::size_t>(m), true);
  for (Eigen::Index i = 0; i < m; ++i) {
    // maximize H_i x over the other live rows, capped at h_i + 1.
    Eigen::Index live = 0;
    for (Eigen::Index j = 0; j < m; ++j) live += alive[j] ? 1 : 0;
    MatrixXd A(live, H.cols());
    VectorXd b(live);
    Eigen::Index r = 0;
    for (Eigen::Index j = 0; j < m; ++j) {
      if (!alive[j]) continue;
      A.row(r) = H.row(j);
      b(r) = j == i ? h(i) + 1.0 : h(j);
      ++r;
    }
    const lp::Result res = lp::maximize(A, b, H.row(i).transpose());
    if (res.status == lp::Status::kOptimal &&
        res.value <= h(i) + kRedundancyTol) {
      alive[i] = false;
    }
  }
  Eigen::Index live = 0;
  for (Eigen::Index j = 0; j < m; ++j) live += alive[j] ? 1 : 0;
  MatrixXd Hr(live, H.cols());
  VectorXd hr(live);
  Eigen::Index r = 0;
  for (Eigen::Index j = 0; j < m; ++j) {
    if (!alive[j]) continue;
    Hr.row(r) = H.row(j);
    hr(r) = h(j);
    ++r;
  }
  return Polytope(std::move(Hr), std::move(hr));
}

Polytope intersect(const Polytope& P, const Polytope& Q) {
  require_same_dim(P, Q);
  return reduce(stack(P, Q));
}

Polytope pontryagin_diff(const Polytope& P, const Polytope& Q) {
  require_same_dim(P, Q);
  return pontryagin_diff(P, Q, MatrixXd::Identity(P.dim(), P.dim()));
}

Polytope pontryagin_diff(const Polytope& P, const Polytope& Q,
                         const MatrixXd& M) {
  require(M.rows() == P.dim() && M.cols() == Q.dim(), Errc::kDimensionMismatch,
          "image map does not match polytope dimensions");
  require(!Q.is_empty(), Errc::kEmptySet, "subtrahend of ⊖ is empty");
  if (P.is_empty()) return canonical_empty(P.dim());
  VectorXd shrunk = P.offsets();
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    shrunk(i) -= support(Q, M.transpose() * P.normals().row(i).transpose());
  }
  return reduce(Polytope(P.normals(), std::move(shrunk)));
}

Polytope minkowski_sum(const Polytope& P, const Polytope& Q) {
  require_same_dim(P, Q);
  require(P.is_bounded() && Q.is_bounded(), Errc::kUnbounded,
          "Minkowski sum operands must be bounded");
  const Eigen::Index n = P.dim();
  if (P.is_empty() || Q.is_empty()) return canonical_empty(n);
  if (n == 2) {
    // Pairwise vertex sums; exact and robust for thin operands.
    std::vector<VectorXd> sums;
    const auto vp = vertices_2d(P);
    const auto vq = vertices_2d(Q);
    for (const auto& a : vp) {
      for (const auto& b : vq) sums.push_back(a + b);
    }
    return hull_2d(sums);
  }
  const Polytope Pr = reduce(P);
  const Polytope Qr = reduce(Q);
  MatrixXd H = MatrixXd::Zero(Pr.rows() + Qr.rows(), 2 * n);
  VectorXd h(Pr.rows() + Qr.rows());
  H.topLeftCorner(Pr.rows(), n) = Pr.normals();
  H.topRightCorner(Pr.rows(), n) = -Pr.normals();
  H.bottomRightCorner(Qr.rows(), n) = Qr.normals();
  h << Pr.offsets(), Qr.offsets();
  std::vector<Eigen::Index> keep(static_cast<std::size_t>(n));
  std::iota(keep.begin(), keep.end(), 0);
  return project(Polytope(std::move(H), std::move(h)), keep);
}

Polytope project(const Polytope& P, std::span<const Eigen::Index> keep) {
  const Eigen::Index n = P.dim();
  require(!keep.empty(), Errc::kBadParams, "projection keeps no coordinate");
  std::vector<bool> kept(static_cast<std::size_t>(n), false);
  for (auto k : keep) {
    require(k >= 0 && k < n, Errc::kDimensionMismatch,
            "projection index out of range");
    require(!kept[k], Errc::kBadParams, "duplicate projection index");
    kept[k] = true;
  }
  const auto out_dim = static_cast<Eigen::Index>(keep.size());
  if (P.is_empty()) return canonical_empty(out_dim);
  Polytope current = reduce(P);
  // Eliminate from the highest index down so lower indices stay valid.
  std::vector<Eigen::Index> remaining;
  for (Eigen::Index k = n - 1; k >= 0; --k) {
    if (!kept[k]) current = eliminate(current, k);
  }
  for (Eigen::Index k = 0; k < n; ++k) {
    if (kept[k]) remaining.push_back(k);
  }
  // Reorder columns to match `keep`.
  MatrixXd H(current.rows(), out_dim);
  for (Eigen::Index c = 0; c < out_dim; ++c) {
    const auto it = std::find(remaining.begin(), remaining.end(),
                              keep[static_cast<std::size_t>(c)]);
    H.col(c) = current.normals().col(it - remaining.begin());
  }
  return Polytope(std::move(H), current.offsets());
}

Polytope project(const Polytope& P, std::initializer_list<Eigen::Index> keep) {
  return project(P, std::span<const Eigen::Index>(keep.begin(), keep.size()));
}

Polytope affine_preimage(const Polytope& P, const MatrixXd& M,
                         const VectorXd& c) {
  require(M.rows() == P.dim() && c.size() == P.dim(),
          Errc::kDimensionMismatch, "affine map does not land in P's space");
  if (P.is_empty()) return canonical_empty(M.cols());
  return reduce(Polytope(P.normals() * M, P.offsets() - P.normals() * c));
}

Polytope linear_image(const Polytope& P, const MatrixXd& M) {
  require(M.cols() == P.dim(), Errc::kDimensionMismatch,
          "linear map does not accept P's dimension");
  const Eigen::Index k = M.rows();
  const Eigen::Index n = P.dim();
  if (P.is_empty()) return canonical_empty(k);
  if (k == 2 && n == 2 && P.is_bounded()) {
    std::vector<VectorXd> mapped;
    for (const auto& v : vertices_2d(P)) mapped.push_back(M * v);
    return hull_2d(mapped);
  }
  if (k == n) {
    const Eigen::JacobiSVD<MatrixXd> svd(M);
    const VectorXd& sv = svd.singularValues();
    if (sv(n - 1) > 1e-8 * sv(0)) {
      return reduce(Polytope(P.normals() * M.inverse(), P.offsets()));
    }
  }
  // Lift: y − M x = 0 and x ∈ P, then project out x.
  MatrixXd H = MatrixXd::Zero(2 * k + P.rows(), k + n);
  VectorXd h = VectorXd::Zero(2 * k + P.rows());
  H.topLeftCorner(k, k) = MatrixXd::Identity(k, k);
  H.topRightCorner(k, n) = -M;
  H.block(k, 0, k, k) = -MatrixXd::Identity(k, k);
  H.block(k, k, k, n) = M;
  H.bottomRightCorner(P.rows(), n) = P.normals();
  h.tail(P.rows()) = P.offsets();
  std::vector<Eigen::Index> keep(static_cast<std::size_t>(k));
  std::iota(keep.begin(), keep.end(), 0);
  return project(Polytope(std::move(H), std::move(h)), keep);
}

Polytope scale(const Polytope& P, double alpha) {
  require(alpha > 0.0, Errc::kBadParams, "scale factor must be positive");
  return Polytope(P.normals(), alpha * P.offsets());
}

bool contains(const Polytope& P, const Polytope& Q, double tol) {
  require_same_dim(P, Q);
  if (Q.is_empty()) return true;
  if (P.is_empty()) return false;
  for (Eigen::Index i = 0; i < P.rows(); ++i) {
    const double nrm = P.normals().row(i).norm();
    if (nrm < kCoeffTol) continue;
    const lp::Result r =
        lp::maximize(Q.normals(), Q.offsets(), P.normals().row(i).transpose());
    if (r.status != lp::Status::kOptimal) return false;
    if (r.value > P.offsets()(i) + tol * nrm) return false;
  }
  return true;
}

bool equal(const Polytope& P, const Polytope& Q, double tol) {
  return contains(P, Q, tol) && contains(Q, P, tol);
}

std::pair<VectorXd, VectorXd> bounding_box(const Polytope& P) {
  const Eigen::Index n = P.dim();
  VectorXd lo(n), hi(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    VectorXd d = VectorXd::Zero(n);
    d(i) = 1.0;
    hi(i) = support(P, d);
    lo(i) = -support(P, -d);
  }
  return {lo, hi};
}

namespace {

double cross(const VectorXd& o, const VectorXd& a, const VectorXd& b) {
  return (a(0) - o(0)) * (b(1) - o(1)) - (a(1) - o(1)) * (b(0) - o(0));
}

// Andrew's monotone chain; counter-clockwise, collinear points dropped.
std::vector<VectorXd> convex_hull(std::vector<VectorXd> pts) {
  std::sort(pts.begin(), pts.end(), [](const VectorXd& a, const VectorXd& b) {
    return a(0) < b(0) || (a(0) == b(0) && a(1) < b(1));
  });
  std::vector<VectorXd> uniq;
  for (auto& p : pts) {
    if (uniq.empty() || (uniq.back() - p).norm() > 1e-10) uniq.push_back(p);
  }
  if (uniq.size() < 3) return uniq;
  std::vector<VectorXd> hull(2 * uniq.size());
  std::size_t k = 0;
  for (const auto& p : uniq) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 1e-14) --k;
    hull[k++] = p;
  }
  for (std::size_t i = uniq.size() - 1, t = k + 1; i > 0; --i) {
    const auto& p = uniq[i - 1];
    while (k >= t && cross(hull[k - 2], hull[k - 1], p) <= 1e-14) --k;
    hull[k++] = p;
  }
  hull.resize(k - 1);
  return hull;
}

}  // namespace

std::vector<VectorXd> vertices_2d(const Polytope& P) {
  require(P.dim() == 2, Errc::kDimensionUnsupported,
          "vertex enumeration is implemented for 2-D polytopes");
  if (P.is_empty()) return {};
  require(P.is_bounded(), Errc::kUnbounded, "polytope is unbounded");
  const Polytope R = reduce(P);
  std::vector<VectorXd> candidates;
  for (Eigen::Index i = 0; i < R.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < R.rows(); ++j) {
      Eigen::Matrix2d M;
      M.row(0) = R.normals().row(i);
      M.row(1) = R.normals().row(j);
      if (std::abs(M.determinant()) < 1e-12) continue;
      const Eigen::Vector2d rhs(R.offsets()(i), R.offsets()(j));
      const VectorXd x = M.partialPivLu().solve(rhs);
      if (R.contains_point(x, 1e-8)) candidates.push_back(x);
    }
  }
  return convex_hull(std::move(candidates));
}

double area_2d(const Polytope& P) {
  const auto v = vertices_2d(P);
  if (v.size() < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& a = v[i];
    const auto& b = v[(i + 1) % v.size()];
    twice += a(0) * b(1) - a(1) * b(0);
  }
  return 0.5 * twice;
}

std::vector<VectorXd> convex_hull_2d(std::span<const VectorXd> points) {
  for (const auto& p : points) {
    require(p.size() == 2, Errc::kDimensionMismatch, "2-D points expected");
  }
  return convex_hull({points.begin(), points.end()});
}

Polytope hull_2d(std::span<const VectorXd> points) {
  require(!points.empty(), Errc::kBadParams, "hull of no points");
  for (const auto& p : points) {
    require(p.size() == 2, Errc::kDimensionMismatch, "hull_2d takes 2-D points");
  }
  const auto hull = convex_hull({points.begin(), points.end()});
  if (hull.size() == 1) return Polytope::point(hull.front());
  if (hull.size() == 2) {
    const VectorXd dir = (hull[1] - hull[0]).normalized();
    const Eigen::Vector2d nrm(dir(1), -dir(0));
    MatrixXd H(4, 2);
    H.row(0) = nrm.transpose();
    H.row(1) = -nrm.transpose();
    H.row(2) = dir.transpose();
    H.row(3) = -dir.transpose();
    VectorXd h(4);
    h << nrm.dot(hull[0]), -nrm.dot(hull[0]), dir.dot(hull[1]),
        -dir.dot(hull[0]);
    return Polytope(std::move(H), std::move(h));
  }
  MatrixXd H(static_cast<Eigen::Index>(hull.size()), 2);
  VectorXd h(static_cast<Eigen::Index>(hull.size()));
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const VectorXd& a = hull[i];
    const VectorXd& b = hull[(i + 1) % hull.size()];
    Eigen::Vector2d nrm(b(1) - a(1), a(0) - b(0));
    nrm.normalize();
    H.row(static_cast<Eigen::Index>(i)) = nrm.transpose();
    h(static_cast<Eigen::Index>(i)) = nrm.dot(a);
  }
  return Polytope(std::move(H), std::move(h));
}

}  // namespace smpc
