#include "smpc/disturbance.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace smpc {
namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

constexpr int kMaxRejections = 1000000;

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(~stream)));
}

std::string_view to_string(DisturbanceKind kind) {
  switch (kind) {
    case DisturbanceKind::kTruncatedGaussian: return "truncated_gaussian";
    case DisturbanceKind::kUniformBox: return "uniform_box";
    case DisturbanceKind::kUniformPolytope: return "uniform_polytope";
    case DisturbanceKind::kEmpirical: return "empirical";
  }
  return "unknown";
}

DisturbanceModel DisturbanceModel::truncated_gaussian(MatrixXd covariance,
                                                      double radius_squared,
                                                      int support_facets,
                                                      std::uint64_t seed) {
  require(covariance.rows() == covariance.cols() && covariance.rows() > 0,
          Errc::kDimensionMismatch, "covariance must be square");
  require(radius_squared > 0.0, Errc::kBadParams,
          "truncation radius must be positive");
  DisturbanceModel m;
  m.kind_ = DisturbanceKind::kTruncatedGaussian;
  m.dim_ = covariance.rows();
  m.seed_ = seed;
  Eigen::LLT<MatrixXd> llt(covariance);
  require(llt.info() == Eigen::Success, Errc::kBadParams,
          "covariance must be positive definite");
  m.chol_ = llt.matrixL();
  m.covariance_ = std::move(covariance);
  m.radius_squared_ = radius_squared;
  m.facets_ = support_facets;
  m.finish();
  return m;
}

DisturbanceModel DisturbanceModel::uniform_box(VectorXd lower, VectorXd upper,
                                               std::uint64_t seed) {
  require(lower.size() == upper.size() && lower.size() > 0,
          Errc::kDimensionMismatch, "box bounds");
  require((lower.array() <= upper.array()).all(), Errc::kBadParams,
          "box lower bound exceeds upper bound");
  DisturbanceModel m;
  m.kind_ = DisturbanceKind::kUniformBox;
  m.dim_ = lower.size();
  m.seed_ = seed;
  m.lower_ = std::move(lower);
  m.upper_ = std::move(upper);
  m.finish();
  return m;
}

DisturbanceModel DisturbanceModel::uniform_polytope(Polytope region,
                                                    std::uint64_t seed) {
  require(!region.is_empty() && region.is_bounded(), Errc::kBadParams,
          "uniform polytope must be nonempty and bounded");
  DisturbanceModel m;
  m.kind_ = DisturbanceKind::kUniformPolytope;
  m.dim_ = region.dim();
  m.seed_ = seed;
  auto [lo, hi] = bounding_box(region);
  m.lower_ = lo;
  m.upper_ = hi;
  m.region_ = reduce(region);
  m.finish();
  return m;
}

DisturbanceModel DisturbanceModel::empirical(MatrixXd samples, double margin,
                                             std::uint64_t seed) {
  require(samples.rows() > 0 && samples.cols() > 0, Errc::kBadParams,
          "empirical model needs samples");
  require(margin >= 0.0, Errc::kBadParams, "negative margin");
  DisturbanceModel m;
  m.kind_ = DisturbanceKind::kEmpirical;
  m.dim_ = samples.cols();
  m.seed_ = seed;
  m.samples_ = std::move(samples);
  m.margin_ = margin;
  m.finish();
  return m;
}

void DisturbanceModel::finish() {
  switch (kind_) {
    case DisturbanceKind::kTruncatedGaussian:
      support_ = support_polytope(facets_);
      break;
    case DisturbanceKind::kUniformBox:
      support_ = Polytope::box(lower_, upper_);
      degenerate_ = (upper_ - lower_).cwiseAbs().maxCoeff() == 0.0 &&
                    lower_.cwiseAbs().maxCoeff() == 0.0;
      break;
    case DisturbanceKind::kUniformPolytope:
      support_ = region_;
      break;
    case DisturbanceKind::kEmpirical: {
      if (dim_ == 2) {
        std::vector<VectorXd> pts;
        for (Eigen::Index i = 0; i < samples_.rows(); ++i) {
          pts.push_back(samples_.row(i).transpose());
        }
        const Polytope hull = hull_2d(pts);
        support_ = Polytope(hull.normals(),
                            hull.offsets().array() + margin_);
      } else {
        const VectorXd lo = samples_.colwise().minCoeff().transpose();
        const VectorXd hi = samples_.colwise().maxCoeff().transpose();
        support_ = Polytope::box(lo.array() - margin_, hi.array() + margin_);
      }
      degenerate_ = samples_.cwiseAbs().maxCoeff() == 0.0 && margin_ == 0.0;
      break;
    }
  }
}

Polytope DisturbanceModel::support_polytope(int facets) const {
  switch (kind_) {
    case DisturbanceKind::kTruncatedGaussian: {
      const double r = std::sqrt(radius_squared_);
      if (dim_ != 2) return Polytope::box(dim_, r);
      require(facets >= 3, Errc::kBadParams,
              "a 2-D ball needs at least 3 tangent facets");
      MatrixXd H(facets, 2);
      for (int i = 0; i < facets; ++i) {
        const double th = 2.0 * std::numbers::pi * i / facets;
        H.row(i) << std::cos(th), std::sin(th);
      }
      return Polytope(std::move(H), VectorXd::Constant(facets, r));
    }
    default:
      return support_;
  }
}

VectorXd DisturbanceModel::draw(Rng& rng) const {
  switch (kind_) {
    case DisturbanceKind::kTruncatedGaussian: {
      std::normal_distribution<double> normal;
      VectorXd z(dim_);
      for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        for (Eigen::Index i = 0; i < dim_; ++i) z(i) = normal(rng);
        VectorXd w = chol_ * z;
        if (w.squaredNorm() <= radius_squared_) return w;
      }
      fail(Errc::kBadParams, "truncated Gaussian acceptance rate too low");
    }
    case DisturbanceKind::kUniformBox: {
      VectorXd w(dim_);
      for (Eigen::Index i = 0; i < dim_; ++i) {
        w(i) = std::uniform_real_distribution<double>(lower_(i), upper_(i))(rng);
      }
      return w;
    }
    case DisturbanceKind::kUniformPolytope: {
      VectorXd w(dim_);
      for (int attempt = 0; attempt < kMaxRejections; ++attempt) {
        for (Eigen::Index i = 0; i < dim_; ++i) {
          w(i) = std::uniform_real_distribution<double>(lower_(i), upper_(i))(rng);
        }
        if (region_.contains_point(w, 0.0)) return w;
      }
      fail(Errc::kBadParams, "polytope rejection sampling failed");
    }
    case DisturbanceKind::kEmpirical: {
      std::uniform_int_distribution<Eigen::Index> pick(0, samples_.rows() - 1);
      return samples_.row(pick(rng)).transpose();
    }
  }
  fail(Errc::kBadParams, "unknown disturbance kind");
}

MatrixXd DisturbanceModel::draws(Eigen::Index count, Rng& rng) const {
  MatrixXd out(dim_, count);
  for (Eigen::Index s = 0; s < count; ++s) out.col(s) = draw(rng);
  return out;
}

DisturbanceBatch DisturbanceModel::sample(Eigen::Index count,
                                          Eigen::Index horizon,
                                          std::uint64_t stream) const {
  require(count >= 1 && horizon >= 1, Errc::kBadParams,
          "count and horizon must be positive");
  Rng rng = make_rng(seed_, stream);
  DisturbanceBatch batch;
  batch.count = count;
  batch.horizon = horizon;
  batch.data = draws(count * horizon, rng);
  return batch;
}

ConfidenceRegion confidence_region(const DisturbanceModel& model, double eps_f,
                                   Eigen::Index samples, double beta,
                                   std::uint64_t stream) {
  require(eps_f >= 0.0 && eps_f < 1.0, Errc::kBadParams,
          "eps_f must lie in [0, 1)");
  ConfidenceRegion out{model.support()};
  out.eps_f = eps_f;
  if (eps_f == 0.0) return out;
  require(samples > 0 && beta > 0.0 && beta < 1.0, Errc::kBadParams,
          "confidence sampling parameters");
  const Polytope& W = model.support();
  require((W.offsets().array() > 0.0).all(), Errc::kBadParams,
          "scaled confidence regions need the origin inside W");
  // Gauge of each draw with respect to W: smallest α with w ∈ α·W.
  Rng rng = make_rng(model.seed(), stream);
  std::vector<double> gauge(static_cast<std::size_t>(samples));
  for (auto& g : gauge) {
    const VectorXd w = model.draw(rng);
    g = (W.normals() * w).cwiseQuotient(W.offsets()).maxCoeff();
  }
  std::sort(gauge.begin(), gauge.end());
  auto coverage = [&](double a) {
    const auto it = std::upper_bound(gauge.begin(), gauge.end(), a);
    return static_cast<double>(it - gauge.begin()) /
           static_cast<double>(samples);
  };
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 40; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (coverage(mid) >= 1.0 - eps_f) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  out.alpha = hi;
  out.region = Polytope(W.normals(), hi * W.offsets());
  out.certified_by = "monte_carlo";
  out.samples = samples;
  out.beta = beta;
  out.empirical_coverage = coverage(hi);
  out.certified_coverage =
      out.empirical_coverage -
      std::sqrt(std::log(1.0 / beta) / (2.0 * static_cast<double>(samples)));
  return out;
}

}  // namespace smpc
