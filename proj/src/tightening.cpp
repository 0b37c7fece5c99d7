#include "smpc/tightening.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace smpc {
namespace {

constexpr std::int64_t kSampleSearchCap = 100000000;
constexpr double kGaussianSpan = 8.0;

std::uint64_t stream_id(std::uint64_t stream, int l) {
  return (stream << 16) | static_cast<std::uint64_t>(l);
}

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

}  // namespace

std::string_view to_string(TighteningMethod m) {
  switch (m) {
    case TighteningMethod::kSampled: return "sampled";
    case TighteningMethod::kConvolution: return "convolution";
    case TighteningMethod::kWorstCase: return "worst_case";
  }
  return "unknown";
}

SampledQuantileCertificate campi_sample_size(double eps_l, double eps_u,
                                             double beta) {
  require(eps_l > 0.0 && eps_l < eps_u && eps_u < 1.0, Errc::kBadParams,
          "need 0 < eps_l < eps_u < 1");
  require(beta > 0.0 && beta < 1.0, Errc::kBadParams, "beta must be in (0,1)");
  const double log_b = std::log(1.0 / beta);
  const double log_2b = std::log(2.0 / beta);
  const double eps_mid = 0.5 * (eps_l + eps_u);
  for (std::int64_t n = 1; n <= kSampleSearchCap; ++n) {
    const double N = static_cast<double>(n);
    const double upper = eps_u * N - std::sqrt(2.0 * eps_u * N * log_b);
    const double lower = eps_l * N - 1.0 + std::sqrt(3.0 * eps_l * N * log_2b);
    const double r_hi = std::floor(upper);
    const double r_lo = std::max(0.0, std::ceil(lower));
    if (r_hi < r_lo || !(eps_u * N > r_lo)) continue;
    const double r = std::clamp(std::round(eps_mid * N), r_lo, r_hi);
    SampledQuantileCertificate cert;
    cert.samples = n;
    cert.discard = static_cast<std::int64_t>(r);
    cert.beta = beta;
    cert.eps_l = eps_l;
    cert.eps_u = eps_u;
    return cert;
  }
  fail(Errc::kNoFeasiblePair,
       "probability bracket too narrow for the requested confidence");
}

bool certificate_holds(const SampledQuantileCertificate& c) {
  const double N = static_cast<double>(c.samples);
  const double r = static_cast<double>(c.discard);
  return c.samples > 0 && c.discard >= 0 && c.discard < c.samples &&
         r <= c.eps_u * N - std::sqrt(2.0 * c.eps_u * N * std::log(1.0 / c.beta)) &&
         r >= c.eps_l * N - 1.0 +
                  std::sqrt(3.0 * c.eps_l * N * std::log(2.0 / c.beta)) &&
         c.eps_u * N > r;
}

double order_statistic(std::span<double> values, std::int64_t discard) {
  const auto n = static_cast<std::int64_t>(values.size());
  require(n > 0 && discard >= 0 && discard < n, Errc::kBadParams,
          "discard count must be below the sample count");
  auto kth = values.begin() + (n - discard - 1);
  std::nth_element(values.begin(), kth, values.end());
  return *kth;
}

double quantile_tighten(std::span<const double> samples, double h_j,
                        const SampledQuantileCertificate& cert) {
  require(static_cast<std::int64_t>(samples.size()) >= cert.samples,
          Errc::kBadParams, "fewer samples than the certificate requires");
  std::vector<double> head(samples.begin(), samples.begin() + cert.samples);
  return h_j - order_statistic(head, cert.discard);
}

QuantileTightener::QuantileTightener(const ErrorPropagation& prop,
                                     const DisturbanceModel& model,
                                     const SamplingSettings& sampling,
                                     TighteningMethod method)
    : prop_(prop), model_(model), sampling_(sampling), method_(method) {
  require(prop.gain(0).cols() == model.dim(), Errc::kDimensionMismatch,
          "disturbance dimension differs from Bw");
}

const SampledQuantileCertificate& QuantileTightener::certificate_for(
    double eps) const {
  const double lo = sampling_.bracket_low * eps;
  const double hi = sampling_.bracket_high * eps;
  for (const auto& c : certs_) {
    if (c.eps_l == lo && c.eps_u == hi && c.beta == sampling_.beta) return c;
  }
  certs_.push_back(campi_sample_size(lo, hi, sampling_.beta));
  return certs_.back();
}

std::vector<VectorXd> QuantileTightener::tighten(const MatrixXd& rows,
                                                 const VectorXd& offsets,
                                                 const VectorXd& eps,
                                                 int horizon,
                                                 std::uint64_t stream) const {
  require(rows.rows() == offsets.size() && rows.rows() == eps.size(),
          Errc::kDimensionMismatch, "rows, offsets and levels differ in count");
  require(horizon <= prop_.horizon(), Errc::kBadParams,
          "horizon beyond precomputed powers");
  for (Eigen::Index j = 0; j < eps.size(); ++j) {
    require(eps(j) > 0.0 && eps(j) < 1.0, Errc::kBadParams,
            "violation levels must lie in (0, 1)");
  }
  std::vector<VectorXd> out{offsets};
  if (method_ == TighteningMethod::kWorstCase) {
    return worst_case_offsets(prop_, model_.support(), rows, offsets, horizon);
  }
  std::vector<Marginal> marginals;
  if (method_ == TighteningMethod::kConvolution) {
    marginals = independent_marginals(model_);
  }
  std::int64_t needed = 0;
  if (method_ == TighteningMethod::kSampled) {
    for (Eigen::Index j = 0; j < eps.size(); ++j) {
      needed = std::max(needed, certificate_for(eps(j)).samples);
    }
  }
  for (int l = 1; l <= horizon; ++l) {
    VectorXd eta = offsets;
    if (model_.is_degenerate() || rows.rows() == 0) {
      out.push_back(eta);
      continue;
    }
    if (method_ == TighteningMethod::kSampled) {
      const DisturbanceBatch batch =
          model_.sample(needed, l, stream_id(stream, l));
      const MatrixXd e = error_samples(prop_, batch, l);
      const MatrixXd proj = rows * e;
      for (Eigen::Index j = 0; j < rows.rows(); ++j) {
        const auto& cert = certificate_for(eps(j));
        std::vector<double> vals(static_cast<std::size_t>(cert.samples));
        for (std::int64_t s = 0; s < cert.samples; ++s) vals[s] = proj(j, s);
        eta(j) = offsets(j) - order_statistic(vals, cert.discard);
      }
    } else {
      for (Eigen::Index j = 0; j < rows.rows(); ++j) {
        std::vector<Marginal> terms;
        std::vector<double> coeffs;
        for (int k = 0; k < l; ++k) {
          const RowVectorXd c = rows.row(j) * prop_.gain(k);
          for (Eigen::Index s = 0; s < c.size(); ++s) {
            terms.push_back(marginals[static_cast<std::size_t>(s)]);
            coeffs.push_back(c(s));
          }
        }
        eta(j) = offsets(j) - convolution_quantile(terms, coeffs, eps(j));
      }
    }
    out.push_back(eta);
  }
  return out;
}

std::vector<VectorXd> tighten_state(const QuantileTightener& q,
                                    const ConstraintSpec& c, int T) {
  auto all = q.tighten(c.H, c.h, c.eps, T, 1);
  return {all.begin() + 1, all.end()};
}

std::vector<VectorXd> tighten_input(const ControllerGains& gains,
                                    const QuantileTightener& q,
                                    const ConstraintSpec& c, int T) {
  const VectorXd eps = VectorXd::Constant(c.G.rows(), c.eps_u);
  auto all = q.tighten(c.G * gains.K, c.g, eps, T - 1, 2);
  all.front() = c.g;
  return all;
}

VectorXd tighten_terminal(const QuantileTightener& q, const Polytope& Xf,
                          double eps_terminal, int T) {
  const VectorXd eps = VectorXd::Constant(Xf.rows(), eps_terminal);
  return q.tighten(Xf.normals(), Xf.offsets(), eps, T, 3).back();
}

std::vector<VectorXd> worst_case_offsets(const ErrorPropagation& prop,
                                         const Polytope& W,
                                         const MatrixXd& rows,
                                         const VectorXd& offsets,
                                         int horizon) {
  require(horizon <= prop.horizon(), Errc::kBadParams,
          "horizon beyond precomputed powers");
  std::vector<VectorXd> out{offsets};
  VectorXd acc = offsets;
  for (int k = 0; k < horizon; ++k) {
    for (Eigen::Index j = 0; j < rows.rows(); ++j) {
      acc(j) -= support(W, (rows.row(j) * prop.gain(k)).transpose());
    }
    out.push_back(acc);
  }
  return out;
}

std::vector<VectorXd> mixed_offsets(const ErrorPropagation& prop,
                                    const Polytope& Wf, const MatrixXd& rows,
                                    const std::vector<VectorXd>& plain,
                                    int horizon, bool include_full_branch) {
  require(static_cast<int>(plain.size()) >= horizon + 1, Errc::kBadParams,
          "plain offsets must cover horizons 0..T");
  const Eigen::Index p = rows.rows();
  // s(k)_j = supp(W_f, (rows_j Acl^k Bw)ᵀ)
  std::vector<VectorXd> supp;
  for (int k = 0; k < horizon; ++k) {
    VectorXd s(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      s(j) = support(Wf, (rows.row(j) * prop.gain(k)).transpose());
    }
    supp.push_back(std::move(s));
  }
  std::vector<VectorXd> out{plain.front()};
  for (int l = 1; l <= horizon; ++l) {
    VectorXd best = plain[l];  // i = 0
    VectorXd worst = VectorXd::Zero(p);
    const int last = include_full_branch ? l : l - 1;
    for (int i = 1; i <= last; ++i) {
      worst += supp[l - i];  // κ = i contributes Acl^{l−i}
      best = best.cwiseMin(plain[l - i] - worst);
    }
    out.push_back(std::move(best));
  }
  return out;
}

double Marginal::lower() const {
  switch (kind) {
    case Kind::kUniform: return a;
    case Kind::kGaussian: return -kGaussianSpan * sigma;
    case Kind::kTruncatedGaussian: return -bound;
  }
  return 0.0;
}

double Marginal::upper() const {
  switch (kind) {
    case Kind::kUniform: return b;
    case Kind::kGaussian: return kGaussianSpan * sigma;
    case Kind::kTruncatedGaussian: return bound;
  }
  return 0.0;
}

double Marginal::cdf(double x) const {
  switch (kind) {
    case Kind::kUniform:
      if (b == a) return x < a ? 0.0 : 1.0;
      return std::clamp((x - a) / (b - a), 0.0, 1.0);
    case Kind::kGaussian:
      return normal_cdf(x / sigma);
    case Kind::kTruncatedGaussian: {
      const double lo = normal_cdf(-bound / sigma);
      const double hi = normal_cdf(bound / sigma);
      return std::clamp((normal_cdf(x / sigma) - lo) / (hi - lo), 0.0, 1.0);
    }
  }
  return 0.0;
}

std::vector<Marginal> independent_marginals(const DisturbanceModel& model) {
  std::vector<Marginal> out;
  switch (model.kind()) {
    case DisturbanceKind::kUniformBox:
      for (Eigen::Index s = 0; s < model.dim(); ++s) {
        Marginal m;
        m.kind = Marginal::Kind::kUniform;
        m.a = model.lower()(s);
        m.b = model.upper()(s);
        out.push_back(m);
      }
      return out;
    case DisturbanceKind::kTruncatedGaussian: {
      const MatrixXd& S = model.covariance();
      require(S.isDiagonal(1e-14), Errc::kBadParams,
              "convolution tightening needs a diagonal covariance");
      for (Eigen::Index s = 0; s < model.dim(); ++s) {
        Marginal m;
        m.kind = Marginal::Kind::kTruncatedGaussian;
        m.sigma = std::sqrt(S(s, s));
        m.bound = std::sqrt(model.radius_squared());
        out.push_back(m);
      }
      return out;
    }
    default:
      fail(Errc::kBadParams,
           "convolution tightening needs independent coordinate marginals");
  }
}

double convolution_quantile(std::span<const Marginal> marginals,
                            std::span<const double> coefficients, double eps,
                            int grid) {
  require(marginals.size() == coefficients.size(), Errc::kDimensionMismatch,
          "one coefficient per marginal");
  require(eps > 0.0 && eps < 1.0, Errc::kBadParams, "eps must be in (0,1)");
  require(grid >= 16, Errc::kGridTooCoarse, "grid needs at least 16 points");
  struct Term {
    const Marginal* m;
    double c;
    double lo;
    double hi;
  };
  std::vector<Term> terms;
  double span = 0.0;
  double origin = 0.0;
  for (std::size_t k = 0; k < marginals.size(); ++k) {
    const double c = coefficients[k];
    if (std::abs(c) < 1e-15) continue;
    const double x0 = c * marginals[k].lower();
    const double x1 = c * marginals[k].upper();
    terms.push_back({&marginals[k], c, std::min(x0, x1), std::max(x0, x1)});
    span += std::abs(x1 - x0);
    origin += std::min(x0, x1);
  }
  if (terms.empty() || span == 0.0) return origin;
  const double dx = span / grid;
  auto scaled_cdf = [](const Term& t, double x) {
    return t.c > 0.0 ? t.m->cdf(x / t.c) : 1.0 - t.m->cdf(x / t.c);
  };
  std::vector<double> pmf{1.0};
  for (const auto& t : terms) {
    const auto bins = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil((t.hi - t.lo) / dx - 1e-9)));
    std::vector<double> mass(bins);
    double prev = scaled_cdf(t, t.lo);
    for (std::size_t k = 0; k < bins; ++k) {
      const double edge =
          k + 1 == bins ? t.hi : t.lo + static_cast<double>(k + 1) * dx;
      const double cur = scaled_cdf(t, edge);
      mass[k] = cur - prev;
      prev = cur;
    }
    mass.front() += scaled_cdf(t, t.lo);  // atom at the lower edge, if any
    std::vector<double> next(pmf.size() + bins - 1, 0.0);
    for (std::size_t i = 0; i < pmf.size(); ++i) {
      if (pmf[i] == 0.0) continue;
      for (std::size_t k = 0; k < bins; ++k) next[i + k] += pmf[i] * mass[k];
    }
    double total = 0.0;
    for (double v : next) total += v;
    require(std::abs(total - 1.0) <= 1e-6, Errc::kGridTooCoarse,
            "convolution lost probability mass");
    for (double& v : next) v /= total;
    pmf = std::move(next);
  }
  // Bin k is uniform on [first_edge + k dx, first_edge + (k+1) dx].
  const double first_edge =
      origin + (static_cast<double>(terms.size()) - 1.0) * 0.5 * dx;
  const double level = 1.0 - eps;
  double cum = 0.0;
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    if (cum + pmf[k] >= level && pmf[k] > 0.0) {
      const double frac = std::clamp((level - cum) / pmf[k], 0.0, 1.0);
      return first_edge + (static_cast<double>(k) + frac) * dx;
    }
    cum += pmf[k];
  }
  return first_edge + static_cast<double>(pmf.size()) * dx;
}

}  // namespace smpc
