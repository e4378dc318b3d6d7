#include "betalink/diagnostics.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <string>

#include "betalink/simulate.hpp"
#include "betalink/specfun.hpp"
#include "parallel.hpp"

namespace betalink {
namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

Vector hat_weights(const FittedModel& fit) {
  const ObservationTerms terms = observed_quantities(fit.spec, fit.theta_hat, nullptr);
  return terms.surfaces.precision_factor.cwiseProduct(terms.w);
}

bool same_column(const Vector& actual, const Vector& expected) {
  for (Index t = 0; t < actual.size(); ++t) {
    if (std::fabs(actual[t] - expected[t]) > 1e-8 * std::max(1.0, std::fabs(expected[t]))) return false;
  }
  return true;
}

// Type-1 empirical quantile of an ascending sample.
double order_quantile(const std::vector<double>& sorted, double p) {
  const auto k = static_cast<Index>(sorted.size());
  const Index pos = std::clamp<Index>(static_cast<Index>(std::ceil(p * static_cast<double>(k) - 1e-12)), 1, k);
  return sorted[pos - 1];
}

Vector sorted_abs(const Vector& r) {
  Vector a = r.unaryExpr([](double v) { return std::isnan(v) ? 0.0 : std::fabs(v); });
  std::sort(a.data(), a.data() + a.size());
  return a;
}

}  // namespace

Vector residual_ordinary(const FittedModel& fit, const ResponseVector& y) {
  const Vector& mu = fit.surfaces.mu;
  const Vector& sigma = fit.surfaces.sigma;
  return (y.values() - mu).array() / (mu.array() * (1.0 - mu.array()) * sigma.array().square()).sqrt();
}

double ystar_variance(double mu, double sigma) {
  const double pf = (1.0 - sigma * sigma) / (sigma * sigma);
  return specfun::trigamma(mu * pf) + specfun::trigamma((1.0 - mu) * pf);
}

Vector hat_diagonal(const Matrix& x, const Vector& weights) {
  if (weights.size() != x.rows()) throw InputError("hat_diagonal: weight count differs from row count");
  if ((weights.array() < 0.0).any()) throw InputError("hat_diagonal: negative weight");
  const Matrix xs = weights.cwiseSqrt().asDiagonal() * x;
  const Matrix inner = xs.transpose() * xs;
  const Eigen::LLT<Matrix> llt(inner);
  const double scale = inner.diagonal().maxCoeff();
  if (llt.info() != Eigen::Success || !(scale > 0.0) ||
      llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 1e-7 * std::sqrt(scale)) {
    throw SingularMatrixError("hat matrix: XᵀΣWX is singular");
  }
  // h_tt = ‖L⁻¹ x̃_t‖² with x̃ = (ΣW)^{1/2}X.
  const Matrix solved = llt.matrixL().solve(xs.transpose());
  return solved.colwise().squaredNorm().transpose().cwiseMax(0.0).cwiseMin(1.0);
}

Vector hat_matrix_diag(const FittedModel& fit) { return hat_diagonal(fit.spec.x(), hat_weights(fit)); }

Vector residual_weighted2(const FittedModel& fit, const ResponseVector& y) {
  return residual_weighted2(fit, y, hat_matrix_diag(fit));
}

Vector residual_weighted2(const FittedModel& fit, const ResponseVector& y, const Vector& hat) {
  const ObservationTerms terms = observed_quantities(fit.spec, fit.theta_hat, &y);
  const Index n = fit.n();
  Vector r(n);
  for (Index t = 0; t < n; ++t) {
    if (hat[t] >= 1.0 - kLeverageEps) {
      r[t] = kNaN;
      continue;
    }
    const double var = ystar_variance(terms.surfaces.mu[t], terms.surfaces.sigma[t]);
    r[t] = (terms.ystar[t] - terms.mustar[t]) / std::sqrt(var * (1.0 - hat[t]));
  }
  return r;
}

Vector cook_distance(const FittedModel& fit, const ResponseVector& y) {
  const Vector hat = hat_matrix_diag(fit);
  return cook_distance(hat, residual_weighted2(fit, y, hat));
}

Vector cook_distance(const Vector& hat, const Vector& r_weighted2) {
  Vector c(hat.size());
  for (Index t = 0; t < hat.size(); ++t) {
    c[t] = hat[t] >= 1.0 - kLeverageEps ? std::numeric_limits<double>::infinity()
                                         : hat[t] / (1.0 - hat[t]) * r_weighted2[t] * r_weighted2[t];
  }
  return c;
}

Vector half_normal_scores(Index n) {
  Vector s(n);
  const double nn = static_cast<double>(n);
  for (Index t = 1; t <= n; ++t) {
    s[t - 1] = specfun::std_normal_quantile((static_cast<double>(t) + nn + 0.5) / (2.0 * nn + 10.0 / 8.0));
  }
  return s;
}

EnvelopeBand simulated_envelope(const ModelSpec& spec, const ResponseVector& y, const FittedModel& fit_in,
                                const EnvelopeOptions& options, const FitOptions& fit_options) {
  if (options.k < 19) throw InputError("envelope needs at least 19 simulated samples");
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) throw InputError("envelope alpha must lie in (0, 1)");
  const Index n = spec.n();
  const int k = options.k;
  FitOptions inner = fit_options;
  inner.start = fit_in.theta_hat;

  Matrix sims(n, k);
  detail::parallel_for(k, options.threads, [&](int i) {
    for (int attempt = 0; attempt < options.max_attempts; ++attempt) {
      Rng rng = Rng::stream(options.seed, static_cast<std::uint64_t>(i) * 64 + attempt);
      const ResponseVector ys = simulate_response(spec, fit_in.theta_hat, rng);
      try {
        const FittedModel f = fit(spec, ys, inner);
        sims.col(i) = sorted_abs(residual_weighted2(f, ys));
        return;
      } catch (const ConvergenceError&) {
      } catch (const DomainError&) {
      } catch (const SingularMatrixError&) {
      }
    }
    throw ConvergenceError("envelope replication " + std::to_string(i) + " failed to converge after " +
                           std::to_string(options.max_attempts) + " draws");
  });

  EnvelopeBand band;
  band.k = k;
  band.alpha = options.alpha;
  band.observed = sorted_abs(residual_weighted2(fit_in, y));
  band.scores = half_normal_scores(n);
  band.lower.resize(n);
  band.mean.resize(n);
  band.upper.resize(n);
  std::vector<double> row(k);
  Index outside = 0;
  for (Index t = 0; t < n; ++t) {
    for (int i = 0; i < k; ++i) row[i] = sims(t, i);
    std::sort(row.begin(), row.end());
    band.lower[t] = order_quantile(row, options.alpha / 2.0);
    band.upper[t] = order_quantile(row, 1.0 - options.alpha / 2.0);
    band.mean[t] = sims.row(t).mean();
    if (band.observed[t] < band.lower[t] || band.observed[t] > band.upper[t]) ++outside;
  }
  band.outside_fraction = static_cast<double>(outside) / static_cast<double>(n);
  return band;
}

double gaic(double loglik, Index q, double penalty) { return -2.0 * loglik + penalty * static_cast<double>(q); }

double information_criterion(const FittedModel& fit, double penalty) {
  return gaic(fit.loglik, fit.num_params(), penalty);
}

double aic(const FittedModel& fit) { return information_criterion(fit, 2.0); }

double sic(const FittedModel& fit) { return information_criterion(fit, std::log(static_cast<double>(fit.n()))); }

double information_criterion(const FittedModel& fit, std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "aic") return aic(fit);
  if (lower == "sic" || lower == "bic") return sic(fit);
  throw InputError("unknown information criterion '" + std::string(name) + "'");
}

FittedModel null_fit(const ResponseVector& y, const FitOptions& options) {
  const Matrix ones = Matrix::Ones(y.size(), 1);
  const ModelSpec spec(ones, ones, LinkFamily(LinkKind::Logit), LinkFamily(LinkKind::Logit));
  FitOptions opts = options;
  opts.start.reset();
  return fit(spec, y, opts);
}

double r2_generalized(double loglik, double null_loglik, Index n) {
  if (loglik < null_loglik - 1e-8) throw InputError("R2_G: fitted log-likelihood is below the null model's");
  const double gain = std::max(0.0, loglik - null_loglik);
  return -std::expm1(-2.0 * gain / static_cast<double>(n));
}

double r2_generalized(const FittedModel& fit, const FittedModel& null) {
  return r2_generalized(fit.loglik, null.loglik, fit.n());
}

Vector marginal_impact(const FittedModel& fit, Index column, const DerivedColumns& derived) {
  const Matrix& x = fit.spec.x();
  const Index r = x.cols();
  auto check_index = [&](Index c, const char* what) {
    if (c < 0 || c >= r) throw InputError(std::string("marginal impact: ") + what + " column out of range");
  };
  check_index(column, "covariate");
  if ((x.col(column).array() == x(0, column)).all())
    throw InputError("marginal impact: covariate column is constant");
  const Vector& beta = fit.theta_hat.beta;
  const Vector xj = x.col(column);
  Vector slope = Vector::Constant(x.rows(), beta[column]);
  if (derived.square) {
    const Index c = *derived.square;
    check_index(c, "square");
    if (!same_column(x.col(c), xj.array().square().matrix()))
      throw InputError("marginal impact: column " + std::to_string(c) + " is not the square of the covariate");
    slope += 2.0 * beta[c] * xj;
  }
  for (const auto& [product, other] : derived.products) {
    check_index(product, "interaction");
    check_index(other, "interaction partner");
    if (!same_column(x.col(product), xj.cwiseProduct(x.col(other))))
      throw InputError("marginal impact: column " + std::to_string(product) +
                       " is not the covariate times column " + std::to_string(other));
    slope += beta[product] * x.col(other);
  }
  const ObservationTerms terms = observed_quantities(fit.spec, fit.theta_hat, nullptr);
  return terms.dmu_deta.cwiseProduct(slope);
}

double mse_fit(const FittedModel& fit, const ResponseVector& y) {
  return (y.values() - fit.surfaces.mu).squaredNorm() / static_cast<double>(fit.n());
}

DiagnosticsReport diagnose(const FittedModel& fit, const ResponseVector& y, const FittedModel& null,
                           double cook_threshold) {
  DiagnosticsReport rep;
  rep.r_ordinary = residual_ordinary(fit, y);
  rep.hat_diag = hat_matrix_diag(fit);
  rep.r_weighted2 = residual_weighted2(fit, y, rep.hat_diag);
  rep.cook = cook_distance(rep.hat_diag, rep.r_weighted2);
  rep.aic = aic(fit);
  rep.sic = sic(fit);
  rep.r2_g = r2_generalized(fit, null);
  rep.mse_fit = mse_fit(fit, y);
  for (Index t = 0; t < fit.n(); ++t) {
    if (std::isnan(rep.r_weighted2[t]) || std::fabs(rep.r_weighted2[t]) > 2.0 || rep.cook[t] > cook_threshold)
      rep.flagged.push_back(t);
  }
  return rep;
}

}  // namespace betalink
