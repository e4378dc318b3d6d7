#include "betalink/links.hpp"

#include <cmath>
#include <string>

#include "betalink/error.hpp"
#include "betalink/specfun.hpp"

namespace betalink {
namespace {

constexpr double kSeriesCutoff = 0.05;

bool near_logit(double lambda) { return std::fabs(lambda) < kSymmetricLambdaMin; }

double clip_probability(double p) {
  return std::fmin(std::fmax(p, kProbabilityClip), 1.0 - kProbabilityClip);
}

void require_unit_interval(double mu) {
  if (!(mu > 0.0 && mu < 1.0)) {
    throw DomainError("link: argument must lie strictly inside (0, 1), got " + std::to_string(mu));
  }
}

void require_shape(LinkFamily family, double lambda) {
  if (!family.admissible_shape(lambda)) {
    throw DomainError("link " + std::string(family.name()) + ": inadmissible shape parameter " +
                      std::to_string(lambda));
  }
}

// log(1 + e^t) without overflow.
double log1p_exp(double t) { return t > 35.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

LinkPoint logit_inverse(double eta) {
  const double mu = eta >= 0.0 ? 1.0 / (1.0 + std::exp(-eta)) : std::exp(eta) / (1.0 + std::exp(eta));
  return {mu, mu * (1.0 - mu), 0.0};
}

LinkPoint cloglog_inverse(double eta) {
  const double e = std::exp(eta);
  return {-std::expm1(-e), std::exp(eta - e), 0.0};
}

LinkPoint probit_inverse(double eta) {
  return {specfun::std_normal_cdf(eta), specfun::std_normal_pdf(eta), 0.0};
}

// 1/(1+z) − log(1+z)/z, divided by z, for small |z|.
double asym_bracket_over_z_series(double z) {
  double sum = 0.0;
  double zk = 1.0;
  for (int k = 1; k <= 24; ++k) {
    const double term = (k % 2 == 0 ? 1.0 : -1.0) * (static_cast<double>(k) / (k + 1)) * zk;
    sum += term;
    zk *= z;
  }
  return sum;
}

LinkPoint asymmetric_inverse(double eta, double lambda) {
  const double log_z = eta + std::log(lambda);
  const double l = log1p_exp(log_z);  // log(1 + λ e^η)
  const double log_one_minus_mu = -l / lambda;
  const double mu = -std::expm1(log_one_minus_mu);
  const double d_eta = std::exp(eta - (1.0 + lambda) / lambda * l);

  double d_lambda;
  const double z = std::exp(log_z);
  if (z < kSeriesCutoff) {
    d_lambda = std::exp(2.0 * eta + log_one_minus_mu) * asym_bracket_over_z_series(z);
  } else {
    const double bracket = 1.0 / (1.0 + z) - l / z;
    d_lambda = bracket * std::exp(eta - std::log(lambda) + log_one_minus_mu);
  }
  return {mu, d_eta, d_lambda};
}

// 1/(1−x²) − atanh(x)/x = Σ_{k≥1} 2k/(2k+1) x^{2k}
double symmetric_bracket(double x) {
  if (std::fabs(x) < kSeriesCutoff) {
    const double x2 = x * x;
    double sum = 0.0;
    double xk = x2;
    for (int k = 1; k <= 12; ++k) {
      sum += (2.0 * k / (2.0 * k + 1.0)) * xk;
      xk *= x2;
    }
    return sum;
  }
  const double atanh = 0.5 * std::log((1.0 + x) / (1.0 - x));
  return 1.0 / (1.0 - x * x) - atanh / x;
}

std::optional<LinkPoint> symmetric_inverse(double eta, double lambda) {
  if (near_logit(lambda)) return logit_inverse(eta);
  const double x = 0.5 * lambda * eta;
  if (!(std::fabs(x) < 1.0)) return std::nullopt;
  const double kappa = 2.0 * std::atanh(x) / lambda;
  const LinkPoint logistic = logit_inverse(kappa);
  const double v = logistic.d_eta;  // μ(1 − μ)
  return LinkPoint{logistic.value, v / (1.0 - x * x), v * (eta / lambda) * symmetric_bracket(x)};
}

}  // namespace

LinkFamily LinkFamily::from_name(std::string_view name) {
  if (name == "ao-asymmetric") return LinkFamily(LinkKind::AoAsymmetric);
  if (name == "ao-symmetric") return LinkFamily(LinkKind::AoSymmetric);
  if (name == "logit") return LinkFamily(LinkKind::Logit);
  if (name == "cloglog") return LinkFamily(LinkKind::Cloglog);
  if (name == "probit") return LinkFamily(LinkKind::Probit);
  throw InputError("unknown link family '" + std::string(name) +
                   "' (expected ao-asymmetric, ao-symmetric, logit, cloglog or probit)");
}

std::string_view LinkFamily::name() const {
  switch (kind_) {
    case LinkKind::AoAsymmetric: return "ao-asymmetric";
    case LinkKind::AoSymmetric: return "ao-symmetric";
    case LinkKind::Logit: return "logit";
    case LinkKind::Cloglog: return "cloglog";
    case LinkKind::Probit: return "probit";
  }
  return "unknown";
}

bool LinkFamily::admissible_shape(double lambda) const {
  switch (kind_) {
    case LinkKind::AoAsymmetric: return std::isfinite(lambda) && lambda > 0.0;
    case LinkKind::AoSymmetric: return std::isfinite(lambda);
    default: return true;
  }
}

std::optional<LinkPoint> try_inverse(LinkFamily family, double eta, double lambda) {
  if (!std::isfinite(eta)) return std::nullopt;
  std::optional<LinkPoint> point;
  switch (family.kind()) {
    case LinkKind::AoAsymmetric: point = asymmetric_inverse(eta, lambda); break;
    case LinkKind::AoSymmetric: point = symmetric_inverse(eta, lambda); break;
    case LinkKind::Logit: point = logit_inverse(eta); break;
    case LinkKind::Cloglog: point = cloglog_inverse(eta); break;
    case LinkKind::Probit: point = probit_inverse(eta); break;
  }
  if (point) point->value = clip_probability(point->value);
  return point;
}

double link_inverse(LinkFamily family, double eta, double lambda) {
  require_shape(family, lambda);
  const auto point = try_inverse(family, eta, lambda);
  if (!point) {
    throw LinkDomainError("link " + std::string(family.name()) + ": linear predictor " +
                          std::to_string(eta) + " is outside the domain for lambda " +
                          std::to_string(lambda));
  }
  return point->value;
}

double dmu_deta(LinkFamily family, double eta, double lambda) {
  require_shape(family, lambda);
  const auto point = try_inverse(family, eta, lambda);
  if (!point) throw LinkDomainError("dmu_deta: linear predictor outside the link domain");
  return point->d_eta;
}

double dmu_dlambda(LinkFamily family, double eta, double lambda) {
  require_shape(family, lambda);
  const auto point = try_inverse(family, eta, lambda);
  if (!point) throw LinkDomainError("dmu_dlambda: linear predictor outside the link domain");
  return point->d_lambda;
}

double link_eval(LinkFamily family, double mu, double lambda) {
  require_unit_interval(mu);
  require_shape(family, lambda);
  const double logit = std::log(mu) - std::log1p(-mu);
  switch (family.kind()) {
    case LinkKind::AoAsymmetric:
      return std::log(std::expm1(-lambda * std::log1p(-mu)) / lambda);
    case LinkKind::AoSymmetric:
      if (near_logit(lambda)) return logit;
      return 2.0 / lambda * std::tanh(0.5 * lambda * logit);
    case LinkKind::Logit: return logit;
    case LinkKind::Cloglog: return std::log(-std::log1p(-mu));
    case LinkKind::Probit: return specfun::std_normal_quantile(mu);
  }
  return logit;
}

double dg_dmu(LinkFamily family, double mu, double lambda) {
  require_unit_interval(mu);
  require_shape(family, lambda);
  const double v = mu * (1.0 - mu);
  switch (family.kind()) {
    case LinkKind::AoAsymmetric:
      return lambda / ((1.0 - mu) * -std::expm1(lambda * std::log1p(-mu)));
    case LinkKind::AoSymmetric: {
      if (near_logit(lambda)) return 1.0 / v;
      const double t = std::tanh(0.5 * lambda * (std::log(mu) - std::log1p(-mu)));
      return (1.0 - t * t) / v;
    }
    case LinkKind::Logit: return 1.0 / v;
    case LinkKind::Cloglog: return 1.0 / ((1.0 - mu) * -std::log1p(-mu));
    case LinkKind::Probit: return 1.0 / specfun::std_normal_pdf(specfun::std_normal_quantile(mu));
  }
  return 1.0 / v;
}

}  // namespace betalink
