#include "betalink/model.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "betalink/error.hpp"
#include "betalink/specfun.hpp"

namespace betalink {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

Index column_rank(const Matrix& m) {
  Eigen::ColPivHouseholderQR<Matrix> qr(m);
  return qr.rank();
}

// (1 − σ²)/σ² without cancellation at σ near 1.
double precision_factor(double sigma) { return (1.0 - sigma) * (1.0 + sigma) / (sigma * sigma); }

struct LinkTerms {
  FittedSurfaces surfaces;
  Vector dmu_deta, dsigma_deta, rho, varrho;
};

std::optional<LinkTerms> try_link_terms(const ModelSpec& spec, const ParamVector& theta) {
  if (theta.beta.size() != spec.r() || theta.gamma.size() != spec.s()) {
    throw InputError("parameter vector does not match the design: expected " +
                     std::to_string(spec.r()) + " mean and " + std::to_string(spec.s()) +
                     " dispersion coefficients");
  }
  if (!spec.mean_link().admissible_shape(theta.lambda1) ||
      !spec.disp_link().admissible_shape(theta.lambda2)) {
    return std::nullopt;
  }
  const Index n = spec.n();
  LinkTerms out;
  FittedSurfaces& sf = out.surfaces;
  sf.eta1 = spec.x() * theta.beta;
  sf.eta2 = spec.z() * theta.gamma;
  sf.mu.resize(n);
  sf.sigma.resize(n);
  sf.precision_factor.resize(n);
  out.dmu_deta.resize(n);
  out.dsigma_deta.resize(n);
  out.rho.resize(n);
  out.varrho.resize(n);
  for (Index t = 0; t < n; ++t) {
    const auto m = try_inverse(spec.mean_link(), sf.eta1[t], theta.lambda1);
    if (!m) return std::nullopt;
    const auto d = try_inverse(spec.disp_link(), sf.eta2[t], theta.lambda2);
    if (!d || d->value < kMinDispersion) return std::nullopt;
    sf.mu[t] = m->value;
    sf.sigma[t] = d->value;
    sf.precision_factor[t] = precision_factor(d->value);
    out.dmu_deta[t] = m->d_eta;
    out.dsigma_deta[t] = d->d_eta;
    out.rho[t] = m->d_lambda;
    out.varrho[t] = d->d_lambda;
  }
  return out;
}

void check_response(const ModelSpec& spec, const ResponseVector& y) {
  if (y.size() != spec.n()) {
    throw InputError("response has " + std::to_string(y.size()) + " observations but the design has " +
                     std::to_string(spec.n()) + " rows");
  }
}

}  // namespace

ModelSpec::ModelSpec(Matrix x, Matrix z, LinkFamily mean_link, LinkFamily disp_link,
                     LambdaMode lambda1, LambdaMode lambda2)
    : x_(std::move(x)),
      z_(std::move(z)),
      mean_link_(mean_link),
      disp_link_(disp_link),
      lambda1_(lambda1),
      lambda2_(lambda2) {
  if (x_.rows() != z_.rows()) {
    throw InputError("mean and dispersion designs have different row counts (" +
                     std::to_string(x_.rows()) + " vs " + std::to_string(z_.rows()) + ")");
  }
  if (x_.cols() < 1 || z_.cols() < 1) throw InputError("each submodel needs at least one column");
  if (!x_.allFinite() || !z_.allFinite()) throw InputError("design matrices contain non-finite values");
  if (n() < 1) throw InputError("design has no rows");
  if (column_rank(x_) < x_.cols()) throw InputError("mean design matrix X is rank deficient");
  if (column_rank(z_) < z_.cols()) throw InputError("dispersion design matrix Z is rank deficient");
  if (!lambda1_.free && !mean_link_.admissible_shape(lambda1_.value)) {
    throw InputError("fixed lambda1 is inadmissible for the " + std::string(mean_link_.name()) + " link");
  }
  if (!lambda2_.free && !disp_link_.admissible_shape(lambda2_.value)) {
    throw InputError("fixed lambda2 is inadmissible for the " + std::string(disp_link_.name()) + " link");
  }
}

ModelSpec ModelSpec::with_lambdas(LambdaMode lambda1, LambdaMode lambda2) const {
  return ModelSpec(x_, z_, mean_link_, disp_link_, lambda1, lambda2);
}

Vector ParamVector::pack(const ModelSpec& spec) const {
  Vector flat(spec.num_params());
  flat.head(spec.r()) = beta;
  flat.segment(spec.r(), spec.s()) = gamma;
  if (spec.lambda1_free()) flat[spec.lambda1_index()] = lambda1;
  if (spec.lambda2_free()) flat[spec.lambda2_index()] = lambda2;
  return flat;
}

ParamVector ParamVector::unpack(const ModelSpec& spec, const Vector& flat) {
  if (flat.size() != spec.num_params()) throw InputError("flat parameter vector has the wrong length");
  ParamVector theta;
  theta.beta = flat.head(spec.r());
  theta.gamma = flat.segment(spec.r(), spec.s());
  theta.lambda1 = spec.lambda1_free() ? flat[spec.lambda1_index()] : spec.lambda1_mode().value;
  theta.lambda2 = spec.lambda2_free() ? flat[spec.lambda2_index()] : spec.lambda2_mode().value;
  return theta;
}

ResponseVector::ResponseVector(Vector y) : y_(std::move(y)) {
  for (Index t = 0; t < y_.size(); ++t) {
    if (!(y_[t] > 0.0 && y_[t] < 1.0)) {
      throw InputError("response value " + std::to_string(y_[t]) + " at row " + std::to_string(t + 1) +
                       " is not strictly inside (0, 1)");
    }
  }
  log_y_ = y_.array().log();
  log1m_y_ = (-y_).array().log1p();
}

std::optional<FittedSurfaces> try_surfaces(const ModelSpec& spec, const ParamVector& theta) {
  auto terms = try_link_terms(spec, theta);
  if (!terms) return std::nullopt;
  return std::move(terms->surfaces);
}

FittedSurfaces surfaces(const ModelSpec& spec, const ParamVector& theta) {
  auto sf = try_surfaces(spec, theta);
  if (!sf) throw LinkDomainError("parameter vector leaves the domain of a link function");
  return std::move(*sf);
}

double log_density(double y, double mu, double sigma) {
  if (!(y > 0.0 && y < 1.0) || !(mu > 0.0 && mu < 1.0) || !(sigma > 0.0 && sigma < 1.0)) {
    throw DomainError("log_density: y, mu and sigma must all lie strictly inside (0, 1)");
  }
  const double pf = precision_factor(sigma);
  const double p = mu * pf;
  const double q = (1.0 - mu) * pf;
  return -specfun::log_beta(p, q) + (p - 1.0) * std::log(y) + (q - 1.0) * std::log1p(-y);
}

bool log_likelihood_and_score(const ModelSpec& spec, const ParamVector& theta,
                              const ResponseVector& y, double& loglik, Vector& grad) {
  check_response(spec, y);
  const auto terms = try_link_terms(spec, theta);
  if (!terms) return false;
  const FittedSurfaces& sf = terms->surfaces;
  const Index n = spec.n();
  const Vector& log_y = y.log_y();
  const Vector& log1m_y = y.log1m_y();

  Vector d_mu(n);     // ∂ℓ_t/∂μ_t · ∂μ_t/∂η₁t
  Vector d_sigma(n);  // ∂ℓ_t/∂σ_t · ∂σ_t/∂η₂t
  double u_lambda1 = 0.0;
  double u_lambda2 = 0.0;
  double ll = 0.0;
  for (Index t = 0; t < n; ++t) {
    const double mu = sf.mu[t];
    const double sigma = sf.sigma[t];
    const double pf = sf.precision_factor[t];
    const double p = mu * pf;
    const double q = (1.0 - mu) * pf;
    ll += -specfun::log_beta(p, q) + (p - 1.0) * log_y[t] + (q - 1.0) * log1m_y[t];

    const double psi_q = specfun::digamma(q);
    const double resid = (log_y[t] - log1m_y[t]) - (specfun::digamma(p) - psi_q);
    const double dl_dmu = pf * resid;
    const double a = -2.0 / (sigma * sigma * sigma) *
                     (mu * resid + specfun::digamma(pf) - psi_q + log1m_y[t]);
    d_mu[t] = dl_dmu * terms->dmu_deta[t];
    d_sigma[t] = a * terms->dsigma_deta[t];
    u_lambda1 += dl_dmu * terms->rho[t];
    u_lambda2 += a * terms->varrho[t];
  }
  if (!std::isfinite(ll)) return false;

  grad.resize(spec.num_params());
  grad.head(spec.r()).noalias() = spec.x().transpose() * d_mu;
  grad.segment(spec.r(), spec.s()).noalias() = spec.z().transpose() * d_sigma;
  if (spec.lambda1_free()) grad[spec.lambda1_index()] = u_lambda1;
  if (spec.lambda2_free()) grad[spec.lambda2_index()] = u_lambda2;
  loglik = ll;
  return grad.allFinite();
}

double log_likelihood(const ModelSpec& spec, const ParamVector& theta, const ResponseVector& y) {
  check_response(spec, y);
  const auto sf = try_surfaces(spec, theta);
  if (!sf) return kNegInf;
  double ll = 0.0;
  for (Index t = 0; t < spec.n(); ++t) {
    const double pf = sf->precision_factor[t];
    const double p = sf->mu[t] * pf;
    const double q = (1.0 - sf->mu[t]) * pf;
    ll += -specfun::log_beta(p, q) + (p - 1.0) * y.log_y()[t] + (q - 1.0) * y.log1m_y()[t];
  }
  return std::isfinite(ll) ? ll : kNegInf;
}

Vector score(const ModelSpec& spec, const ParamVector& theta, const ResponseVector& y) {
  double ll = 0.0;
  Vector grad;
  if (!log_likelihood_and_score(spec, theta, y, ll, grad)) {
    throw LinkDomainError("score: parameter vector is outside the model's domain");
  }
  return grad;
}

ObservationTerms observed_quantities(const ModelSpec& spec, const ParamVector& theta,
                                     const ResponseVector* y) {
  if (y) check_response(spec, *y);
  auto link_terms = try_link_terms(spec, theta);
  if (!link_terms) throw LinkDomainError("parameter vector leaves the domain of a link function");

  ObservationTerms out;
  out.surfaces = std::move(link_terms->surfaces);
  out.dmu_deta = std::move(link_terms->dmu_deta);
  out.dsigma_deta = std::move(link_terms->dsigma_deta);
  out.rho = std::move(link_terms->rho);
  out.varrho = std::move(link_terms->varrho);

  const Index n = spec.n();
  const FittedSurfaces& sf = out.surfaces;
  out.mustar.resize(n);
  out.w.resize(n);
  out.c.resize(n);
  out.nu.resize(n);
  out.dstar.resize(n);
  if (y) {
    out.ystar.resize(n);
    out.a.resize(n);
  }
  for (Index t = 0; t < n; ++t) {
    const double mu = sf.mu[t];
    const double sigma = sf.sigma[t];
    const double pf = sf.precision_factor[t];
    const double p = mu * pf;
    const double q = (1.0 - mu) * pf;
    const double psi_q = specfun::digamma(q);
    out.mustar[t] = specfun::digamma(p) - psi_q;

    // ψ′ split into 1/u plus an excess so the O(1/pf) parts cancel exactly.
    const double ex_p = specfun::trigamma_excess(p);
    const double ex_q = specfun::trigamma_excess(q);
    const double ex_pf = specfun::trigamma_excess(pf);
    const double trig_sum = specfun::trigamma(p) + specfun::trigamma(q);
    const double sigma3 = sigma * sigma * sigma;
    const double tmu = out.dmu_deta[t];

    out.w[t] = pf * trig_sum * tmu * tmu;
    out.c[t] = pf * (2.0 / sigma3) * ((1.0 - mu) * ex_q - mu * ex_p);
    out.nu[t] = pf * pf * trig_sum;
    out.dstar[t] = (4.0 / (sigma3 * sigma3)) * (-ex_pf + mu * mu * ex_p + (1.0 - mu) * (1.0 - mu) * ex_q);

    if (y) {
      const double ystar = y->log_y()[t] - y->log1m_y()[t];
      out.ystar[t] = ystar;
      out.a[t] = -2.0 / sigma3 *
                 (mu * (ystar - out.mustar[t]) + specfun::digamma(pf) - psi_q + y->log1m_y()[t]);
    }
  }
  return out;
}

Matrix fisher_information(const ModelSpec& spec, const ParamVector& theta) {
  const ObservationTerms terms = observed_quantities(spec, theta, nullptr);
  const Index r = spec.r();
  const Index s = spec.s();
  const Index q = spec.num_params();
  const Vector& pf = terms.surfaces.precision_factor;
  const Vector& tm = terms.dmu_deta;
  const Vector& hs = terms.dsigma_deta;
  const Matrix& x = spec.x();
  const Matrix& z = spec.z();

  const Vector wbb = pf.cwiseProduct(terms.w);
  const Vector wbg = terms.c.cwiseProduct(tm).cwiseProduct(hs);
  const Vector wgg = terms.dstar.cwiseProduct(hs).cwiseProduct(hs);

  Matrix k = Matrix::Zero(q, q);
  k.topLeftCorner(r, r).noalias() = x.transpose() * wbb.asDiagonal() * x;
  k.block(0, r, r, s).noalias() = x.transpose() * wbg.asDiagonal() * z;
  k.block(r, r, s, s).noalias() = z.transpose() * wgg.asDiagonal() * z;

  if (spec.lambda1_free()) {
    const Index i = spec.lambda1_index();
    const Vector& rho = terms.rho;
    k.block(0, i, r, 1).noalias() = x.transpose() * terms.nu.cwiseProduct(tm).cwiseProduct(rho);
    k.block(r, i, s, 1).noalias() = z.transpose() * terms.c.cwiseProduct(hs).cwiseProduct(rho);
    k(i, i) = (terms.nu.array() * rho.array().square()).sum();
  }
  if (spec.lambda2_free()) {
    const Index j = spec.lambda2_index();
    const Vector& varrho = terms.varrho;
    k.block(0, j, r, 1).noalias() = x.transpose() * terms.c.cwiseProduct(tm).cwiseProduct(varrho);
    k.block(r, j, s, 1).noalias() = z.transpose() * terms.dstar.cwiseProduct(hs).cwiseProduct(varrho);
    k(j, j) = (terms.dstar.array() * varrho.array().square()).sum();
    if (spec.lambda1_free()) {
      k(spec.lambda1_index(), j) = (terms.c.array() * terms.rho.array() * varrho.array()).sum();
    }
  }
  // Mirror the upper triangle so K = Kᵀ holds bit for bit.
  k.triangularView<Eigen::StrictlyLower>() = k.transpose();
  return k;
}

}  // namespace betalink
