#pragma once

// Shared helpers for the unit and acceptance tests. The oracles here are
// written against Boost.Math and share no code with the library.

#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/digamma.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include <Eigen/Dense>
#include <cmath>
#include <functional>

#include "betalink/diagnostics.hpp"
#include "betalink/estimator.hpp"
#include "betalink/model.hpp"
#include "betalink/random.hpp"
#include "betalink/simulate.hpp"

namespace betalink::testing {

struct Instance {
  ModelSpec spec;
  ParamVector theta;
  ResponseVector y;
};

inline Matrix uniform_design(Rng& rng, Index n, Index cols) {
  Matrix m(n, cols);
  for (Index t = 0; t < n; ++t) {
    m(t, 0) = 1.0;
    for (Index j = 1; j < cols; ++j) m(t, j) = rng.uniform();
  }
  return m;
}

inline double random_lambda(Rng& rng, LinkFamily family) {
  if (family.kind() == LinkKind::AoAsymmetric) return std::exp(-1.0 + 2.5 * rng.uniform());
  if (family.kind() == LinkKind::AoSymmetric) return (rng.uniform() < 0.5 ? -1.0 : 1.0) * (0.2 + rng.uniform());
  return 1.0;
}

/// Random admissible (spec, θ, y): uniform(0,1) covariates, moderate
/// coefficients, every σ_t in [0.03, 0.7].
inline Instance random_instance(Rng& rng, Index n, LinkFamily mean, LinkFamily disp, Index r = 3, Index s = 2,
                                bool free1 = true, bool free2 = true) {
  for (;;) {
    const Matrix x = uniform_design(rng, n, r);
    const Matrix z = uniform_design(rng, n, s);
    ParamVector theta;
    theta.beta = Vector(r);
    theta.gamma = Vector(s);
    for (Index j = 0; j < r; ++j) theta.beta[j] = 0.8 * rng.normal();
    theta.gamma[0] = -2.0 + 1.2 * rng.uniform();
    for (Index j = 1; j < s; ++j) theta.gamma[j] = 0.5 * rng.normal();
    theta.lambda1 = random_lambda(rng, mean);
    theta.lambda2 = random_lambda(rng, disp);
    const LambdaMode m1 = free1 ? LambdaMode::estimated() : LambdaMode::fixed(theta.lambda1);
    const LambdaMode m2 = free2 ? LambdaMode::estimated() : LambdaMode::fixed(theta.lambda2);
    ModelSpec spec(x, z, mean, disp, m1, m2);
    const auto sf = try_surfaces(spec, theta);
    if (!sf) continue;
    if (sf->sigma.minCoeff() < 0.03 || sf->sigma.maxCoeff() > 0.7) continue;
    if (sf->mu.minCoeff() < 1e-3 || sf->mu.maxCoeff() > 1 - 1e-3) continue;
    ResponseVector y = simulate_response(spec, theta, rng);
    return {std::move(spec), std::move(theta), std::move(y)};
  }
}

/// Central difference with one Richardson step: O(h⁴) truncation error.
inline Vector fd_gradient(const std::function<double(const Vector&)>& f, const Vector& x, double rel_step = 1e-4) {
  Vector g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    const double h = rel_step * std::max(1.0, std::fabs(x[i]));
    auto diff = [&](double step) {
      Vector a = x, b = x;
      a[i] += step;
      b[i] -= step;
      return (f(a) - f(b)) / (2.0 * step);
    };
    g[i] = (4.0 * diff(h / 2.0) - diff(h)) / 3.0;
  }
  return g;
}

/// max_i |a_i − b_i| / max(|b_i|, floor·‖b‖∞): relative error with a floor
/// so components that vanish by accident do not dominate.
inline double max_relative_error(const Vector& a, const Vector& b, double floor = 1e-2) {
  const double scale = std::max(b.lpNorm<Eigen::Infinity>() * floor, 1e-300);
  double worst = 0.0;
  for (Index i = 0; i < a.size(); ++i) worst = std::max(worst, std::fabs(a[i] - b[i]) / std::max(std::fabs(b[i]), scale));
  return worst;
}

// --- independent beta-density pieces ------------------------------------------

/// log f(y; μ, σ) from the shape parameters, Boost lgamma.
inline double oracle_log_density(double y, double mu, double sigma) {
  const double pf = 1.0 / (sigma * sigma) - 1.0;
  const double p = mu * pf;
  const double q = (1.0 - mu) * pf;
  return boost::math::lgamma(pf) - boost::math::lgamma(p) - boost::math::lgamma(q) + (p - 1.0) * std::log(y) +
         (q - 1.0) * std::log1p(-y);
}

/// (∂ℓ/∂μ, ∂ℓ/∂σ) of one observation.
inline Eigen::Vector2d oracle_density_gradient(double y, double mu, double sigma) {
  using boost::math::digamma;
  const double pf = 1.0 / (sigma * sigma) - 1.0;
  const double p = mu * pf;
  const double q = (1.0 - mu) * pf;
  const double ly = std::log(y);
  const double l1y = std::log1p(-y);
  const double d_mu = pf * ((ly - l1y) - (digamma(p) - digamma(q)));
  const double d_pf = digamma(pf) - mu * digamma(p) - (1.0 - mu) * digamma(q) + mu * ly + (1.0 - mu) * l1y;
  return {d_mu, d_pf * (-2.0 / (sigma * sigma * sigma))};
}

/// E[(∂ℓ/∂μ, ∂ℓ/∂σ)(∂ℓ/∂μ, ∂ℓ/∂σ)ᵀ] by tanh-sinh quadrature over y ∈ (0, 1).
inline Eigen::Matrix2d oracle_density_information(double mu, double sigma) {
  boost::math::quadrature::tanh_sinh<double> integrator;
  Eigen::Matrix2d m;
  for (int a = 0; a < 2; ++a) {
    for (int b = a; b < 2; ++b) {
      auto integrand = [&](double y) {
        if (!(y > 0.0 && y < 1.0)) return 0.0;
        const Eigen::Vector2d g = oracle_density_gradient(y, mu, sigma);
        return g[a] * g[b] * std::exp(oracle_log_density(y, mu, sigma));
      };
      m(a, b) = m(b, a) = integrator.integrate(integrand, 0.0, 1.0);
    }
  }
  return m;
}

/// K(θ) = Σ_t J_tᵀ M_t J_t, with M_t from quadrature and J_t = ∂(μ_t, σ_t)/∂θ
/// from central differences of the inverse links.
inline Matrix oracle_fisher(const ModelSpec& spec, const ParamVector& theta) {
  const Vector flat = theta.pack(spec);
  const Index q = flat.size();
  const Index n = spec.n();
  Matrix jmu(n, q), jsigma(n, q);
  for (Index i = 0; i < q; ++i) {
    const double h = 1e-6 * std::max(1.0, std::fabs(flat[i]));
    Vector a = flat, b = flat;
    a[i] += h;
    b[i] -= h;
    const FittedSurfaces sa = surfaces(spec, ParamVector::unpack(spec, a));
    const FittedSurfaces sb = surfaces(spec, ParamVector::unpack(spec, b));
    jmu.col(i) = (sa.mu - sb.mu) / (2.0 * h);
    jsigma.col(i) = (sa.sigma - sb.sigma) / (2.0 * h);
  }
  const FittedSurfaces sf = surfaces(spec, theta);
  Matrix k = Matrix::Zero(q, q);
  for (Index t = 0; t < n; ++t) {
    const Eigen::Matrix2d m = oracle_density_information(sf.mu[t], sf.sigma[t]);
    Matrix j(2, q);
    j.row(0) = jmu.row(t);
    j.row(1) = jsigma.row(t);
    k += j.transpose() * m * j;
  }
  return k;
}

// --- influence -----------------------------------------------------------------

/// Moves the observation of largest leverage at the true θ by `shift`
/// standard deviations of y* away from μ*, towards the nearer-empty side.
/// Cook-type distances weigh residuals by leverage, so an outlier at a
/// low-leverage row is not an influential point; see the README.
inline Index displace_high_leverage(const ModelSpec& spec, const ParamVector& truth, Vector& y, double shift) {
  const FittedModel at_truth = evaluate_model(spec, ResponseVector(y), truth);
  Index t = 0;
  hat_matrix_diag(at_truth).maxCoeff(&t);
  const ObservationTerms ot = observed_quantities(spec, truth, nullptr);
  const double mu = ot.surfaces.mu[t];
  const double sd = std::sqrt(ystar_variance(mu, ot.surfaces.sigma[t]));
  const double ystar = ot.mustar[t] + (mu < 0.5 ? shift : -shift) * sd;
  y[t] = 1.0 / (1.0 + std::exp(-ystar));
  return t;
}

// --- independent logit/logit variable-dispersion beta regression -------------

struct LogitFit {
  Vector beta, gamma;
  double loglik = 0.0;
  Vector score;
};

inline double logistic(double e) { return 1.0 / (1.0 + std::exp(-e)); }

inline double logit_loglik(const Matrix& x, const Matrix& z, const Vector& y, const Vector& beta, const Vector& gamma) {
  double ll = 0.0;
  for (Index t = 0; t < y.size(); ++t) {
    const double mu = logistic(x.row(t).dot(beta));
    const double sigma = logistic(z.row(t).dot(gamma));
    ll += oracle_log_density(y[t], mu, sigma);
  }
  return ll;
}

inline Vector logit_score(const Matrix& x, const Matrix& z, const Vector& y, const Vector& beta, const Vector& gamma) {
  Vector u = Vector::Zero(beta.size() + gamma.size());
  for (Index t = 0; t < y.size(); ++t) {
    const double mu = logistic(x.row(t).dot(beta));
    const double sigma = logistic(z.row(t).dot(gamma));
    const Eigen::Vector2d g = oracle_density_gradient(y[t], mu, sigma);
    u.head(beta.size()) += g[0] * mu * (1.0 - mu) * x.row(t).transpose();
    u.tail(gamma.size()) += g[1] * sigma * (1.0 - sigma) * z.row(t).transpose();
  }
  return u;
}

/// Damped Newton on the logit/logit likelihood with a finite-difference
/// Hessian of the analytic score.
inline LogitFit logit_fit(const Matrix& x, const Matrix& z, const Vector& y) {
  const Index r = x.cols();
  const Index s = z.cols();
  Vector theta = Vector::Zero(r + s);
  const Vector target = y.unaryExpr([](double v) { return std::log(v / (1.0 - v)); });
  theta.head(r) = x.colPivHouseholderQr().solve(target);
  theta[r] = std::log(0.3 / 0.7);
  auto ll = [&](const Vector& th) { return logit_loglik(x, z, y, th.head(r), th.tail(s)); };
  auto sc = [&](const Vector& th) { return logit_score(x, z, y, th.head(r), th.tail(s)); };
  if (!std::isfinite(ll(theta))) theta.head(r).setZero();
  double f = ll(theta);
  Vector g = sc(theta);
  for (int iter = 0; iter < 500 && g.lpNorm<Eigen::Infinity>() > 1e-11 * static_cast<double>(y.size()); ++iter) {
    Matrix h(r + s, r + s);
    for (Index i = 0; i < r + s; ++i) {
      const double step = 1e-6 * std::max(1.0, std::fabs(theta[i]));
      Vector a = theta, b = theta;
      a[i] += step;
      b[i] -= step;
      h.col(i) = (sc(a) - sc(b)) / (2.0 * step);
    }
    h = 0.5 * (h + h.transpose()).eval();
    Matrix neg = -h;
    double ridge = 0.0;
    Eigen::LLT<Matrix> llt(neg);
    while (llt.info() != Eigen::Success) {
      ridge = ridge == 0.0 ? 1e-6 * neg.diagonal().cwiseAbs().maxCoeff() : ridge * 10.0;
      llt.compute(neg + ridge * Matrix::Identity(r + s, r + s));
    }
    const Vector d = llt.solve(g);
    double t = 1.0;
    bool moved = false;
    for (int k = 0; k < 60; ++k, t *= 0.5) {
      const Vector cand = theta + t * d;
      const double fc = ll(cand);
      if (std::isfinite(fc) && fc >= f - 1e-12 * std::fabs(f)) {
        theta = cand;
        f = fc;
        g = sc(theta);
        moved = true;
        break;
      }
    }
    if (!moved) break;
  }
  return {theta.head(r), theta.tail(s), f, g};
}

}  // namespace betalink::testing
