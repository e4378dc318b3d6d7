#pragma once

// Scalar special functions used by the beta likelihood and by the
// large-sample inference code. All functions are pure and thread-safe.

namespace betalink::specfun {

inline constexpr double kEulerGamma = 0.57721566490153286061;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kLnSqrt2Pi = 0.91893853320467274178;

/// log Γ(u) for u > 0. Throws DomainError otherwise.
double log_gamma(double u);

/// log B(a, b) = log Γ(a) + log Γ(b) − log Γ(a + b), evaluated without
/// cancellation when a or b is large.
double log_beta(double a, double b);

/// ψ(u) = d log Γ(u) / du for u > 0.
double digamma(double u);

/// ψ′(u) for u > 0.
double trigamma(double u);

/// ψ′(u) − 1/u, without the cancellation of forming the difference directly
/// when u is large.
double trigamma_excess(double u);

double std_normal_pdf(double x);
double std_normal_cdf(double x);

/// Φ⁻¹(p) for 0 < p < 1: rational starting value plus one Halley step.
double std_normal_quantile(double p);

/// Regularized lower incomplete gamma P(a, x), a > 0, x ≥ 0.
double gamma_p(double a, double x);
/// Regularized upper incomplete gamma Q(a, x) = 1 − P(a, x), computed directly.
double gamma_q(double a, double x);

double chi_squared_cdf(double x, int dof);
/// Upper tail 1 − F(x); used for p-values.
double chi_squared_sf(double x, int dof);

}  // namespace betalink::specfun
