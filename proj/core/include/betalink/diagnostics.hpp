#pragma once

#include <cstdint>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "betalink/estimator.hpp"

namespace betalink {

/// Residual reported when h_tt ≥ 1 − kLeverageEps: the observation is
/// fitted exactly and carries no residual information.
inline constexpr double kLeverageEps = 1e-10;
inline constexpr double kCookThreshold = 0.5;

/// r_t = (y_t − μ̂_t)/sqrt(μ̂_t(1 − μ̂_t)σ̂_t²).
Vector residual_ordinary(const FittedModel& fit, const ResponseVector& y);

/// Var(y*_t) = ψ′(μ·pf) + ψ′((1 − μ)·pf).
double ystar_variance(double mu, double sigma);

/// Diagonal of the hat matrix H = (WΣ)^{1/2}X(XᵀΣWX)⁻¹Xᵀ(ΣW)^{1/2} for
/// weights ΣW given per observation. Throws SingularMatrixError when XᵀΣWX
/// is singular.
Vector hat_diagonal(const Matrix& x, const Vector& weights);
Vector hat_matrix_diag(const FittedModel& fit);

/// r^pp_t = (y*_t − μ̂*_t)/sqrt(Var(y*_t)(1 − h_tt)); NaN where h_tt is
/// within kLeverageEps of 1.
Vector residual_weighted2(const FittedModel& fit, const ResponseVector& y);
Vector residual_weighted2(const FittedModel& fit, const ResponseVector& y, const Vector& hat);

/// C_t = h_tt/(1 − h_tt)·(r^pp_t)²; +∞ where h_tt is within kLeverageEps of 1.
Vector cook_distance(const FittedModel& fit, const ResponseVector& y);
Vector cook_distance(const Vector& hat, const Vector& r_weighted2);

struct EnvelopeOptions {
  int k = 100;
  double alpha = 0.05;
  std::uint64_t seed = 1;
  int threads = 0;
  int max_attempts = 5;  ///< draws per replication before giving up
};

struct EnvelopeBand {
  Vector observed;  ///< sorted |r^pp| of the data
  Vector lower, mean, upper;
  Vector scores;    ///< Φ⁻¹((t + n + 1/2)/(2n + 10/8)), t = 1…n
  int k = 0;
  double alpha = 0.05;
  double outside_fraction = 0.0;
};

/// Half-normal plot scores for n observations.
Vector half_normal_scores(Index n);

/// Simulated envelope: k samples from the fitted model are refitted and
/// their sorted |r^pp| give pointwise (α/2, mean, 1 − α/2) bands.
EnvelopeBand simulated_envelope(const ModelSpec& spec, const ResponseVector& y, const FittedModel& fit,
                                const EnvelopeOptions& options = {}, const FitOptions& fit_options = {});

/// GAIC = −2ℓ + P·q.
double gaic(double loglik, Index q, double penalty);
double information_criterion(const FittedModel& fit, double penalty);
double aic(const FittedModel& fit);
double sic(const FittedModel& fit);
/// Accepts "aic" or "sic".
double information_criterion(const FittedModel& fit, std::string_view name);

/// Constant-μ, constant-σ fit with no link parameter.
FittedModel null_fit(const ResponseVector& y, const FitOptions& options = {});

/// R²_G = 1 − exp(−(2/n)(ℓ − ℓ₀)); throws InputError when ℓ < ℓ₀ − 1e-8.
double r2_generalized(double loglik, double null_loglik, Index n);
double r2_generalized(const FittedModel& fit, const FittedModel& null);

/// Mean-submodel columns that are functions of a base covariate.
struct DerivedColumns {
  std::optional<Index> square;                     ///< column holding x_j²
  std::vector<std::pair<Index, Index>> products;   ///< (column of x_j·x_k, column of x_k)
};

/// ∂μ_t/∂x_tj = dμ/dη · (β_j + 2β_{j²}x_tj + Σ β_{jk}x_tk). Every derived
/// column must hold the declared function of the design; otherwise
/// InputError. The base column must not be the intercept.
Vector marginal_impact(const FittedModel& fit, Index column, const DerivedColumns& derived = {});

/// (1/n)Σ(y_t − μ̂_t)².
double mse_fit(const FittedModel& fit, const ResponseVector& y);

struct DiagnosticsReport {
  Vector r_ordinary, r_weighted2, hat_diag, cook;
  double aic = 0.0, sic = 0.0;
  double r2_g = 0.0;
  double mse_fit = 0.0;
  std::vector<Index> flagged;  ///< |r^pp| > 2 or C_t > cook_threshold
};

DiagnosticsReport diagnose(const FittedModel& fit, const ResponseVector& y, const FittedModel& null,
                           double cook_threshold = kCookThreshold);

}  // namespace betalink
