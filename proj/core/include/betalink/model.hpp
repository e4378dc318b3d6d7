#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "betalink/links.hpp"

namespace betalink {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

/// Smallest σ treated as admissible. Below it pf exceeds 1e12 and the
/// density's terms cancel beyond double precision.
inline constexpr double kMinDispersion = 1e-6;

/// How a link's shape parameter enters the model.
struct LambdaMode {
  bool free = true;
  double value = 1.0;  ///< the fixed value; ignored when free

  static LambdaMode estimated() { return {true, 1.0}; }
  static LambdaMode fixed(double v) { return {false, v}; }
};

/// Design matrices and link choices of a variable-dispersion beta regression.
///
/// X is n×r (mean submodel), Z is n×s (dispersion submodel); by convention the
/// first column of each is the intercept. λ of a fixed link kind is never a
/// parameter, whatever its mode says. Estimation additionally needs n > q;
/// evaluation works for any n ≥ 1.
class ModelSpec {
 public:
  ModelSpec(Matrix x, Matrix z, LinkFamily mean_link, LinkFamily disp_link,
            LambdaMode lambda1 = LambdaMode::estimated(),
            LambdaMode lambda2 = LambdaMode::estimated());

  [[nodiscard]] const Matrix& x() const { return x_; }
  [[nodiscard]] const Matrix& z() const { return z_; }
  [[nodiscard]] LinkFamily mean_link() const { return mean_link_; }
  [[nodiscard]] LinkFamily disp_link() const { return disp_link_; }
  [[nodiscard]] LambdaMode lambda1_mode() const { return lambda1_; }
  [[nodiscard]] LambdaMode lambda2_mode() const { return lambda2_; }

  [[nodiscard]] Index n() const { return x_.rows(); }
  [[nodiscard]] Index r() const { return x_.cols(); }
  [[nodiscard]] Index s() const { return z_.cols(); }
  [[nodiscard]] bool lambda1_free() const { return mean_link_.has_shape_parameter() && lambda1_.free; }
  [[nodiscard]] bool lambda2_free() const { return disp_link_.has_shape_parameter() && lambda2_.free; }
  /// Number of estimated parameters q = r + s + #free λ.
  [[nodiscard]] Index num_params() const { return r() + s() + lambda1_free() + lambda2_free(); }
  [[nodiscard]] Index lambda1_index() const { return r() + s(); }
  [[nodiscard]] Index lambda2_index() const { return r() + s() + lambda1_free(); }

  /// Same design and links with both λ modes replaced.
  [[nodiscard]] ModelSpec with_lambdas(LambdaMode lambda1, LambdaMode lambda2) const;

 private:
  Matrix x_;
  Matrix z_;
  LinkFamily mean_link_;
  LinkFamily disp_link_;
  LambdaMode lambda1_;
  LambdaMode lambda2_;
};

/// θ = (β, γ, λ₁, λ₂).
struct ParamVector {
  Vector beta;
  Vector gamma;
  double lambda1 = 1.0;
  double lambda2 = 1.0;

  /// Flat layout (β, γ, λ₁?, λ₂?) with fixed λ's omitted.
  [[nodiscard]] Vector pack(const ModelSpec& spec) const;
  static ParamVector unpack(const ModelSpec& spec, const Vector& flat);
};

/// Observed responses, each strictly inside (0, 1).
class ResponseVector {
 public:
  explicit ResponseVector(Vector y);
  [[nodiscard]] const Vector& values() const { return y_; }
  [[nodiscard]] Index size() const { return y_.size(); }
  double operator[](Index t) const { return y_[t]; }
  [[nodiscard]] const Vector& log_y() const { return log_y_; }
  [[nodiscard]] const Vector& log1m_y() const { return log1m_y_; }

 private:
  Vector y_;
  Vector log_y_;
  Vector log1m_y_;
};

/// Linear predictors and fitted parameters at θ.
struct FittedSurfaces {
  Vector eta1, eta2;
  Vector mu, sigma;
  Vector precision_factor;  ///< (1 − σ²)/σ²
};

/// Per-observation intermediates of the score and information.
struct ObservationTerms {
  FittedSurfaces surfaces;
  Vector dmu_deta;      ///< diagonal of T
  Vector dsigma_deta;   ///< diagonal of H
  Vector rho;           ///< ∂μ/∂λ₁
  Vector varrho;        ///< ∂σ/∂λ₂
  Vector ystar;         ///< log(y/(1 − y)); empty without y
  Vector mustar;        ///< ψ(μ·pf) − ψ((1 − μ)·pf)
  Vector a;             ///< ∂ℓ_t/∂σ_t; empty without y
  Vector w, c, nu, dstar;
};

/// Surfaces at θ, or std::nullopt when an observation leaves a link domain.
std::optional<FittedSurfaces> try_surfaces(const ModelSpec& spec, const ParamVector& theta);
FittedSurfaces surfaces(const ModelSpec& spec, const ParamVector& theta);

/// log f(y; μ, σ) of the mean/dispersion beta density.
double log_density(double y, double mu, double sigma);

/// Σ log f(y_t; μ_t, σ_t); −∞ when θ leaves a link domain.
double log_likelihood(const ModelSpec& spec, const ParamVector& theta, const ResponseVector& y);

/// U(θ) in the flat layout of ParamVector::pack.
Vector score(const ModelSpec& spec, const ParamVector& theta, const ResponseVector& y);

/// Log-likelihood and score in one pass. Returns false (leaving outputs
/// untouched) when θ is inadmissible.
bool log_likelihood_and_score(const ModelSpec& spec, const ParamVector& theta,
                              const ResponseVector& y, double& loglik, Vector& grad);

/// Expected information K(θ), q×q, assembled symmetrically.
Matrix fisher_information(const ModelSpec& spec, const ParamVector& theta);

/// Every per-observation intermediate; pass y = nullptr to skip the
/// response-dependent entries.
ObservationTerms observed_quantities(const ModelSpec& spec, const ParamVector& theta,
                                     const ResponseVector* y);

}  // namespace betalink
