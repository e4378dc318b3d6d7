#pragma once

#include <optional>
#include <string>
#include <vector>

#include "betalink/error.hpp"
#include "betalink/model.hpp"

namespace betalink {

/// Starting value policy for one link parameter.
struct LambdaStart {
  enum class Kind { Default, Explicit, Grid };
  Kind kind = Kind::Default;
  double value = 1.0;

  static LambdaStart by_default() { return {Kind::Default, 1.0}; }
  static LambdaStart explicit_value(double v) { return {Kind::Explicit, v}; }
  static LambdaStart grid() { return {Kind::Grid, 1.0}; }
};

struct FitOptions {
  int max_iterations = 500;
  /// Converged when max|U(θ)| ≤ gradient_tolerance · n, with the λ entry of
  /// an asymmetric link measured as λ·U_λ (the log-scale score).
  double gradient_tolerance = 1e-6;
  LambdaStart lambda1_start;
  LambdaStart lambda2_start;
  std::vector<double> asymmetric_grid{0.25, 0.5, 1.0, 2.0, 5.0};
  std::vector<double> symmetric_grid{0.1, 0.39, 0.67, 1.0};
  /// Retry from the grid when the default start fails.
  bool multistart = true;
  /// Newton refinement with a finite-difference Hessian after BFGS stops.
  int polish_steps = 4;
  /// Optional user starting point; overrides initial_values when set.
  std::optional<ParamVector> start;
};

/// Parameters held at given values, addressed in the flat θ layout of the
/// model being fitted.
struct Restriction {
  std::vector<Index> indices;
  std::vector<double> values;

  [[nodiscard]] bool empty() const { return indices.empty(); }
  [[nodiscard]] int size() const { return static_cast<int>(indices.size()); }
};

struct StartRecord {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  int attempt = 0;  ///< 0 for the default start, k > 0 for the k-th multistart cell
};

struct FittedModel {
  ModelSpec spec;
  ParamVector theta_hat;
  double loglik = 0.0;
  Vector score{};       ///< U(θ̂) of the full model
  Matrix fisher{};      ///< K(θ̂), q×q
  Matrix cov{};         ///< K(θ̂)⁻¹ (pseudo-inverse when singular_fisher)
  FittedSurfaces surfaces{};
  bool converged = false;
  bool singular_fisher = false;
  int iterations = 0;
  StartRecord start_used{};
  Restriction restriction{};       ///< parameters held fixed during the fit
  std::vector<double> trace{};     ///< log-likelihood at accepted iterates

  [[nodiscard]] Index num_params() const { return spec.num_params(); }
  [[nodiscard]] Index n() const { return spec.n(); }
  [[nodiscard]] Vector std_errors() const { return cov.diagonal().cwiseMax(0.0).cwiseSqrt(); }
};

/// Thrown when no start reaches the gradient criterion.
class FitConvergenceError : public ConvergenceError {
 public:
  FitConvergenceError(const std::string& what, std::vector<double> best_trace, double best_loglik,
                      Vector best_theta = {})
      : ConvergenceError(what),
        best_trace_(std::move(best_trace)),
        best_loglik_(best_loglik),
        best_theta_(std::move(best_theta)) {}
  [[nodiscard]] const std::vector<double>& best_trace() const { return best_trace_; }
  [[nodiscard]] double best_loglik() const { return best_loglik_; }
  /// Flat θ where the best attempt stopped; empty when no attempt started.
  [[nodiscard]] const Vector& best_theta() const { return best_theta_; }

 private:
  std::vector<double> best_trace_;
  double best_loglik_;
  Vector best_theta_;
};

/// Least-squares β on the link scale, intercept-only γ from the sample
/// dispersion, λ from the options.
ParamVector initial_values(const ModelSpec& spec, const ResponseVector& y, const FitOptions& options);

/// Joint maximum-likelihood fit of θ = (β, γ, λ₁, λ₂).
FittedModel fit(const ModelSpec& spec, const ResponseVector& y, const FitOptions& options = {},
                const Restriction& restriction = {});

/// Score, information, covariance and surfaces at a given θ, e.g. one read
/// back from a model archive. Throws DomainError when θ is inadmissible.
FittedModel evaluate_model(const ModelSpec& spec, const ResponseVector& y, const ParamVector& theta,
                           bool converged = true);

struct ProfileCell {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double loglik = 0.0;
  bool converged = false;
};

/// Fits with both λ fixed at every grid pair; sorted by log-likelihood,
/// non-converged cells last.
std::vector<ProfileCell> profile_lambda(const ModelSpec& spec, const ResponseVector& y,
                                        const FitOptions& options,
                                        const std::vector<double>& lambda1_grid,
                                        const std::vector<double>& lambda2_grid);

/// Symmetric inverse of a PSD matrix; falls back to an eigenvalue
/// pseudo-inverse and sets `singular` when K is not safely invertible.
Matrix invert_information(const Matrix& k, bool& singular);

}  // namespace betalink
