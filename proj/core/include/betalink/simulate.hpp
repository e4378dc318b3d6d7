#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "betalink/estimator.hpp"
#include "betalink/random.hpp"

namespace betalink {

/// One Beta(μ·pf, (1 − μ)·pf) draw, pf = (1 − σ²)/σ².
double sample_beta(double mu, double sigma, Rng& rng);

/// Responses drawn from the model at θ.
ResponseVector simulate_response(const ModelSpec& spec, const ParamVector& theta, Rng& rng);

/// A Monte Carlo design: true parameters plus covariates drawn once.
struct McScenario {
  std::string name;
  LinkFamily mean_link{LinkKind::AoAsymmetric};
  LinkFamily disp_link{LinkKind::AoAsymmetric};
  Vector beta;
  Vector gamma;
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  bool estimate_lambda1 = true;
  bool estimate_lambda2 = true;
  Index n = 100;
  int replications = 1000;
  std::uint64_t seed = 1;
  Matrix x;  ///< n×r, intercept then uniform(0,1) columns
  Matrix z;  ///< n×s, same layout

  /// Draws the covariates from the seed and checks every μ_t, σ_t is
  /// interior; throws InputError otherwise.
  static McScenario build(std::string name, LinkFamily mean_link, LinkFamily disp_link, Vector beta,
                          Vector gamma, double lambda1, double lambda2, Index n, int replications,
                          std::uint64_t seed);

  [[nodiscard]] ModelSpec spec() const;
  [[nodiscard]] ParamVector truth() const;
  /// Column labels β0…, γ0…, λ1, λ2 of the estimated parameters.
  [[nodiscard]] std::vector<std::string> parameter_names() const;
};

/// Responses of replication `index`; a pure function of (scenario, index).
ResponseVector simulate_dataset(const McScenario& scenario, int index);

struct McSummary {
  std::vector<std::string> names;
  Vector truth, mean, bias, relative_bias, sd, mse;
  int replications = 0;
  int converged = 0;
  int nonconverged = 0;
  bool sd_defined = false;  ///< false when fewer than two fits converged
  Matrix estimates;         ///< converged θ̂ by row, in replication order
};

/// Aggregates estimates (one row per replication). SD uses the R − 1
/// divisor; MSE is the mean squared error about the truth.
McSummary summarize_estimates(std::vector<std::string> names, const Vector& truth, const Matrix& estimates);

/// Fits every replication; non-converged ones are counted and excluded.
/// Throws ConvergenceError when more than half fail. threads = 0 uses all
/// hardware threads; results do not depend on the thread count.
McSummary run_mc_study(const McScenario& scenario, const FitOptions& options, int threads = 0);

}  // namespace betalink
