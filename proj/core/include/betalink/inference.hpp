#pragma once

#include <string_view>
#include <utility>
#include <vector>

#include "betalink/estimator.hpp"

namespace betalink {

enum class TestKind { LR, Wald, Score, Gradient, Z };

std::string_view test_kind_name(TestKind kind);
/// Accepts "lr", "wald", "score", "gradient" (case-insensitive).
TestKind test_kind_from_name(std::string_view name);

struct WaldInterval {
  double estimate = 0.0;
  double std_error = 0.0;
  double lower = 0.0;
  double upper = 0.0;
  double level = 0.95;
};

struct TestResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  TestKind kind = TestKind::LR;
};

/// Intervals for every estimated parameter in the flat θ layout. An
/// asymmetric-link λ gets exp(log λ̂ ± z·SE/λ̂), the interval implied by the
/// log-scale parameterization; all others are θ̂ ± z·SE.
std::vector<WaldInterval> wald_ci_params(const FittedModel& fit, double level = 0.95);

struct SurfaceIntervals {
  Vector mu_lower, mu_upper;
  Vector sigma_lower, sigma_upper;
  /// 1 where an endpoint left the link's domain and was clipped to 0 or 1.
  Eigen::VectorXi mu_clipped, sigma_clipped;
};

/// Per-observation intervals for μ_t and σ_t obtained by mapping
/// η̂ ± z·SE(η̂) through the inverse links.
SurfaceIntervals wald_ci_surfaces(const FittedModel& fit, double level = 0.95);

/// Two-sided z test of θ_index = null_value.
TestResult z_test(const FittedModel& fit, Index index, double null_value);

/// LR, Wald, score or gradient test of the restriction against the full fit.
/// The restricted model is refitted with `options`.
TestResult joint_test(const ModelSpec& spec, const ResponseVector& y, const FittedModel& full,
                      const Restriction& restriction, TestKind kind, const FitOptions& options = {});

/// The same test when the restricted fit is already available.
TestResult joint_test_from_fits(const FittedModel& full, const FittedModel& restricted,
                                const Restriction& restriction, TestKind kind);

/// RESET-type test: η̂₁² joins X and Z, both λ are held at λ̂, and
/// H₀: (β_{r+1}, γ_{s+1}) = (0, 0) is tested with two degrees of freedom.
TestResult reset_test(const ModelSpec& spec, const ResponseVector& y, const FittedModel& fit,
                      TestKind kind = TestKind::LR, const FitOptions& options = {});

/// H₀: (λ₁, λ₂) = lambda_null. Both λ must be free in `fit`.
TestResult link_adequacy_test(const ModelSpec& spec, const ResponseVector& y, const FittedModel& fit,
                              std::pair<double, double> lambda_null, TestKind kind = TestKind::LR,
                              const FitOptions& options = {});

}  // namespace betalink
