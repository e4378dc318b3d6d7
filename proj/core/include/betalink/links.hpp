#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace betalink {

enum class LinkKind { AoAsymmetric, AoSymmetric, Logit, Cloglog, Probit };

/// A link g(·, λ): (0,1) → ℝ, possibly indexed by a shape parameter λ.
///
/// Aranda-Ordaz asymmetric: g = log(((1−μ)^{−λ} − 1)/λ), λ > 0. λ = 1 is the
/// logit, λ → 0 the complementary log-log.
/// Aranda-Ordaz symmetric: g = (2/λ)·tanh(λ·logit(μ)/2), λ ≠ 0, even in λ;
/// the logit limit is used for |λ| < kSymmetricLambdaMin.
/// Fixed kinds ignore λ entirely.
class LinkFamily {
 public:
  constexpr LinkFamily() = default;
  constexpr explicit LinkFamily(LinkKind kind) : kind_(kind) {}

  /// Accepts "ao-asymmetric", "ao-symmetric", "logit", "cloglog", "probit".
  static LinkFamily from_name(std::string_view name);

  [[nodiscard]] constexpr LinkKind kind() const { return kind_; }
  [[nodiscard]] constexpr bool has_shape_parameter() const {
    return kind_ == LinkKind::AoAsymmetric || kind_ == LinkKind::AoSymmetric;
  }
  [[nodiscard]] std::string_view name() const;

  /// Whether λ satisfies the family's constraint (always true for fixed kinds).
  [[nodiscard]] bool admissible_shape(double lambda) const;

  friend constexpr bool operator==(LinkFamily, LinkFamily) = default;

 private:
  LinkKind kind_ = LinkKind::Logit;
};

inline constexpr double kSymmetricLambdaMin = 1e-4;
inline constexpr double kProbabilityClip = 1e-12;

/// Inverse link and its first derivatives at a single linear predictor.
struct LinkPoint {
  double value;       ///< μ = g⁻¹(η, λ)
  double d_eta;       ///< ∂μ/∂η
  double d_lambda;    ///< ∂μ/∂λ (0 for fixed kinds)
};

/// η = g(μ, λ). Throws DomainError for μ ∉ (0,1) or an inadmissible λ.
double link_eval(LinkFamily family, double mu, double lambda);

/// μ = g⁻¹(η, λ). Throws LinkDomainError when η lies outside the link's range.
double link_inverse(LinkFamily family, double eta, double lambda);

/// ∂μ/∂η at μ = g⁻¹(η, λ).
double dmu_deta(LinkFamily family, double eta, double lambda);

/// ∂g/∂μ.
double dg_dmu(LinkFamily family, double mu, double lambda);

/// ∂μ/∂λ at fixed η (ρ for the mean submodel, ϱ for the dispersion one).
double dmu_dlambda(LinkFamily family, double eta, double lambda);

/// All three inverse-link quantities in one pass; std::nullopt when η is
/// outside the link's domain. λ must be admissible.
std::optional<LinkPoint> try_inverse(LinkFamily family, double eta, double lambda);

}  // namespace betalink
