#include "betalink/inference.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <string>

#include "betalink/specfun.hpp"

namespace betalink {
namespace {

double critical_value(double level) {
  if (!(level > 0.0 && level < 1.0)) throw InputError("confidence level must lie in (0, 1)");
  return specfun::std_normal_quantile(0.5 + 0.5 * level);
}

TestResult chi_squared_result(double statistic, int dof, TestKind kind) {
  TestResult r;
  r.statistic = statistic;
  r.dof = dof;
  r.kind = kind;
  r.p_value = dof == 0 ? 1.0 : specfun::chi_squared_sf(std::max(statistic, 0.0), dof);
  return r;
}

bool is_log_scale_lambda(const ModelSpec& spec, Index i) {
  return (spec.lambda1_free() && i == spec.lambda1_index() &&
          spec.mean_link().kind() == LinkKind::AoAsymmetric) ||
         (spec.lambda2_free() && i == spec.lambda2_index() &&
          spec.disp_link().kind() == LinkKind::AoAsymmetric);
}

// Maps η̂ ± z·se through g⁻¹; endpoints outside the link's domain are pushed
// to the range limit on the side of the overflow.
void surface_interval(LinkFamily family, double lambda, double eta, double half, double& lo, double& hi,
                      int& clipped) {
  clipped = 0;
  auto map = [&](double e) {
    if (const auto p = try_inverse(family, e, lambda)) return p->value;
    clipped = 1;
    return e > eta ? 1.0 : 0.0;
  };
  const double a = map(eta - half);
  const double b = map(eta + half);
  lo = std::min(a, b);
  hi = std::max(a, b);
}

Matrix sub_matrix(const Matrix& m, const std::vector<Index>& idx) {
  const Index k = static_cast<Index>(idx.size());
  Matrix out(k, k);
  for (Index a = 0; a < k; ++a)
    for (Index b = 0; b < k; ++b) out(a, b) = m(idx[a], idx[b]);
  return out;
}

Vector sub_vector(const Vector& v, const std::vector<Index>& idx) {
  Vector out(static_cast<Index>(idx.size()));
  for (Index a = 0; a < out.size(); ++a) out[a] = v[idx[a]];
  return out;
}

std::string describe(const Restriction& restriction) {
  std::string s = "{";
  for (std::size_t k = 0; k < restriction.indices.size(); ++k) {
    if (k) s += ", ";
    s += "theta[" + std::to_string(restriction.indices[k]) + "] = " + std::to_string(restriction.values[k]);
  }
  return s + "}";
}

}  // namespace

std::string_view test_kind_name(TestKind kind) {
  switch (kind) {
    case TestKind::LR: return "LR";
    case TestKind::Wald: return "Wald";
    case TestKind::Score: return "score";
    case TestKind::Gradient: return "gradient";
    case TestKind::Z: return "z";
  }
  return "unknown";
}

TestKind test_kind_from_name(std::string_view name) {
  std::string lower(name);
  std::transform(lower.begin(), lower.end(), lower.begin(), [](unsigned char c) { return std::tolower(c); });
  if (lower == "lr") return TestKind::LR;
  if (lower == "wald" || lower == "w") return TestKind::Wald;
  if (lower == "score" || lower == "s") return TestKind::Score;
  if (lower == "gradient" || lower == "g") return TestKind::Gradient;
  throw InputError("unknown test statistic '" + std::string(name) + "' (expected lr, wald, score or gradient)");
}

std::vector<WaldInterval> wald_ci_params(const FittedModel& fit, double level) {
  const double zc = critical_value(level);
  const Vector theta = fit.theta_hat.pack(fit.spec);
  const Index q = theta.size();
  std::vector<WaldInterval> out;
  out.reserve(q);
  for (Index i = 0; i < q; ++i) {
    const double var = fit.cov(i, i);
    const double scale = std::max(1.0, std::fabs(fit.cov.diagonal().maxCoeff()));
    if (!(var >= -1e-12 * scale)) throw InputError("covariance matrix has a negative diagonal entry");
    WaldInterval w;
    w.estimate = theta[i];
    w.std_error = std::sqrt(std::max(var, 0.0));
    w.level = level;
    if (is_log_scale_lambda(fit.spec, i)) {
      const double half = zc * w.std_error / theta[i];
      w.lower = theta[i] * std::exp(-half);
      w.upper = theta[i] * std::exp(half);
    } else {
      w.lower = theta[i] - zc * w.std_error;
      w.upper = theta[i] + zc * w.std_error;
    }
    out.push_back(w);
  }
  return out;
}

SurfaceIntervals wald_ci_surfaces(const FittedModel& fit, double level) {
  const double zc = critical_value(level);
  const ModelSpec& spec = fit.spec;
  const Index n = spec.n();
  const Index r = spec.r();
  const Index s = spec.s();
  const Matrix cov_beta = fit.cov.topLeftCorner(r, r);
  const Matrix cov_gamma = fit.cov.block(r, r, s, s);
  SurfaceIntervals out;
  out.mu_lower.resize(n);
  out.mu_upper.resize(n);
  out.sigma_lower.resize(n);
  out.sigma_upper.resize(n);
  out.mu_clipped.resize(n);
  out.sigma_clipped.resize(n);
  for (Index t = 0; t < n; ++t) {
    const double se1 = std::sqrt(std::max(0.0, spec.x().row(t).dot(cov_beta * spec.x().row(t).transpose())));
    const double se2 = std::sqrt(std::max(0.0, spec.z().row(t).dot(cov_gamma * spec.z().row(t).transpose())));
    surface_interval(spec.mean_link(), fit.theta_hat.lambda1, fit.surfaces.eta1[t], zc * se1, out.mu_lower[t],
                     out.mu_upper[t], out.mu_clipped[t]);
    surface_interval(spec.disp_link(), fit.theta_hat.lambda2, fit.surfaces.eta2[t], zc * se2,
                     out.sigma_lower[t], out.sigma_upper[t], out.sigma_clipped[t]);
  }
  return out;
}

TestResult z_test(const FittedModel& fit, Index index, double null_value) {
  if (index < 0 || index >= fit.num_params()) throw InputError("z_test: parameter index out of range");
  const double se = std::sqrt(std::max(0.0, fit.cov(index, index)));
  if (!(se > 0.0)) throw InputError("z_test: standard error is zero");
  const double estimate = fit.theta_hat.pack(fit.spec)[index];
  TestResult r;
  r.kind = TestKind::Z;
  r.dof = 1;
  r.statistic = (estimate - null_value) / se;
  r.p_value = std::min(1.0, 2.0 * specfun::std_normal_cdf(-std::fabs(r.statistic)));
  return r;
}

TestResult joint_test_from_fits(const FittedModel& full, const FittedModel& restricted,
                                const Restriction& restriction, TestKind kind) {
  const int dof = restriction.size();
  if (dof == 0) return chi_squared_result(0.0, 0, kind);
  const std::vector<Index>& idx = restriction.indices;
  const Vector null_values = Eigen::Map<const Vector>(restriction.values.data(), dof);
  switch (kind) {
    case TestKind::LR:
      return chi_squared_result(2.0 * (full.loglik - restricted.loglik), dof, kind);
    case TestKind::Wald: {
      const Vector d = sub_vector(full.theta_hat.pack(full.spec), idx) - null_values;
      const Matrix cov_ii = sub_matrix(full.cov, idx);
      const Eigen::LDLT<Matrix> ldlt(cov_ii);
      if (ldlt.info() != Eigen::Success) throw SingularMatrixError("Wald test: restricted covariance block is singular");
      return chi_squared_result(d.dot(ldlt.solve(d)), dof, kind);
    }
    case TestKind::Score: {
      const Vector u = sub_vector(restricted.score, idx);
      return chi_squared_result(u.dot(sub_matrix(restricted.cov, idx) * u), dof, kind);
    }
    case TestKind::Gradient: {
      const Vector u = sub_vector(restricted.score, idx);
      const Vector d = sub_vector(full.theta_hat.pack(full.spec), idx) - null_values;
      return chi_squared_result(u.dot(d), dof, kind);
    }
    case TestKind::Z: break;
  }
  throw InputError("joint_test: the z statistic is not a joint test");
}

TestResult joint_test(const ModelSpec& spec, const ResponseVector& y, const FittedModel& full,
                      const Restriction& restriction, TestKind kind, const FitOptions& options) {
  if (restriction.empty()) return chi_squared_result(0.0, 0, kind);
  if (kind == TestKind::Wald) return joint_test_from_fits(full, full, restriction, kind);
  FitOptions restricted_options = options;
  restricted_options.start.reset();
  try {
    const FittedModel restricted = fit(spec, y, restricted_options, restriction);
    return joint_test_from_fits(full, restricted, restriction, kind);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError("restricted fit under " + describe(restriction) + " did not converge: " + e.what());
  }
}

TestResult reset_test(const ModelSpec& spec, const ResponseVector& y, const FittedModel& fit_in,
                      TestKind kind, const FitOptions& options) {
  const Index n = spec.n();
  const Vector artificial = fit_in.surfaces.eta1.array().square();
  Matrix x(n, spec.r() + 1);
  x << spec.x(), artificial;
  Matrix z(n, spec.s() + 1);
  z << spec.z(), artificial;
  const ModelSpec augmented(x, z, spec.mean_link(), spec.disp_link(), LambdaMode::fixed(fit_in.theta_hat.lambda1),
                            LambdaMode::fixed(fit_in.theta_hat.lambda2));
  Restriction restriction;
  restriction.indices = {spec.r(), augmented.r() + spec.s()};
  restriction.values = {0.0, 0.0};

  // The restricted model is the original one with λ fixed at λ̂: start both
  // fits from the original estimates.
  ParamVector start;
  start.beta = Vector::Zero(augmented.r());
  start.beta.head(spec.r()) = fit_in.theta_hat.beta;
  start.gamma = Vector::Zero(augmented.s());
  start.gamma.head(spec.s()) = fit_in.theta_hat.gamma;
  start.lambda1 = fit_in.theta_hat.lambda1;
  start.lambda2 = fit_in.theta_hat.lambda2;
  FitOptions opts = options;
  opts.start = start;
  try {
    const FittedModel full = fit(augmented, y, opts);
    const FittedModel restricted = fit(augmented, y, opts, restriction);
    return joint_test_from_fits(full, restricted, restriction, kind);
  } catch (const ConvergenceError& e) {
    throw ConvergenceError(std::string("RESET augmented fit did not converge: ") + e.what());
  }
}

TestResult link_adequacy_test(const ModelSpec& spec, const ResponseVector& y, const FittedModel& fit_in,
                              std::pair<double, double> lambda_null, TestKind kind, const FitOptions& options) {
  if (!spec.lambda1_free() || !spec.lambda2_free())
    throw InputError("link adequacy test needs both link parameters to be estimated");
  if (!spec.mean_link().admissible_shape(lambda_null.first) || !spec.disp_link().admissible_shape(lambda_null.second))
    throw InputError("link adequacy test: null lambda values are inadmissible");
  Restriction restriction;
  restriction.indices = {spec.lambda1_index(), spec.lambda2_index()};
  restriction.values = {lambda_null.first, lambda_null.second};
  return joint_test(spec, y, fit_in, restriction, kind, options);
}

}  // namespace betalink
