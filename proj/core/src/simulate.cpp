#include "betalink/simulate.hpp"

#include <cmath>
#include <limits>
#include <mutex>

#include "parallel.hpp"

namespace betalink {
namespace {

// Covariate streams use indices far from replication indices.
constexpr std::uint64_t kCovariateStream = 0xC0FFEEULL << 32;

Matrix uniform_design(Index n, Index cols, Rng& rng) {
  Matrix m(n, cols);
  m.col(0).setOnes();
  for (Index j = 1; j < cols; ++j)
    for (Index t = 0; t < n; ++t) m(t, j) = rng.uniform();
  return m;
}

}  // namespace

double sample_beta(double mu, double sigma, Rng& rng) {
  const double pf = (1.0 - sigma) * (1.0 + sigma) / (sigma * sigma);
  return rng.beta(mu * pf, (1.0 - mu) * pf);
}

ResponseVector simulate_response(const ModelSpec& spec, const ParamVector& theta, Rng& rng) {
  const FittedSurfaces sf = surfaces(spec, theta);
  Vector y(spec.n());
  for (Index t = 0; t < spec.n(); ++t) y[t] = sample_beta(sf.mu[t], sf.sigma[t], rng);
  return ResponseVector(std::move(y));
}

McScenario McScenario::build(std::string name, LinkFamily mean_link, LinkFamily disp_link, Vector beta,
                             Vector gamma, double lambda1, double lambda2, Index n, int replications,
                             std::uint64_t seed) {
  if (beta.size() < 1 || gamma.size() < 1) throw InputError("scenario needs at least an intercept in each submodel");
  if (replications < 1) throw InputError("scenario needs at least one replication");
  if (!mean_link.admissible_shape(lambda1) || !disp_link.admissible_shape(lambda2))
    throw InputError("scenario lambda values are inadmissible for the chosen links");
  McScenario sc;
  sc.name = std::move(name);
  sc.mean_link = mean_link;
  sc.disp_link = disp_link;
  sc.lambda1 = lambda1;
  sc.lambda2 = lambda2;
  sc.n = n;
  sc.replications = replications;
  sc.seed = seed;
  Rng rng = Rng::stream(seed, kCovariateStream);
  sc.x = uniform_design(n, beta.size(), rng);
  sc.z = uniform_design(n, gamma.size(), rng);
  sc.beta = std::move(beta);
  sc.gamma = std::move(gamma);
  const auto sf = try_surfaces(sc.spec(), sc.truth());
  if (!sf) throw InputError("scenario '" + sc.name + "': true parameters leave a link domain for a generated row");
  for (Index t = 0; t < n; ++t) {
    if (!(sf->mu[t] > 0.0 && sf->mu[t] < 1.0 && sf->sigma[t] > 0.0 && sf->sigma[t] < 1.0))
      throw InputError("scenario '" + sc.name + "': generated row " + std::to_string(t + 1) +
                       " has a boundary mean or dispersion");
  }
  return sc;
}

ModelSpec McScenario::spec() const {
  return ModelSpec(x, z, mean_link, disp_link,
                   estimate_lambda1 ? LambdaMode::estimated() : LambdaMode::fixed(lambda1),
                   estimate_lambda2 ? LambdaMode::estimated() : LambdaMode::fixed(lambda2));
}

ParamVector McScenario::truth() const { return ParamVector{beta, gamma, lambda1, lambda2}; }

std::vector<std::string> McScenario::parameter_names() const {
  std::vector<std::string> names;
  for (Index j = 0; j < beta.size(); ++j) names.push_back("beta" + std::to_string(j));
  for (Index j = 0; j < gamma.size(); ++j) names.push_back("gamma" + std::to_string(j));
  if (mean_link.has_shape_parameter() && estimate_lambda1) names.emplace_back("lambda1");
  if (disp_link.has_shape_parameter() && estimate_lambda2) names.emplace_back("lambda2");
  return names;
}

ResponseVector simulate_dataset(const McScenario& scenario, int index) {
  Rng rng = Rng::stream(scenario.seed, static_cast<std::uint64_t>(index));
  return simulate_response(scenario.spec(), scenario.truth(), rng);
}

McSummary summarize_estimates(std::vector<std::string> names, const Vector& truth, const Matrix& estimates) {
  McSummary s;
  s.names = std::move(names);
  s.truth = truth;
  s.estimates = estimates;
  const Index reps = estimates.rows();
  const Index q = truth.size();
  s.converged = static_cast<int>(reps);
  s.sd_defined = reps >= 2;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  s.mean = Vector::Constant(q, nan);
  s.bias = s.relative_bias = s.sd = s.mse = s.mean;
  if (reps == 0) return s;
  for (Index j = 0; j < q; ++j) {
    const auto col = estimates.col(j);
    const double mean = col.mean();
    s.mean[j] = mean;
    s.bias[j] = mean - truth[j];
    s.relative_bias[j] = truth[j] != 0.0 ? 100.0 * s.bias[j] / truth[j] : nan;
    s.mse[j] = (col.array() - truth[j]).square().mean();
    if (s.sd_defined) s.sd[j] = std::sqrt((col.array() - mean).square().sum() / static_cast<double>(reps - 1));
  }
  return s;
}

McSummary run_mc_study(const McScenario& scenario, const FitOptions& options, int threads) {
  const ModelSpec spec = scenario.spec();
  const Vector truth = scenario.truth().pack(spec);
  const int reps = scenario.replications;
  Matrix all(reps, truth.size());
  std::vector<char> ok(reps, 0);
  detail::parallel_for(reps, threads, [&](int i) {
    const ResponseVector y = simulate_dataset(scenario, i);
    try {
      const FittedModel f = fit(spec, y, options);
      all.row(i) = f.theta_hat.pack(spec).transpose();
      ok[i] = 1;
    } catch (const ConvergenceError&) {
    } catch (const DomainError&) {
    }
  });
  int good = 0;
  for (char c : ok) good += c;
  Matrix kept(good, truth.size());
  for (int i = 0, k = 0; i < reps; ++i)
    if (ok[i]) kept.row(k++) = all.row(i);
  McSummary s = summarize_estimates(scenario.parameter_names(), truth, kept);
  s.replications = reps;
  s.nonconverged = reps - good;
  if (2 * s.nonconverged > reps) {
    throw ConvergenceError("scenario '" + scenario.name + "': " + std::to_string(s.nonconverged) + " of " +
                           std::to_string(reps) + " replications failed to converge");
  }
  return s;
}

}  // namespace betalink
