#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <optional>

#include "betalink/error.hpp"
#include "betalink/estimator.hpp"
#include "betalink/simulate.hpp"
#include "test_support.hpp"

using namespace betalink;
using namespace betalink::testing;

namespace {

const LinkFamily kAsym(LinkKind::AoAsymmetric);
const LinkFamily kSym(LinkKind::AoSymmetric);
const LinkFamily kLogit(LinkKind::Logit);

McScenario scenario2(Index n, std::uint64_t seed) {
  return McScenario::build("s2", kAsym, kAsym, Vector{{1.0, 3.0, -4.0}}, Vector{{-1.0, -8.0, 1.0}}, 1.0, 1.0, n, 1,
                           seed);
}

Instance logit_instance(std::uint64_t seed, Index n) {
  Rng rng(seed);
  return random_instance(rng, n, kLogit, kLogit, 3, 2, false, false);
}

}  // namespace

TEST_CASE("initial values for constant-only designs") {
  const ModelSpec spec(Matrix::Ones(4, 1), Matrix::Ones(4, 1), kLogit, kAsym, LambdaMode::estimated(),
                       LambdaMode::fixed(1.0));
  // mean 0.5 and sample dispersion √(Var/(ȳ(1−ȳ))) = 0.5
  const double d = std::sqrt(0.0625 * 3.0 / 4.0);
  const ResponseVector y(Vector{{0.5 - d, 0.5 + d, 0.5 - d, 0.5 + d}});
  const ParamVector th = initial_values(spec, y, {});
  CHECK(std::fabs(th.beta[0]) <= 1e-14);
  CHECK(std::fabs(th.gamma[0]) <= 1e-12);
}

TEST_CASE("initial λ follows the start policy") {
  Rng rng(3);
  const Instance in = random_instance(rng, 30, kAsym, kSym);
  FitOptions opts;
  ParamVector th = initial_values(in.spec, in.y, opts);
  CHECK(th.lambda1 == 1.0);
  CHECK(th.lambda2 == 0.5);
  opts.lambda1_start = LambdaStart::explicit_value(2.5);
  th = initial_values(in.spec, in.y, opts);
  CHECK(th.lambda1 == 2.5);
  CHECK(std::isfinite(log_likelihood(in.spec, th, in.y)));
}

TEST_CASE("rank-deficient designs are rejected") {
  Matrix x(5, 2);
  x.col(0).setOnes();
  x.col(1).setOnes();
  CHECK_THROWS_AS(ModelSpec(x, Matrix::Ones(5, 1), kLogit, kLogit), InputError);
}

TEST_CASE("constant-only fit converges to the population values at n = 10000") {
  const ModelSpec spec(Matrix::Ones(10000, 1), Matrix::Ones(10000, 1), kLogit, kLogit);
  Rng rng(2024);
  Vector yv(10000);
  for (Index t = 0; t < yv.size(); ++t) yv[t] = sample_beta(0.5, std::sqrt(1.0 / 3.0), rng);
  const FittedModel f = fit(spec, ResponseVector(yv));
  REQUIRE(f.converged);
  CHECK(std::fabs(f.surfaces.mu[0] - 0.5) <= 0.01);
  CHECK(std::fabs(f.surfaces.sigma[0] - std::sqrt(1.0 / 3.0)) <= 0.01);
}

TEST_CASE("λ fixed at 1 reproduces an independent logit fit") {
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    const Instance in = logit_instance(seed, 150);
    const ModelSpec asym(in.spec.x(), in.spec.z(), kAsym, kAsym, LambdaMode::fixed(1.0), LambdaMode::fixed(1.0));
    const FittedModel f = fit(asym, in.y);
    const LogitFit ref = logit_fit(in.spec.x(), in.spec.z(), in.y.values());
    REQUIRE(f.converged);
    CAPTURE(seed);
    CHECK((f.theta_hat.beta - ref.beta).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK((f.theta_hat.gamma - ref.gamma).cwiseAbs().maxCoeff() <= 1e-6);
    CHECK(std::fabs(f.loglik - ref.loglik) <= 1e-6);
  }
}

TEST_CASE("converged fits satisfy the stop rule and the curvature condition") {
  Rng rng(404);
  for (int i = 0; i < 6; ++i) {
    const LinkFamily fam = i % 2 == 0 ? kAsym : kSym;
    const Instance in = random_instance(rng, 200, fam, fam);
    std::optional<FittedModel> fitted;
    try {
      fitted = fit(in.spec, in.y);
    } catch (const ConvergenceError&) {
      continue;  // symmetric instances may legitimately fail
    }
    const FittedModel& f = *fitted;
    CAPTURE(i);
    CHECK(f.converged);
    // optimizer scale: λ·U_λ for an asymmetric λ, which stays small when λ̂ drifts to a boundary
    Vector g = f.score;
    if (in.spec.lambda1_free() && fam.kind() == LinkKind::AoAsymmetric) g[in.spec.lambda1_index()] *= f.theta_hat.lambda1;
    if (in.spec.lambda2_free() && fam.kind() == LinkKind::AoAsymmetric) g[in.spec.lambda2_index()] *= f.theta_hat.lambda2;
    CHECK(g.cwiseAbs().maxCoeff() <= 1e-6 * static_cast<double>(in.spec.n()));
    Eigen::SelfAdjointEigenSolver<Matrix> eig(f.fisher);
    CHECK(eig.eigenvalues().minCoeff() > -1e-8 * f.fisher.norm());
    CHECK(f.cov == f.cov.transpose());
    CHECK((f.score - score(in.spec, f.theta_hat, in.y)).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("well-identified fits drive every score entry below 1e-5") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const McScenario sc = scenario2(500, seed);
    const FittedModel f = fit(sc.spec(), simulate_dataset(sc, 0));
    REQUIRE(f.converged);
    CAPTURE(seed);
    CHECK(f.score.cwiseAbs().maxCoeff() <= 1e-5);
  }
  const Instance in = logit_instance(21, 300);
  const FittedModel f = fit(in.spec, in.y);
  CHECK(f.score.cwiseAbs().maxCoeff() <= 1e-5);
}

TEST_CASE("accepted iterates never lose likelihood beyond rounding") {
  const McScenario sc = scenario2(200, 9);
  const FittedModel f = fit(sc.spec(), simulate_dataset(sc, 0));
  REQUIRE(f.trace.size() > 2);
  for (std::size_t i = 1; i < f.trace.size(); ++i) {
    // the line search accepts steps inside a 1e-10 relative noise band near the optimum
    CHECK(f.trace[i] >= f.trace[i - 1] - 1e-10 * (1.0 + std::fabs(f.trace[i - 1])));
  }
  CHECK(f.trace.back() == doctest::Approx(f.loglik).epsilon(1e-12));
}

TEST_CASE("fits are deterministic") {
  const McScenario sc = scenario2(120, 17);
  const ResponseVector y = simulate_dataset(sc, 3);
  const FittedModel a = fit(sc.spec(), y);
  const FittedModel b = fit(sc.spec(), y);
  CHECK(a.theta_hat.pack(a.spec) == b.theta_hat.pack(b.spec));
  CHECK(a.loglik == b.loglik);
  CHECK(a.cov == b.cov);
  CHECK(a.trace == b.trace);
}

TEST_CASE("scenario 2 at n = 500 is recovered within 3 standard errors") {
  const McScenario sc = scenario2(500, 2);
  const FittedModel f = fit(sc.spec(), simulate_dataset(sc, 0));
  REQUIRE(f.converged);
  const Vector truth = sc.truth().pack(sc.spec());
  const Vector est = f.theta_hat.pack(f.spec);
  const Vector se = f.std_errors();
  for (Index i = 0; i < truth.size(); ++i) {
    CAPTURE(i);
    CHECK(std::fabs(est[i] - truth[i]) <= 3.0 * se[i]);
  }
}

TEST_CASE("profile over a one-point grid equals the fixed-λ fit") {
  const McScenario sc = scenario2(150, 5);
  const ResponseVector y = simulate_dataset(sc, 1);
  const auto cells = profile_lambda(sc.spec(), y, {}, {1.3}, {0.8});
  REQUIRE(cells.size() == 1);
  const FittedModel f = fit(sc.spec().with_lambdas(LambdaMode::fixed(1.3), LambdaMode::fixed(0.8)), y);
  CHECK(cells[0].converged);
  CHECK(cells[0].loglik == f.loglik);
}

TEST_CASE("profile cells are sorted and the maximum sits near the truth") {
  const McScenario sc = scenario2(500, 6);
  const ResponseVector y = simulate_dataset(sc, 0);
  const auto cells = profile_lambda(sc.spec(), y, {}, {0.5, 1.0, 2.0}, {0.5, 1.0, 2.0});
  REQUIRE(cells.size() == 9);
  for (std::size_t i = 1; i < cells.size(); ++i) {
    if (cells[i].converged) CHECK(cells[i - 1].loglik >= cells[i].loglik);
  }
  CHECK(cells[0].lambda1 == 1.0);
}

TEST_CASE("restricted fits hold parameters at their values") {
  const McScenario sc = scenario2(150, 8);
  const ResponseVector y = simulate_dataset(sc, 0);
  Restriction r{{1, 4}, {3.0, -8.0}};
  const FittedModel f = fit(sc.spec(), y, {}, r);
  CHECK(f.theta_hat.beta[1] == 3.0);
  CHECK(f.theta_hat.gamma[1] == -8.0);
  const FittedModel full = fit(sc.spec(), y);
  CHECK(full.loglik >= f.loglik - 1e-8);
}

TEST_CASE("non-convergence and sample-size errors") {
  const McScenario sc = scenario2(150, 10);
  const ResponseVector y = simulate_dataset(sc, 0);
  FitOptions opts;
  opts.max_iterations = 1;
  opts.multistart = false;
  opts.polish_steps = 0;
  try {
    (void)fit(sc.spec(), y, opts);
    FAIL("expected a convergence error");
  } catch (const FitConvergenceError& e) {
    CHECK_FALSE(e.best_trace().empty());
    CHECK(std::isfinite(e.best_loglik()));
    REQUIRE(e.best_theta().size() == sc.spec().num_params());
    const ParamVector end = ParamVector::unpack(sc.spec(), e.best_theta());
    CHECK(log_likelihood(sc.spec(), end, y) == doctest::Approx(e.best_loglik()).epsilon(1e-12));
  }
  const ModelSpec tiny(Matrix::Ones(2, 1), Matrix::Ones(2, 1), kAsym, kAsym);
  CHECK_THROWS_AS(fit(tiny, ResponseVector(Vector{{0.2, 0.4}})), InputError);
}

TEST_CASE("a dispersion collapsing to the floor is reported") {
  // The symmetric dispersion link reaches σ = 0 at a finite predictor, so a
  // single σ_t can be driven to the floor while β follows its y_t.
  const McScenario sc = McScenario::build("s1", kSym, kSym, Vector{{1.5, -1.0, -1.5}}, Vector{{-1.7, 1.0, -2.0}},
                                          0.5, 0.5, 100, 1, 20260601);
  const ResponseVector y = simulate_dataset(sc, 0);
  try {
    (void)fit(sc.spec(), y);
    FAIL("expected a convergence error");
  } catch (const FitConvergenceError& e) {
    CHECK(std::string(e.what()).find("dispersion collapsed") != std::string::npos);
    const FittedSurfaces sf = surfaces(sc.spec(), ParamVector::unpack(sc.spec(), e.best_theta()));
    CHECK(sf.sigma.minCoeff() <= 1e-5);
    CHECK(e.best_loglik() > log_likelihood(sc.spec(), sc.truth(), y));
  }
}

TEST_CASE("evaluate_model reproduces the fitted quantities") {
  const McScenario sc = scenario2(150, 12);
  const ResponseVector y = simulate_dataset(sc, 0);
  const FittedModel f = fit(sc.spec(), y);
  const FittedModel g = evaluate_model(sc.spec(), y, f.theta_hat);
  CHECK(g.loglik == f.loglik);
  CHECK((g.fisher - f.fisher).cwiseAbs().maxCoeff() == 0.0);
  CHECK(g.converged);
}

TEST_CASE("invert_information falls back to a pseudo-inverse") {
  bool singular = false;
  Matrix k(2, 2);
  k << 4, 2, 2, 1;
  const Matrix inv = invert_information(k, singular);
  CHECK(singular);
  CHECK(((k * inv * k) - k).cwiseAbs().maxCoeff() <= 1e-10);
  Matrix good(2, 2);
  good << 2, 0.5, 0.5, 1;
  const Matrix ginv = invert_information(good, singular);
  CHECK_FALSE(singular);
  CHECK(((good * ginv) - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-14);
}
