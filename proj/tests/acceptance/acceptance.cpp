// Acceptance report: one PASS/FAIL line per criterion. Criteria that share a
// Monte Carlo study (4, 7, 8) reuse its fits when run together.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "betalink/diagnostics.hpp"
#include "betalink/error.hpp"
#include "betalink/estimator.hpp"
#include "betalink/inference.hpp"
#include "betalink/model.hpp"
#include "betalink/simulate.hpp"
#include "test_support.hpp"

using namespace betalink;
using namespace betalink::testing;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

const LinkFamily kAsym{LinkKind::AoAsymmetric};
const LinkFamily kSym{LinkKind::AoSymmetric};

McScenario scenario2(Index n, int replications) {
  return McScenario::build("scenario2", kAsym, kAsym, Vector{{1.0, 3.0, -4.0}}, Vector{{-1.0, -8.0, 1.0}}, 1.0, 1.0,
                           n, replications, 20260501);
}

// Moderate dispersion: no single parameter dominates the fit.
McScenario moderate(Index n, int replications, std::uint64_t seed) {
  return McScenario::build("moderate", kAsym, kAsym, Vector{{1.0, 3.0, -4.0}}, Vector{{-1.5, 0.5, -0.5}}, 1.0, 1.0,
                           n, replications, seed);
}

/// Fits every replication; `each` sees the converged fits.
struct Study {
  McSummary summary;
  int failed = 0;
};

Study run_study(const McScenario& sc, const std::function<void(int, const ResponseVector&, const FittedModel&)>& each = {}) {
  const ModelSpec spec = sc.spec();
  std::vector<Vector> rows;
  Study out;
  for (int i = 0; i < sc.replications; ++i) {
    const ResponseVector y = simulate_dataset(sc, i);
    try {
      const FittedModel f = fit(spec, y);
      rows.push_back(f.theta_hat.pack(spec));
      if (each) each(i, y, f);
    } catch (const ConvergenceError&) {
      ++out.failed;
    } catch (const DomainError&) {
      ++out.failed;
    }
  }
  Matrix est(static_cast<Index>(rows.size()), spec.num_params());
  for (Index i = 0; i < est.rows(); ++i) est.row(i) = rows[i].transpose();
  out.summary = summarize_estimates(sc.parameter_names(), sc.truth().pack(spec), est);
  out.summary.replications = sc.replications;
  out.summary.nonconverged = out.failed;
  return out;
}

const std::vector<std::pair<LinkFamily, LinkFamily>> kFamilies = {
    {kAsym, kAsym}, {kSym, kSym}, {kAsym, kSym}, {kSym, kAsym}};

Outcome criterion1() {
  Rng rng(101);
  double worst = 0.0;
  for (int i = 0; i < 50; ++i) {
    const auto [m, d] = kFamilies[i % 4];
    const Instance inst = random_instance(rng, i % 2 == 0 ? 5 : 20, m, d);
    const Vector flat = inst.theta.pack(inst.spec);
    const Vector analytic = score(inst.spec, inst.theta, inst.y);
    const Vector numeric = fd_gradient(
        [&](const Vector& v) { return log_likelihood(inst.spec, ParamVector::unpack(inst.spec, v), inst.y); }, flat);
    worst = std::max(worst, max_relative_error(analytic, numeric));
  }
  return {worst <= 1e-5, fmt("50 instances, max relative error %.2e (limit 1e-5)", worst)};
}

Outcome criterion2() {
  const int draws = 200000;
  Rng rng(202);
  const std::vector<std::pair<LinkFamily, LinkFamily>> fams = {
      {kAsym, kAsym}, {kSym, kSym}, {kAsym, kSym}, {kSym, kAsym}, {kAsym, kAsym}};
  double worst_outer = 0.0, worst_hess = 0.0;
  int beyond = 0, compared = 0;
  for (int i = 0; i < 5; ++i) {
    const Instance inst = random_instance(rng, 6 + i, fams[i].first, fams[i].second, 2, 2);
    const ModelSpec& spec = inst.spec;
    const Index q = spec.num_params();
    const Matrix k = fisher_information(spec, inst.theta);
    const Vector flat = inst.theta.pack(spec);
    Matrix s1 = Matrix::Zero(q, q), s2 = Matrix::Zero(q, q);
    Matrix h1 = Matrix::Zero(q, q), h2 = Matrix::Zero(q, q);
    Rng draw_rng = Rng::stream(303, i);
    for (int b = 0; b < draws; ++b) {
      const ResponseVector y = simulate_response(spec, inst.theta, draw_rng);
      const Vector u = score(spec, inst.theta, y);
      const Matrix outer = u * u.transpose();
      s1 += outer;
      s2 += outer.cwiseProduct(outer);
      Matrix h(q, q);
      for (Index j = 0; j < q; ++j) {
        const double step = 1e-5 * std::max(1.0, std::fabs(flat[j]));
        Vector a = flat, c = flat;
        a[j] += step;
        c[j] -= step;
        h.col(j) = (score(spec, ParamVector::unpack(spec, a), y) - score(spec, ParamVector::unpack(spec, c), y)) /
                   (2.0 * step);
      }
      const Matrix neg = -0.5 * (h + h.transpose());
      h1 += neg;
      h2 += neg.cwiseProduct(neg);
    }
    auto deviation = [&](const Matrix& sum, const Matrix& sumsq) {
      double w = 0.0;
      for (Index a = 0; a < q; ++a) {
        for (Index c = 0; c <= a; ++c) {
          const double mean = sum(a, c) / draws;
          const double var = std::max(sumsq(a, c) / draws - mean * mean, 0.0) * draws / (draws - 1.0);
          const double se = std::sqrt(var / draws);
          const double z = std::fabs(mean - k(a, c)) / std::max(se, 1e-300);
          beyond += z > 3.0;
          ++compared;
          w = std::max(w, z);
        }
      }
      return w;
    };
    worst_outer = std::max(worst_outer, deviation(s1, s2));
    worst_hess = std::max(worst_hess, deviation(h1, h2));
  }
  return {worst_outer <= 3.0 && worst_hess <= 3.0,
          fmt("5 instances x %d draws, max |K - mean(UU')| = %.2f SE, max |K + mean(H)| = %.2f SE (limit 3); "
              "%d of %d distinct entries beyond 3 SE",
              draws, worst_outer, worst_hess, beyond, compared)};
}

Outcome criterion3() {
  double worst_theta = 0.0, worst_ll = 0.0;
  for (int i = 0; i < 3; ++i) {
    const McScenario sc = moderate(200, 1, 404 + i);
    const ModelSpec spec = sc.spec().with_lambdas(LambdaMode::fixed(1.0), LambdaMode::fixed(1.0));
    const ResponseVector y = simulate_dataset(sc, 0);
    const FittedModel f = fit(spec, y);
    const LogitFit ref = logit_fit(sc.x, sc.z, y.values());
    worst_theta = std::max({worst_theta, (f.theta_hat.beta - ref.beta).lpNorm<Eigen::Infinity>(),
                            (f.theta_hat.gamma - ref.gamma).lpNorm<Eigen::Infinity>()});
    worst_ll = std::max(worst_ll, std::fabs(f.loglik - ref.loglik));
  }
  return {worst_theta <= 1e-6 && worst_ll <= 1e-6,
          fmt("3 datasets, max |dtheta| %.2e, max |dloglik| %.2e (limit 1e-6)", worst_theta, worst_ll)};
}

struct Scenario2Large {
  Study study;
  int covered[3] = {0, 0, 0};
  int fits = 0;
  int z_reject = 0;
  int link_reject = 0, link_done = 0, link_failed = 0;
  int reset_reject = 0, reset_done = 0, reset_failed = 0;
};

const Scenario2Large& scenario2_large() {
  static std::optional<Scenario2Large> cache;
  if (cache) return *cache;
  cache.emplace();
  Scenario2Large& s = *cache;
  const McScenario sc = scenario2(500, 1000);
  const ModelSpec spec = sc.spec();
  const ParamVector truth = sc.truth();
  s.study = run_study(sc, [&](int i, const ResponseVector& y, const FittedModel& f) {
    ++s.fits;
    const auto ci = wald_ci_params(f);
    for (int j = 0; j < 3; ++j) s.covered[j] += ci[j].lower <= truth.beta[j] && truth.beta[j] <= ci[j].upper;
    s.z_reject += z_test(f, spec.r() + 1, truth.gamma[1]).p_value < 0.05;
    try {
      s.link_reject += link_adequacy_test(spec, y, f, {1.0, 1.0}).p_value < 0.05;
      ++s.link_done;
    } catch (const Error&) {
      ++s.link_failed;
    }
    if (i < 500) {
      try {
        s.reset_reject += reset_test(spec, y, f).p_value < 0.05;
        ++s.reset_done;
      } catch (const Error&) {
        ++s.reset_failed;
      }
    }
  });
  return s;
}

Outcome criterion4() {
  const Scenario2Large& s = scenario2_large();
  const McSummary& m = s.study.summary;
  const double b0 = m.mean[0], g1 = m.mean[4], l2 = m.mean[7];
  const bool pass = std::fabs(b0 - 1.0) <= 0.01 && std::fabs(g1 + 8.059) <= 0.15 && l2 >= 1.0 && l2 <= 1.6;
  return {pass, fmt("n=500, %d/%d converged: mean beta0 %.4f, mean gamma1 %.4f (ref -8.059), mean lambda2 %.4f "
                    "(ref 1.270)",
                    m.converged, m.replications, b0, g1, l2)};
}

Outcome criterion5() {
  const Study st = run_study(scenario2(100, 1000));
  const double l2 = st.summary.mean[7];
  return {l2 > 1.5, fmt("n=100, %d/%d converged: mean lambda2 %.4f (ref 2.449, limit > 1.5)", st.summary.converged,
                        st.summary.replications, l2)};
}

Outcome criterion6() {
  const McScenario sc = McScenario::build("scenario1", kSym, kSym, Vector{{1.5, -1.0, -1.5}},
                                          Vector{{-1.7, 1.0, -2.0}}, 0.5, 0.5, 100, 500, 20260601);
  const ModelSpec spec = sc.spec();
  // Where the non-converged fits stopped, for the report only.
  Vector stopped_sum = Vector::Zero(spec.num_params());
  int stopped = 0, collapsed = 0;
  for (int i = 0; i < sc.replications; ++i) {
    try {
      (void)fit(spec, simulate_dataset(sc, i));
    } catch (const FitConvergenceError& e) {
      if (e.best_theta().size() == 0) continue;
      stopped_sum += e.best_theta();
      ++stopped;
      collapsed += surfaces(spec, ParamVector::unpack(spec, e.best_theta())).sigma.minCoeff() <= 1e-5;
    }
  }
  const Study st = run_study(sc);
  const McSummary& m = st.summary;
  const double all_g2 = (m.mean[5] * m.converged + stopped_sum[5]) / (m.converged + stopped) - sc.gamma[2];
  const double worst_beta = m.bias.head(3).cwiseAbs().maxCoeff();
  const double g2 = m.bias[5];
  return {worst_beta <= 0.02 && g2 > 0.3,
          fmt("n=100, non-convergence %d/%d (%.1f%%): max |bias beta| %.4f (limit 0.02), bias gamma2 %.4f "
              "(ref 0.874, limit > 0.3); bias gamma1 %.4f, lambda1 %.4f, lambda2 %.4f; %d of the non-converged "
              "fits end with some sigma_t at the admissible floor, and counting their end points as estimates "
              "would give bias gamma2 %.4f",
              st.failed, sc.replications, 100.0 * st.failed / sc.replications, worst_beta, g2, m.bias[4], m.bias[6],
              m.bias[7], collapsed, all_g2)};
}

// RESET with λ known instead of estimated; reported for comparison only.
double reset_size_known_lambda() {
  const McScenario sc = scenario2(500, 500);
  const ModelSpec spec = sc.spec().with_lambdas(LambdaMode::fixed(1.0), LambdaMode::fixed(1.0));
  int reject = 0, done = 0;
  for (int i = 0; i < sc.replications; ++i) {
    const ResponseVector y = simulate_dataset(sc, i);
    try {
      reject += reset_test(spec, y, fit(spec, y)).p_value < 0.05;
      ++done;
    } catch (const Error&) {
    }
  }
  return static_cast<double>(reject) / done;
}

Outcome criterion7() {
  const Scenario2Large& s = scenario2_large();
  const double z = static_cast<double>(s.z_reject) / s.fits;
  const double link = static_cast<double>(s.link_reject) / s.link_done;
  const double reset = static_cast<double>(s.reset_reject) / s.reset_done;
  auto ok = [](double v) { return v >= 0.03 && v <= 0.08; };
  return {ok(z) && ok(link) && ok(reset) && s.link_done >= 500 && s.reset_done >= 500,
          fmt("size at 5%%: z %.3f (%d reps), RESET LR %.3f (%d reps, %d failed refits), link adequacy LR %.3f "
              "(%d reps, %d failed refits); band [0.03, 0.08]; for reference, RESET size with lambda known %.3f",
              z, s.fits, reset, s.reset_done, s.reset_failed, link, s.link_done, s.link_failed,
              reset_size_known_lambda())};
}

Outcome criterion8() {
  const Scenario2Large& s = scenario2_large();
  bool pass = s.fits >= 1000;
  std::string detail = fmt("n=500, %d fits, coverage", s.fits);
  for (int j = 0; j < 3; ++j) {
    const double c = static_cast<double>(s.covered[j]) / s.fits;
    pass = pass && c >= 0.92 && c <= 0.97;
    detail += fmt(" beta%d %.3f", j, c);
  }
  return {pass, detail + " (band [0.92, 0.97])"};
}

Outcome criterion9() {
  const McScenario sc = moderate(100, 200, 909);
  const ModelSpec spec = sc.spec();
  const ParamVector truth = sc.truth();
  int hits = 0, random_hits = 0, random_reps = 0;
  double worst_trace = 0.0;
  Rng pick(910);
  const ObservationTerms at_truth = observed_quantities(spec, truth, nullptr);
  for (int i = 0; i < 200; ++i) {
    Vector y = simulate_dataset(sc, i).values();
    Vector y_random = y;
    const Index t = displace_high_leverage(spec, truth, y, 5.0);
    try {
      const FittedModel f = fit(spec, ResponseVector(y));
      const Vector h = hat_matrix_diag(f);
      worst_trace = std::max(worst_trace, std::fabs(h.sum() - static_cast<double>(spec.r())));
      Index top = 0;
      cook_distance(f, ResponseVector(y)).maxCoeff(&top);
      hits += top == t;
    } catch (const Error&) {
    }
    // informational: an outlier at a random row
    const Index u = static_cast<Index>(pick.uniform() * static_cast<double>(spec.n()));
    const double mu = at_truth.surfaces.mu[u];
    const double shift = 5.0 * std::sqrt(ystar_variance(mu, at_truth.surfaces.sigma[u]));
    y_random[u] = logistic(at_truth.mustar[u] + (mu < 0.5 ? shift : -shift));
    try {
      const FittedModel f = fit(spec, ResponseVector(y_random));
      Index top = 0;
      cook_distance(f, ResponseVector(y_random)).maxCoeff(&top);
      random_hits += top == u;
      ++random_reps;
    } catch (const Error&) {
    }
  }

  const McScenario env_sc = moderate(50, 100, 911);
  const ModelSpec env_spec = env_sc.spec();
  int within = 0, env_runs = 0;
  for (int i = 0; i < 100; ++i) {
    const ResponseVector y = simulate_dataset(env_sc, i);
    try {
      const FittedModel f = fit(env_spec, y);
      EnvelopeOptions o;
      o.k = 100;
      o.seed = 1000 + static_cast<std::uint64_t>(i);
      o.threads = 1;
      within += simulated_envelope(env_spec, y, f, o).outside_fraction <= 0.10;
      ++env_runs;
    } catch (const Error&) {
    }
  }
  const bool pass = within >= 90 && worst_trace <= 1e-8 && hits >= 190;
  return {pass, fmt("envelope outside_fraction <= 0.10 in %d/100 runs (%d fitted, k=100, n=50); max |sum h - r| "
                    "%.1e; Cook maximum at the displaced high-leverage row in %d/200 (limit 190); for reference, "
                    "at a random row %d/%d",
                    within, env_runs, worst_trace, hits, random_hits, random_reps)};
}

Outcome criterion10() {
  const double value = gaic(293.135, 13, 2.0);
  return {std::fabs(value - (-560.27)) <= 0.005, fmt("-2*293.135 + 2*13 = %.3f (ref -560.27)", value)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance report"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',')->check(CLI::Range(1, 10));
  CLI11_PARSE(app, argc, argv);
  const std::map<int, std::pair<const char*, Outcome (*)()>> criteria = {
      {1, {"score vs finite differences", criterion1}},
      {2, {"information vs Monte Carlo", criterion2}},
      {3, {"logit special case", criterion3}},
      {4, {"asymmetric scenario 2, n=500", criterion4}},
      {5, {"asymmetric scenario 2, n=100", criterion5}},
      {6, {"symmetric scenario 1, n=100", criterion6}},
      {7, {"test sizes", criterion7}},
      {8, {"Wald interval coverage", criterion8}},
      {9, {"diagnostics self-consistency", criterion9}},
      {10, {"information-criterion arithmetic", criterion10}},
  };
  const std::set<int> selected(only.begin(), only.end());
  bool all = true;
  for (const auto& [id, entry] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = entry.second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("criterion %d %s: %s -- %s [%.1f s]\n", id, o.pass ? "PASS" : "FAIL", entry.first, o.detail.c_str(),
                secs);
    std::fflush(stdout);
    all = all && o.pass;
  }
  return all ? 0 : 1;
}
