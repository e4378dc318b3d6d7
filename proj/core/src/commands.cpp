#include "betalink/commands.hpp"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "betalink/diagnostics.hpp"
#include "betalink/inference.hpp"
#include "betalink/io.hpp"

namespace betalink {
namespace {

namespace fs = std::filesystem;

std::string prepare_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

std::string emit(CommandResult& result, const std::string& dir, const std::string& name, const CsvTable& table) {
  const std::string path = (fs::path(dir) / name).string();
  write_csv_file(path, table);
  result.files.push_back(path);
  return path;
}

CsvTable indexed(const std::vector<std::string>& header, const std::vector<const Vector*>& columns) {
  CsvTable t;
  t.header = {"index"};
  t.header.insert(t.header.end(), header.begin(), header.end());
  const Index n = columns.front()->size();
  t.values.resize(n, static_cast<Index>(t.header.size()));
  for (Index i = 0; i < n; ++i) t.values(i, 0) = static_cast<double>(i + 1);
  for (std::size_t c = 0; c < columns.size(); ++c) t.values.col(static_cast<Index>(c) + 1) = *columns[c];
  return t;
}

std::string fixed(double v, int digits = 3) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(digits);
  ss << v;
  return ss.str();
}

void add_test_row(CsvTable& t, std::vector<std::vector<double>>& rows, const std::string& label,
                  const TestResult& r) {
  t.row_labels.push_back(label);
  rows.push_back({r.statistic, static_cast<double>(r.dof), r.p_value});
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const InputError*>(&e)) return kExitInput;
  if (dynamic_cast<const ConvergenceError*>(&e)) return kExitConvergence;
  return kExitFailure;
}

CommandResult cmd_fit(const std::string& config_path, const std::string& data_path, const std::string& out_dir) {
  const ModelConfig config = load_model_config(config_path);
  const Dataset data = load_csv(data_path, config);
  const ModelSpec spec = build_spec(config, data);
  const ResponseVector y = response_of(data);
  const auto labels = parameter_labels(config, data);
  prepare_dir(out_dir);
  CommandResult result;

  FittedModel model = [&] {
    try {
      return fit(spec, y, config.fit);
    } catch (const FitConvergenceError& e) {
      CsvTable trace;
      trace.comments = {{"status", "not converged"}, {"reason", e.what()}};
      trace.header = {"iteration", "loglik"};
      trace.values.resize(static_cast<Index>(e.best_trace().size()), 2);
      for (std::size_t i = 0; i < e.best_trace().size(); ++i) {
        trace.values(static_cast<Index>(i), 0) = static_cast<double>(i);
        trace.values(static_cast<Index>(i), 1) = e.best_trace()[i];
      }
      const std::string path = emit(result, out_dir, "trace.csv", trace);
      throw ConvergenceError(std::string(e.what()) + "; optimizer trace written to " + path);
    }
  }();
  const FittedModel null = null_fit(y, config.fit);
  const DiagnosticsReport rep = diagnose(model, y, null);

  const Vector theta = model.theta_hat.pack(spec);
  const Vector se = model.std_errors();
  CsvTable params;
  params.label_header = "parameter";
  params.row_labels = labels;
  params.header = {"estimate", "std_error", "z", "p_value"};
  params.values.resize(theta.size(), 4);
  for (Index i = 0; i < theta.size(); ++i) {
    params.values(i, 0) = theta[i];
    params.values(i, 1) = se[i];
    // λ rows carry no z test: λ = 0 is not an admissible null.
    const bool is_lambda = (spec.lambda1_free() && i == spec.lambda1_index()) ||
                           (spec.lambda2_free() && i == spec.lambda2_index());
    if (se[i] > 0.0 && !is_lambda) {
      const TestResult z = z_test(model, i, 0.0);
      params.values(i, 2) = z.statistic;
      params.values(i, 3) = z.p_value;
    } else {
      params.values(i, 2) = params.values(i, 3) = std::nan("");
    }
  }
  emit(result, out_dir, "parameters.csv", params);

  CsvTable summary;
  summary.comments = {{"mean_link", std::string(spec.mean_link().name())},
                      {"dispersion_link", std::string(spec.disp_link().name())}};
  summary.header = {"n", "q", "loglik", "aic", "sic", "r2_g", "mse", "converged", "iterations", "singular_fisher"};
  summary.values.resize(1, 10);
  summary.values << static_cast<double>(spec.n()), static_cast<double>(spec.num_params()), model.loglik, rep.aic,
      rep.sic, rep.r2_g, rep.mse_fit, model.converged ? 1.0 : 0.0, static_cast<double>(model.iterations),
      model.singular_fisher ? 1.0 : 0.0;
  emit(result, out_dir, "summary.csv", summary);

  const Vector& s = model.surfaces.mu;
  emit(result, out_dir, "observations.csv",
       indexed({"y", "mu", "sigma", "eta1", "eta2", "r", "r_pp", "h", "cook"},
               {&y.values(), &s, &model.surfaces.sigma, &model.surfaces.eta1, &model.surfaces.eta2, &rep.r_ordinary,
                &rep.r_weighted2, &rep.hat_diag, &rep.cook}));

  const std::string model_path = (fs::path(out_dir) / "model.json").string();
  save_model(model_path, model, labels);
  result.files.push_back(model_path);

  std::ostringstream out;
  out << "parameter  estimate  std.error  z  p-value\n";
  for (Index i = 0; i < theta.size(); ++i) {
    out << labels[i] << "  " << fixed(theta[i]) << "  " << fixed(se[i]) << "  " << fixed(params.values(i, 2))
        << "  " << fixed(params.values(i, 3)) << "\n";
  }
  out << "loglik = " << fixed(model.loglik) << ", AIC = " << fixed(rep.aic) << ", SIC = " << fixed(rep.sic)
      << ", R2_G = " << fixed(rep.r2_g) << ", MSE = " << fixed(rep.mse_fit, 5) << "\n";
  out << "converged after " << model.iterations << " iterations";
  if (model.singular_fisher) out << " (information matrix singular; pseudo-inverse used)";
  out << "\n";
  result.report = out.str();
  return result;
}

CommandResult cmd_diagnose(const DiagnoseOptions& o) {
  const ModelConfig config = load_model_config(o.config_path);
  const Dataset data = load_csv(o.data_path, config);
  const ModelSpec spec = build_spec(config, data);
  const ResponseVector y = response_of(data);
  const FittedModel model = load_model(o.model_path, config, data);
  prepare_dir(o.out_dir);
  CommandResult result;

  const FittedModel null = null_fit(y, config.fit);
  const DiagnosticsReport rep = diagnose(model, y, null);
  emit(result, o.out_dir, "residuals.csv", indexed({"r_pp"}, {&rep.r_weighted2}));
  emit(result, o.out_dir, "fitted_observed.csv", indexed({"observed", "fitted"}, {&y.values(), &model.surfaces.mu}));
  CsvTable cook = indexed({"cook"}, {&rep.cook});
  cook.comments = {{"threshold", format_number(kCookThreshold)}};
  emit(result, o.out_dir, "cook.csv", cook);

  EnvelopeOptions env;
  env.k = o.envelope_k;
  env.alpha = o.alpha;
  env.seed = o.seed.value_or(config.seed);
  env.threads = o.threads;
  const EnvelopeBand band = simulated_envelope(spec, y, model, env, config.fit);
  CsvTable envelope;
  envelope.comments = {{"k", std::to_string(band.k)},
                       {"alpha", format_number(band.alpha)},
                       {"seed", std::to_string(env.seed)},
                       {"outside_fraction", format_number(band.outside_fraction)}};
  envelope.header = {"score", "lower", "mean", "upper", "observed"};
  envelope.values.resize(spec.n(), 5);
  envelope.values << band.scores, band.lower, band.mean, band.upper, band.observed;
  emit(result, o.out_dir, "envelope.csv", envelope);

  CsvTable tests;
  tests.label_header = "test";
  tests.header = {"statistic", "dof", "p_value"};
  std::vector<std::vector<double>> rows;
  const TestResult reset = reset_test(spec, y, model, TestKind::LR, config.fit);
  add_test_row(tests, rows, "reset_lr", reset);
  std::string adequacy = "skipped: needs both links Aranda-Ordaz asymmetric with lambda estimated";
  if (spec.lambda1_free() && spec.lambda2_free() && spec.mean_link().kind() == LinkKind::AoAsymmetric &&
      spec.disp_link().kind() == LinkKind::AoAsymmetric) {
    const TestResult link = link_adequacy_test(spec, y, model, {1.0, 1.0}, TestKind::LR, config.fit);
    add_test_row(tests, rows, "link_adequacy_lr", link);
    adequacy = "H0: (lambda1, lambda2) = (1, 1)";
  }
  tests.comments = {{"link_adequacy", adequacy}};
  tests.values.resize(static_cast<Index>(rows.size()), 3);
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (Index c = 0; c < 3; ++c) tests.values(static_cast<Index>(r), c) = rows[r][c];
  emit(result, o.out_dir, "tests.csv", tests);

  std::ostringstream out;
  out << "envelope: " << band.k << " simulated samples, outside fraction " << fixed(band.outside_fraction) << "\n";
  for (Index r = 0; r < tests.values.rows(); ++r) {
    out << tests.row_labels[r] << ": statistic " << fixed(tests.values(r, 0)) << " on "
        << static_cast<int>(tests.values(r, 1)) << " df, p = " << fixed(tests.values(r, 2), 4) << "\n";
  }
  out << rep.flagged.size() << " observations with |r_pp| > 2 or Cook distance > " << kCookThreshold << "\n";
  result.report = out.str();
  return result;
}

CommandResult cmd_simulate(const std::string& scenario_path, const std::string& out_dir,
                           std::optional<std::uint64_t> seed, int threads) {
  std::vector<McScenario> scenarios = load_scenarios(scenario_path);
  prepare_dir(out_dir);
  CommandResult result;
  std::ostringstream out;
  for (McScenario& sc : scenarios) {
    if (seed) {
      const bool e1 = sc.estimate_lambda1;
      const bool e2 = sc.estimate_lambda2;
      sc = McScenario::build(sc.name, sc.mean_link, sc.disp_link, sc.beta, sc.gamma, sc.lambda1, sc.lambda2, sc.n,
                             sc.replications, *seed);
      sc.estimate_lambda1 = e1;
      sc.estimate_lambda2 = e2;
    }
    const McSummary s = run_mc_study(sc, FitOptions{}, threads);
    CsvTable t;
    t.comments = {{"scenario", sc.name},
                  {"n", std::to_string(sc.n)},
                  {"replications", std::to_string(s.replications)},
                  {"converged", std::to_string(s.converged)},
                  {"nonconverged", std::to_string(s.nonconverged)},
                  {"seed", std::to_string(sc.seed)}};
    if (!s.sd_defined) t.comments.emplace_back("sd", "undefined (fewer than two converged replications)");
    t.label_header = "statistic";
    t.row_labels = {"mean", "bias", "RB", "SD", "MSE"};
    t.header = s.names;
    t.values.resize(5, static_cast<Index>(s.names.size()));
    t.values.row(0) = s.mean.transpose();
    t.values.row(1) = s.bias.transpose();
    t.values.row(2) = s.relative_bias.transpose();
    t.values.row(3) = s.sd.transpose();
    t.values.row(4) = s.mse.transpose();
    emit(result, out_dir, sc.name + ".csv", t);
    out << sc.name << ": " << s.converged << " of " << s.replications << " replications converged\n";
  }
  result.report = out.str();
  return result;
}

CommandResult cmd_marginal(const std::string& config_path, const std::string& data_path,
                           const std::string& model_path, const std::string& covariate, const std::string& out_dir) {
  const ModelConfig config = load_model_config(config_path);
  const Dataset data = load_csv(data_path, config);
  const FittedModel model = load_model(model_path, config, data);
  const Design design = build_design(config.mean, data);
  auto column_of = [&](const std::string& label) -> Index {
    for (std::size_t k = 0; k < design.labels.size(); ++k)
      if (design.labels[k] == label) return static_cast<Index>(k);
    return -1;
  };
  const Index j = column_of(covariate);
  if (j < 0) throw InputError("covariate '" + covariate + "' is not a column of the mean submodel");
  DerivedColumns derived;
  if (const Index sq = column_of(covariate + "^2"); sq >= 0) derived.square = sq;
  for (const auto& [a, b] : config.mean.interactions) {
    if (a != covariate && b != covariate) continue;
    const std::string& partner = a == covariate ? b : a;
    const Index other = column_of(partner);
    if (other < 0) throw InputError("interaction partner '" + partner + "' is not a column of the mean submodel");
    derived.products.emplace_back(column_of(a + ":" + b), other);
  }
  const Vector impact = marginal_impact(model, j, derived);
  prepare_dir(out_dir);
  CommandResult result;
  CsvTable t;
  t.comments = {{"covariate", covariate}};
  t.header = {"x", "impact", "mu"};
  t.values.resize(model.n(), 3);
  t.values << design.matrix.col(j), impact, model.surfaces.mu;
  emit(result, out_dir, "marginal_" + covariate + ".csv", t);
  result.report = "impact of " + covariate + " ranges over [" + fixed(impact.minCoeff(), 5) + ", " +
                  fixed(impact.maxCoeff(), 5) + "]\n";
  return result;
}

}  // namespace betalink
