#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "betalink/commands.hpp"
#include "betalink/error.hpp"

namespace {

void print(const betalink::CommandResult& r) {
  std::cout << r.report;
  for (const auto& f : r.files) std::cout << "wrote " << f << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Beta regression with parametric links and variable dispersion"};
  app.require_subcommand(1);

  std::string data, config, model, out_dir = ".", covariate, scenario;
  std::optional<std::uint64_t> seed;
  int envelope_k = 100;
  double alpha = 0.05;
  int threads = 0;

  auto* fit = app.add_subcommand("fit", "Fit the model and write estimates, summary and per-observation tables");
  fit->add_option("--config", config, "Model configuration (JSON)")->required()->check(CLI::ExistingFile);
  fit->add_option("--data", data, "Headered CSV data file")->required()->check(CLI::ExistingFile);
  fit->add_option("--out-dir", out_dir, "Output directory");

  auto* diag = app.add_subcommand("diagnose", "Residual, envelope and Cook-distance plot data plus RESET and link tests");
  diag->add_option("--config", config, "Model configuration (JSON)")->required()->check(CLI::ExistingFile);
  diag->add_option("--data", data, "Headered CSV data file")->required()->check(CLI::ExistingFile);
  diag->add_option("--model", model, "model.json written by 'fit'")->required()->check(CLI::ExistingFile);
  diag->add_option("--out-dir", out_dir, "Output directory");
  diag->add_option("--envelope-k", envelope_k, "Simulated samples for the envelope")->check(CLI::Range(19, 100000));
  diag->add_option("--alpha", alpha, "Envelope band level")->check(CLI::Range(1e-6, 0.5));
  diag->add_option("--seed", seed, "Random seed (overrides the config)");
  diag->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* sim = app.add_subcommand("simulate", "Monte Carlo study of the estimators");
  sim->add_option("--config", scenario, "Scenario file (JSON)")->required()->check(CLI::ExistingFile);
  sim->add_option("--out-dir", out_dir, "Output directory");
  sim->add_option("--seed", seed, "Random seed (overrides the scenario file)");
  sim->add_option("--threads", threads, "Worker threads (0 = all cores)");

  auto* marg = app.add_subcommand("marginal", "Marginal impact of a mean-submodel covariate");
  marg->add_option("--config", config, "Model configuration (JSON)")->required()->check(CLI::ExistingFile);
  marg->add_option("--data", data, "Headered CSV data file")->required()->check(CLI::ExistingFile);
  marg->add_option("--model", model, "model.json written by 'fit'")->required()->check(CLI::ExistingFile);
  marg->add_option("--covariate", covariate, "Covariate column name")->required();
  marg->add_option("--out-dir", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : betalink::kExitInput;
  }

  try {
    if (*fit) {
      print(betalink::cmd_fit(config, data, out_dir));
    } else if (*diag) {
      betalink::DiagnoseOptions o;
      o.config_path = config;
      o.data_path = data;
      o.model_path = model;
      o.out_dir = out_dir;
      o.envelope_k = envelope_k;
      o.alpha = alpha;
      o.seed = seed;
      o.threads = threads;
      print(betalink::cmd_diagnose(o));
    } else if (*sim) {
      print(betalink::cmd_simulate(scenario, out_dir, seed, threads));
    } else if (*marg) {
      print(betalink::cmd_marginal(config, data, model, covariate, out_dir));
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return betalink::exit_code_for(e);
  }
  return betalink::kExitOk;
}
