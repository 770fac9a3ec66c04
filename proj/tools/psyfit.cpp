#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "psyfit/commands.hpp"

namespace {

struct GlobalFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> output_dir;
};

psyfit::RunConfig resolve(const GlobalFlags& flags) {
  auto cfg = psyfit::load_config(flags.config);
  if (flags.seed) cfg.seed = flags.seed;
  if (flags.workers) cfg.workers = *flags.workers;
  if (flags.output_dir) cfg.output_dir = *flags.output_dir;
  if (cfg.workers == 0) throw psyfit::ConfigError("workers must be >= 1");
  return cfg;
}

void print_scores(const std::vector<psyfit::VariantScore>& scores) { psyfit::write_results(std::cout, scores); }

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Regression harness scoring language-model vectors against reading times and fMRI responses"};
  app.require_subcommand(1);
  GlobalFlags flags;
  app.add_option("--config", flags.config, "Run configuration file")->required()->check(CLI::ExistingFile);
  app.add_option("--seed", flags.seed, "Override the [run] seed");
  app.add_option("--workers", flags.workers, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--output-dir", flags.output_dir, "Output directory (overrides [run] output_dir)");

  auto* preprocess = app.add_subcommand("preprocess", "Filter and partition the dataset; write the audit log");
  auto* evaluate = app.add_subcommand("evaluate", "Held-out Pearson r of every listed bundle");
  auto* residualize = app.add_subcommand("residualize", "Contribution of trained bundles beyond untrained ones");
  auto* scaling = app.add_subcommand("scaling", "Scores, residualized scores, scaling lines and plots");
  auto* synth = app.add_subcommand("synth", "Write a synthetic dataset with matching bundles and config");
  for (auto* sub : {preprocess, evaluate, residualize, scaling, synth}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? psyfit::kExitOk : psyfit::kExitConfig;
  }

  try {
    const auto cfg = resolve(flags);
    if (preprocess->parsed()) {
      const auto ds = psyfit::cmd_preprocess(cfg);
      for (const auto& part : ds.parts) std::cout << part.name << ": " << part.table.size() << " rows\n";
    } else if (evaluate->parsed()) {
      print_scores(psyfit::cmd_evaluate(cfg));
    } else if (residualize->parsed()) {
      print_scores(psyfit::cmd_residualize(cfg));
    } else if (scaling->parsed()) {
      psyfit::write_scaling_summary(std::cout, psyfit::cmd_scaling(cfg));
    } else if (synth->parsed()) {
      psyfit::cmd_synth(cfg);
      std::cout << "wrote " << cfg.output_dir << "/run.ini\n";
    }
    std::cerr << "outputs in " << cfg.output_dir << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return psyfit::exit_code(e);
  }
  return psyfit::kExitOk;
}
