#include "commands.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace app = sndiff::app;

int main(int argc, char** argv) {
  CLI::App cli{"Joint signal/noise posterior sampling with diffusion priors"};
  cli.require_subcommand(1);

  std::string config_path;
  std::string out_dir;
  std::uint64_t seed = 0;
  std::string rule;
  std::string run_dir;

  auto add_common = [&](CLI::App* sub, bool with_rule) {
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "Output directory (overrides output_dir)");
    sub->add_option("--seed", seed, "Seed (overrides seed)");
    if (with_rule) sub->add_option("--rule", rule, "Guidance rule: pigdm, dps or projection");
  };
  CLI::App* train = cli.add_subcommand("train", "Train an MLP score model with denoising score matching");
  add_common(train, false);
  CLI::App* sample = cli.add_subcommand("sample", "Sample the joint posterior for the configured problems");
  add_common(sample, true);
  CLI::App* eval = cli.add_subcommand("eval", "Compute metrics and oracle comparisons for a run directory");
  eval->add_option("run_dir", run_dir, "Directory written by `sample`")->required();
  CLI::App* bench = cli.add_subcommand("bench", "Time the guidance rules");
  add_common(bench, true);

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = cli.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (eval->parsed()) return app::cmd_eval(run_dir, std::cout);
    app::Overrides ov;
    CLI::App* used = train->parsed() ? train : sample->parsed() ? sample : bench;
    if (used->count("--seed")) ov.seed = seed;
    if (used->count("--out")) ov.output_dir = out_dir;
    if (used != train && used->count("--rule")) ov.rule = rule;
    const app::RunConfig config = app::load_config(config_path, ov);
    if (used == train) return app::cmd_train(config, std::cout);
    if (used == sample) return app::cmd_sample(config, std::cout);
    return app::cmd_bench(config, std::cout);
  } catch (const sndiff::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const sndiff::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
