// Command-line front end: configuration-driven training, cycle evaluation,
// dataset experiments, the 2-D sandbox, and summary-table rendering.
// Exit code 0 means every requested artifact was fully written.
#include <CLI11.hpp>

#include <idemqe/config.hpp>
#include <idemqe/version.hpp>

#include <cstdio>
#include <string>

int main(int argc, char** argv) {
  CLI::App app{"idempotence-regularized enhancement toolkit"};
  app.set_version_flag("--version", std::string(idemqe::kVersion));
  app.require_subcommand(1);

  std::string config_path;
  idemqe::FlagOverrides flags;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "JSON config file");
    sub->add_option("--dataset", flags.dataset, "input path (overrides the config file)");
    sub->add_option("--out", flags.out, "output directory (must be new or empty)");
    sub->add_option("--seed", flags.seed, "run seed; all randomness derives from it");
    sub->add_option("--workers", flags.workers, "parallel workers, 0 = one per processor");
  };
  auto add_loss = [&](CLI::App* sub) {
    sub->add_option("--lambda-iden", flags.lambda_iden, "identity-loss weight");
    sub->add_option("--lambda-idem", flags.lambda_idem, "idempotence-loss weight");
    sub->add_option("--lambda-comp", flags.lambda_comp, "compactness-loss weight");
    sub->add_option("--a", flags.a, "compactness bound scale");
  };
  auto add_cycle = [&](CLI::App* sub) {
    sub->add_option("--cycles", flags.cycles, "enhancement cycles per image");
    sub->add_option("--case", flags.kase,
                    "draw discipline: same_method | vary_method | vary_method_and_codec");
    sub->add_option("--quality", flags.quality, "codec quality factor (replaces the codec list)");
  };

  CLI::App* train = app.add_subcommand("train", "train an enhancer; writes checkpoint + loss CSV");
  add_common(train);
  add_loss(train);
  train->add_option("--quality", flags.quality, "compression quality for training pairs");

  CLI::App* cycle = app.add_subcommand("cycle", "run one image through enhancement cycles");
  add_common(cycle);
  add_cycle(cycle);

  CLI::App* experiment =
      app.add_subcommand("experiment", "run the cycle protocol over an image directory");
  add_common(experiment);
  add_cycle(experiment);

  CLI::App* toy = app.add_subcommand("toy", "2-D mixture sandbox: train and diagnose drift");
  add_common(toy);
  add_loss(toy);

  CLI::App* report = app.add_subcommand("report", "render DI tables from a stored run");
  add_common(report);

  CLI11_PARSE(app, argc, argv);

  try {
    idemqe::RunConfig cfg;
    if (!config_path.empty()) cfg = idemqe::load_run_config(config_path);
    std::string command = app.get_subcommands().front()->get_name();
    if (!cfg.command.empty() && cfg.command != command) {
      throw std::invalid_argument("config file says command '" + cfg.command +
                                  "' but '" + command + "' was invoked");
    }
    cfg.command = command;
    idemqe::apply_overrides(cfg, flags);
    std::string stdout_text = idemqe::execute_run(cfg);
    if (!stdout_text.empty()) std::fputs(stdout_text.c_str(), stdout);
    return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "idemqe: %s\n", e.what());
    return 1;
  }
}
