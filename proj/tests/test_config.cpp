// Config front-end tests: strict parsing with key-path diagnostics, echo
// round trips, flag precedence, command dispatch with all-or-nothing output
// directories, and the installed command-line binary.
#include <idemqe/config.hpp>

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

namespace {

using namespace idemqe;

std::string tmp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / name).string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  EXPECT_TRUE(in.good()) << path;
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void spit(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  ASSERT_TRUE(out.good()) << path;
  out << text;
}

ImageBuffer synth_image(std::size_t n, std::uint64_t seed) {
  ImageBuffer img = ImageBuffer::make(n, n, 1);
  Rng rng(seed);
  double cx = rng.uniform(0.2, 0.8) * static_cast<double>(n);
  double cy = rng.uniform(0.2, 0.8) * static_cast<double>(n);
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      double dx = static_cast<double>(x) - cx, dy = static_cast<double>(y) - cy;
      double v = 0.35 + 0.3 * static_cast<double>(x + y) / (2.0 * static_cast<double>(n)) +
                 0.3 * std::exp(-(dx * dx + dy * dy) / (0.05 * static_cast<double>(n * n)));
      img.at(y, x, 0) = v > 1.0 ? 1.0 : v;
    }
  }
  return img;
}

// error message of a failing parse, "" if it unexpectedly succeeds
std::string parse_error_of(const std::string& text) {
  try {
    parse_run_config_text(text, "cfg");
    return "";
  } catch (const std::exception& e) {
    return e.what();
  }
}

TEST(ParseConfig, EmptyDocumentCarriesPublishedDefaults) {
  RunConfig cfg = parse_run_config_text("{}", "cfg");
  EXPECT_EQ(cfg.loss.lambda_iden, 1e-2);
  EXPECT_EQ(cfg.loss.lambda_idem, 1e-2);
  EXPECT_EQ(cfg.loss.lambda_comp, 1e-3);
  EXPECT_EQ(cfg.loss.a, 1.5);
  EXPECT_EQ(cfg.train.mode, TrainMode::kDomainConsistent);
  EXPECT_EQ(cfg.train.distance, Distance::kL1);
  EXPECT_EQ(cfg.cycle.cycles, 5u);
  EXPECT_EQ(cfg.cycle.kase, "same_method");
  EXPECT_TRUE(cfg.cycle.clamp_between_cycles);
  EXPECT_FALSE(cfg.cycle.quantize_between_cycles);
  EXPECT_EQ(cfg.codecs, std::vector<int>{40});
  EXPECT_EQ(cfg.metrics, (std::vector<std::string>{"psnr", "ssim"}));
  EXPECT_EQ(cfg.straightforward.m, 2u);
  EXPECT_EQ(cfg.straightforward.weights, (std::vector<double>{1.0, 0.01}));
  EXPECT_FALSE(cfg.toy.corruption_sigma.has_value());
  EXPECT_TRUE(cfg.command.empty());
}

TEST(ParseConfig, UnknownKeysAreRejectedWithTheirPath) {
  std::string e1 = parse_error_of(R"({"loss": {"lambda_idem_typo": 1.0}})");
  EXPECT_NE(e1.find("cfg.loss.lambda_idem_typo"), std::string::npos) << e1;

  std::string e2 = parse_error_of(R"({"lamda": 3})");
  EXPECT_NE(e2.find("cfg.lamda"), std::string::npos) << e2;

  std::string e3 =
      parse_error_of(R"({"cycle": {"operators": [{"kind": "builtin", "filtre": "x"}]}})");
  EXPECT_NE(e3.find("cfg.cycle.operators[0].filtre"), std::string::npos) << e3;

  std::string e4 = parse_error_of(R"({"train": {"adam": {"beta3": 0.9}}})");
  EXPECT_NE(e4.find("cfg.train.adam.beta3"), std::string::npos) << e4;
}

TEST(ParseConfig, TypeMismatchesNameTheKey) {
  std::string e1 = parse_error_of(R"({"train": {"iterations": "many"}})");
  EXPECT_NE(e1.find("cfg.train.iterations"), std::string::npos) << e1;

  std::string e2 = parse_error_of(R"({"seed": -4})");
  EXPECT_NE(e2.find("cfg.seed"), std::string::npos) << e2;

  std::string e3 = parse_error_of(R"({"codecs": [40, "q60"]})");
  EXPECT_NE(e3.find("cfg.codecs[1]"), std::string::npos) << e3;

  std::string e4 = parse_error_of(R"({"metrics": "psnr"})");
  EXPECT_NE(e4.find("cfg.metrics"), std::string::npos) << e4;

  std::string e5 = parse_error_of(R"({"cycle": {"case": "case7"}})");
  EXPECT_NE(e5.find("case7"), std::string::npos) << e5;
}

TEST(ParseConfig, MalformedJsonNamesTheSource) {
  std::string e = parse_error_of("{oops");
  EXPECT_NE(e.find("cfg"), std::string::npos) << e;
}

TEST(ParseConfig, ModelSectionSelectsFamilies) {
  RunConfig dn = parse_run_config_text(
      R"({"model": {"family": "dncnn_like", "channels_in": 1, "depth": 5, "hidden": 12,
                    "residual": true}})",
      "cfg");
  EXPECT_EQ(dn.model.family, ModelFamily::kDncnnLike);
  EXPECT_EQ(dn.model.depth, 5u);
  EXPECT_EQ(dn.model.channels_hidden, 12u);
  EXPECT_TRUE(dn.model.residual);
  // this family is residual by construction; the key may only confirm that
  EXPECT_NE(parse_error_of(R"({"model": {"family": "dncnn_like", "residual": false}})"), "");

  RunConfig ar = parse_run_config_text(
      R"({"model": {"family": "arcnn_like", "channels_in": 3, "hidden": 16}})", "cfg");
  EXPECT_EQ(ar.model.family, ModelFamily::kArcnnLike);
  EXPECT_EQ(ar.model.depth, 4u);

  EXPECT_NE(parse_error_of(R"({"model": {"family": "arcnn_like", "depth": 6}})"), "");
  EXPECT_NE(parse_error_of(R"({"model": {"family": "resnet"}})"), "");

  RunConfig mlp = parse_run_config_text(
      R"({"model": {"family": "mlp", "channels_in": 2, "hidden": 8, "depth": 4}})", "cfg");
  EXPECT_EQ(mlp.model.family, ModelFamily::kMlp);
  EXPECT_EQ(mlp.model.channels_hidden, 8u);
}

TEST(ParseConfig, OperatorsParseByKind) {
  RunConfig cfg = parse_run_config_text(
      R"({"cycle": {"operators": [
            {"kind": "builtin", "filter": "box_blur3"},
            {"kind": "checkpoint", "path": "runs/a/model.ckpt"},
            {"kind": "checkpoint", "path": "runs/b/model.ckpt", "name": "tuned"},
            {"kind": "external", "command": "cat", "name": "passthrough"}]}})",
      "cfg");
  ASSERT_EQ(cfg.cycle.operators.size(), 4u);
  EXPECT_EQ(cfg.cycle.operators[0].name, "box_blur3");
  EXPECT_EQ(cfg.cycle.operators[1].name, "model");  // file stem is the default label
  EXPECT_EQ(cfg.cycle.operators[2].name, "tuned");
  EXPECT_EQ(cfg.cycle.operators[3].parameters, "cat");

  EXPECT_NE(parse_error_of(R"({"cycle": {"operators": [{"kind": "external",
                              "command": "cat"}]}})"),
            "");  // external operators must be named
  EXPECT_NE(parse_error_of(R"({"cycle": {"operators": [{"kind": "plugin"}]}})"), "");
  EXPECT_NE(parse_error_of(R"({"cycle": {"operators": [{"kind": "builtin"}]}})"), "");
}

TEST(ParseConfig, CommandsAreValidated) {
  for (const std::string& cmd : known_commands()) {
    RunConfig cfg = parse_run_config_text("{\"command\": \"" + cmd + "\"}", "cfg");
    EXPECT_EQ(cfg.command, cmd);
  }
  EXPECT_NE(parse_error_of(R"({"command": "trainn"})"), "");
}

TEST(EchoConfig, ReparseReproducesTheDocument) {
  RunConfig cfg = parse_run_config_text(
      R"({"command": "experiment", "dataset": "data/x", "out": "runs/y", "seed": 123,
          "workers": 2,
          "model": {"family": "dncnn_like", "channels_in": 1, "depth": 4, "hidden": 8},
          "train": {"mode": "straightforward", "iterations": 77, "learning_rate": 0.002},
          "loss": {"lambda_comp": 0.0005, "a": 1.25},
          "straightforward": {"rounds": 3, "weights": [1.0, 0.5, 0.25]},
          "cycle": {"cycles": 4, "case": "vary_method",
                    "operators": [{"kind": "builtin", "filter": "sharpen3"},
                                  {"kind": "external", "command": "cat", "name": "id"}]},
          "codecs": [40, 60], "metrics": ["psnr"],
          "toy": {"components": 4, "corruption_sigma": 0.7}})",
      "cfg");
  std::string echo1 = echo_config(cfg);
  RunConfig back = parse_run_config_text(echo1, "echo");
  std::string echo2 = echo_config(back);
  EXPECT_EQ(echo1, echo2);
  EXPECT_NE(echo1.find("\"version\""), std::string::npos);
  EXPECT_NE(echo1.find(kVersion), std::string::npos);

  // absent optional stays absent through the round trip
  RunConfig no_sigma = parse_run_config_text("{}", "cfg");
  RunConfig no_sigma_back = parse_run_config_text(echo_config(no_sigma), "echo");
  EXPECT_FALSE(no_sigma_back.toy.corruption_sigma.has_value());
}

TEST(FlagOverrides, FlagsWinOverFileValues) {
  RunConfig cfg = parse_run_config_text(
      R"({"command": "cycle", "seed": 1, "codecs": [40],
          "loss": {"lambda_comp": 0.001},
          "cycle": {"cycles": 5, "case": "same_method"}})",
      "cfg");
  FlagOverrides f;
  f.seed = 9;
  f.workers = 2;
  f.cycles = 3;
  f.quality = 60;
  f.kase = "vary_method";
  f.lambda_comp = 5e-4;
  f.a = 1.25;
  f.dataset = "imgs";
  f.out = "outdir";
  apply_overrides(cfg, f);

  EXPECT_EQ(cfg.seed, 9u);
  EXPECT_EQ(cfg.workers, 2u);
  EXPECT_EQ(cfg.cycle.cycles, 3u);
  EXPECT_EQ(cfg.codecs, std::vector<int>{60});
  EXPECT_EQ(cfg.cycle.kase, "vary_method");
  EXPECT_EQ(cfg.loss.lambda_comp, 5e-4);
  EXPECT_EQ(cfg.loss.a, 1.25);

  // the echo records the effective (overridden) configuration
  RunConfig back = parse_run_config_text(echo_config(cfg), "echo");
  EXPECT_EQ(back.seed, 9u);
  EXPECT_EQ(back.codecs, std::vector<int>{60});
  EXPECT_EQ(back.loss.lambda_comp, 5e-4);

  FlagOverrides bad;
  bad.kase = "case9";
  EXPECT_THROW(apply_overrides(cfg, bad), std::invalid_argument);
}

TEST(Workers, ZeroMeansOnePerProcessor) {
  EXPECT_GE(resolve_workers(0), 1u);
  EXPECT_EQ(resolve_workers(3), 3u);
}

TEST(ExecuteRun, CycleWithIdentityWritesArtifactsAndZeroIndex) {
  std::string img_path = tmp_path("config_cycle_input.pgm");
  write_pnm_file(synth_image(24, 5), img_path);
  std::string out = tmp_path("config_cycle_out");
  std::filesystem::remove_all(out);

  RunConfig cfg;
  cfg.command = "cycle";
  cfg.dataset = img_path;
  cfg.out = out;
  cfg.seed = 3;
  cfg.cycle.cycles = 4;
  cfg.cycle.operators = {OperatorConfig{"builtin", "identity", "identity"}};
  EXPECT_EQ(execute_run(cfg), "");

  for (const char* f :
       {"/config_echo.json", "/cycles.csv", "/trace.csv", "/summary.csv", "/report.txt"}) {
    EXPECT_TRUE(std::filesystem::exists(out + f)) << f;
  }
  RunConfig echoed = parse_run_config_text(slurp(out + "/config_echo.json"), "echo");
  EXPECT_EQ(echoed.command, "cycle");
  EXPECT_EQ(echoed.seed, 3u);

  std::string summary = slurp(out + "/summary.csv");
  // identity cycling cannot change quality: both metrics report DI = 0
  EXPECT_NE(summary.find("q40,same_method,psnr,1,0,0"), std::string::npos) << summary;
  EXPECT_NE(summary.find("q40,same_method,ssim,1,0,0"), std::string::npos) << summary;
}

TEST(ExecuteRun, RefusesNonEmptyOutputAndNeverDeletesForeignFiles) {
  std::string out = tmp_path("config_busy_out");
  std::filesystem::remove_all(out);
  std::filesystem::create_directories(out);
  spit(out + "/precious.txt", "keep me");

  RunConfig cfg;
  cfg.command = "report";
  cfg.dataset = "/nonexistent";
  cfg.out = out;
  EXPECT_THROW(execute_run(cfg), std::runtime_error);
  EXPECT_EQ(slurp(out + "/precious.txt"), "keep me");
}

TEST(ExecuteRun, FailureRemovesPartialOutputs) {
  std::string junk = tmp_path("config_junk_ds");
  std::filesystem::remove_all(junk);
  std::filesystem::create_directories(junk);
  spit(junk + "/a.txt", "not an image");

  std::string out = tmp_path("config_failed_out");
  std::filesystem::remove_all(out);

  RunConfig cfg;
  cfg.command = "experiment";
  cfg.dataset = junk;  // no readable image -> the run fails after the echo
  cfg.out = out;
  cfg.cycle.operators = {OperatorConfig{"builtin", "identity", "identity"}};
  EXPECT_THROW(execute_run(cfg), std::runtime_error);
  EXPECT_FALSE(std::filesystem::exists(out));

  RunConfig no_command;
  no_command.out = tmp_path("config_never_out");
  EXPECT_THROW(execute_run(no_command), std::invalid_argument);
  EXPECT_FALSE(std::filesystem::exists(no_command.out));
}

TEST(ExecuteRun, ReportReproducesTheGoldenFixtureByteForByte) {
  std::string fixture_in = std::string(IDEMQE_FIXTURE_DIR) + "/report_input";
  std::string golden = slurp(std::string(IDEMQE_FIXTURE_DIR) + "/report_golden.txt");
  EXPECT_EQ(render_summary_tables(fixture_in), golden);

  std::string out = tmp_path("config_report_out");
  std::filesystem::remove_all(out);
  RunConfig cfg;
  cfg.command = "report";
  cfg.dataset = fixture_in;
  cfg.out = out;
  EXPECT_EQ(execute_run(cfg), golden);
  EXPECT_EQ(slurp(out + "/tables.txt"), golden);
}

TEST(ExecuteRun, TrainWritesCheckpointCurveAndEcho) {
  std::string ds = tmp_path("config_train_ds");
  std::filesystem::remove_all(ds);
  std::filesystem::create_directories(ds);
  write_pnm_file(synth_image(24, 11), ds + "/a.pgm");
  write_pnm_file(synth_image(24, 12), ds + "/b.pgm");

  std::string out = tmp_path("config_train_out");
  std::filesystem::remove_all(out);

  RunConfig cfg;
  cfg.command = "train";
  cfg.dataset = ds;
  cfg.out = out;
  cfg.seed = 4;
  cfg.model = ModelSpec::dncnn_like(1, 3, 4);
  cfg.train.iterations = 3;
  cfg.train.batch_size = 2;
  cfg.train.patch_size = 12;
  cfg.train.log_interval = 1;
  cfg.train.mode = TrainMode::kBaseline;
  cfg.loss = LossWeights{0.0, 0.0, 0.0, 1.5};
  EXPECT_EQ(execute_run(cfg), "");

  auto [spec, params] = load_checkpoint(out + "/model.ckpt");
  EXPECT_EQ(spec.depth, 3u);
  EXPECT_EQ(spec.channels_hidden, 4u);
  std::string curve = slurp(out + "/loss_curve.csv");
  EXPECT_EQ(curve.rfind("iteration,", 0), 0u);
  EXPECT_TRUE(std::filesystem::exists(out + "/config_echo.json"));
}

TEST(ExecuteRun, ToyWritesSandboxArtifacts) {
  std::string out = tmp_path("config_toy_out");
  std::filesystem::remove_all(out);

  RunConfig cfg;
  cfg.command = "toy";
  cfg.out = out;
  cfg.seed = 6;
  cfg.train.iterations = 5;
  cfg.train.batch_size = 8;
  cfg.train.log_interval = 1;
  cfg.toy.hidden = 4;
  cfg.toy.train_count = 32;
  cfg.toy.eval_count = 16;
  EXPECT_EQ(execute_run(cfg), "");
  for (const char* f : {"/config_echo.json", "/loss_curve.csv", "/model.ckpt", "/clouds.csv",
                        "/drift_profile.csv", "/summary.csv"}) {
    EXPECT_TRUE(std::filesystem::exists(out + f)) << f;
  }
}

// the installed binary: flag parsing, config files, exit codes, stdout
TEST(CliBinary, ExitCodesFollowArtifactCompleteness) {
  std::string img_path = tmp_path("cli_input.pgm");
  write_pnm_file(synth_image(20, 8), img_path);

  std::string config_path = tmp_path("cli_config.json");
  spit(config_path, R"({"command": "cycle",
                        "cycle": {"cycles": 2,
                                  "operators": [{"kind": "builtin", "filter": "identity"}]}})");

  auto run = [](const std::string& cmd) {
    int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  };
  std::string cli = IDEMQE_CLI_PATH;
  std::string out = tmp_path("cli_cycle_out");
  std::filesystem::remove_all(out);

  std::string base = cli + " cycle --config '" + config_path + "' --dataset '" + img_path +
                     "' --out '" + out + "' --seed 3";
  EXPECT_EQ(run(base + " 2>/dev/null"), 0);
  EXPECT_TRUE(std::filesystem::exists(out + "/summary.csv"));

  // same output directory again: refused, exit 1
  EXPECT_EQ(run(base + " 2>/dev/null"), 1);

  // config command and subcommand disagree: exit 1
  std::string out2 = tmp_path("cli_mismatch_out");
  std::filesystem::remove_all(out2);
  EXPECT_EQ(run(cli + " train --config '" + config_path + "' --out '" + out2 +
                "' 2>/dev/null"),
            1);
  EXPECT_FALSE(std::filesystem::exists(out2));

  EXPECT_EQ(run(cli + " --version >/dev/null 2>&1"), 0);
}

TEST(CliBinary, ReportPrintsTheRenderedTables) {
  std::string fixture_in = std::string(IDEMQE_FIXTURE_DIR) + "/report_input";
  std::string golden = slurp(std::string(IDEMQE_FIXTURE_DIR) + "/report_golden.txt");
  std::string out = tmp_path("cli_report_out");
  std::string capture = tmp_path("cli_report_stdout.txt");
  std::filesystem::remove_all(out);
  std::filesystem::remove(capture);

  std::string cmd = std::string(IDEMQE_CLI_PATH) + " report --dataset '" + fixture_in +
                    "' --out '" + out + "' > '" + capture + "'";
  int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
  EXPECT_EQ(slurp(capture), golden);
  EXPECT_EQ(slurp(out + "/tables.txt"), golden);
}

}  // namespace
