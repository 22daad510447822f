#pragma once
// Configuration-driven run front end. One canonical config format (JSON)
// with strict parsing: unknown keys and type mismatches are rejected with
// the full key path, so a typo in a loss-weight name cannot silently
// invalidate an experiment. Flags override file values; every run writes a
// config echo that reproduces it.
//
// Randomness discipline: the run seed is the only seed. Training, patch
// layout, and per-image cycle draws all derive named sub-streams from it,
// so changing one stage does not perturb the others.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <json.hpp>

#include <idemqe/harness.hpp>
#include <idemqe/toy.hpp>
#include <idemqe/training.hpp>
#include <idemqe/version.hpp>

namespace idemqe {

// ---------------------------------------------------------------------------
// run configuration

// Declarative form of an enhancement operator, materialized via
// make_operator. `parameters` is the filter name, checkpoint path, or shell
// command depending on kind.
struct OperatorConfig {
  std::string kind = "builtin";
  std::string name;  // optional for builtin/checkpoint; required for external
  std::string parameters;
};

struct CycleSection {
  std::size_t cycles = 5;
  std::string kase = "same_method";
  bool clamp_between_cycles = true;
  bool quantize_between_cycles = false;
  std::vector<OperatorConfig> operators;
};

struct ToySection {
  std::size_t components = 3;
  std::size_t hidden = 16;
  std::size_t depth = 3;
  bool residual = true;
  std::optional<double> corruption_sigma;  // absent -> target spread
  std::size_t train_count = 512;
  std::size_t eval_count = 512;
};

struct RunConfig {
  std::string command;  // train | cycle | experiment | toy | report
  std::string dataset;  // input: image directory, single image, or stored-run directory
  std::string out;      // output directory; must be new or empty
  std::uint64_t seed = 0;
  std::size_t workers = 0;  // 0 = one per processor
  ModelSpec model = ModelSpec::dncnn_like(1);
  TrainConfig train;
  LossWeights loss;
  StraightforwardConfig straightforward;
  CycleSection cycle;
  std::vector<int> codecs = {40};  // quality factors; first one drives training pairs
  std::vector<std::string> metrics = {"psnr", "ssim"};
  ToySection toy;
};

// ---------------------------------------------------------------------------
// strict JSON parsing

namespace detail {

// Read-side view of one JSON object that knows its key path, so every
// diagnostic points at the exact offending entry.
class JsonCursor {
 public:
  JsonCursor(const nlohmann::json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw std::invalid_argument(path_ + ": expected an object");
  }

  void allow_keys(std::initializer_list<const char*> keys) const {
    for (const auto& item : j_.items()) {
      bool known = false;
      for (const char* k : keys) known = known || item.key() == k;
      if (!known) throw std::invalid_argument("unknown key: " + path_ + "." + item.key());
    }
  }

  bool has(const char* key) const { return j_.contains(key) && !j_.at(key).is_null(); }

  JsonCursor child(const char* key) const {
    return JsonCursor(j_.at(key), path_ + "." + key);
  }

  const nlohmann::json& raw(const char* key) const { return j_.at(key); }
  const std::string& path() const { return path_; }

  std::string get_string(const char* key, const std::string& fallback) const {
    if (!has(key)) return fallback;
    const nlohmann::json& v = j_.at(key);
    if (!v.is_string()) throw type_error(key, "a string");
    return v.get<std::string>();
  }

  double get_double(const char* key, double fallback) const {
    if (!has(key)) return fallback;
    const nlohmann::json& v = j_.at(key);
    if (!v.is_number()) throw type_error(key, "a number");
    return v.get<double>();
  }

  bool get_bool(const char* key, bool fallback) const {
    if (!has(key)) return fallback;
    const nlohmann::json& v = j_.at(key);
    if (!v.is_boolean()) throw type_error(key, "a boolean");
    return v.get<bool>();
  }

  std::uint64_t get_u64(const char* key, std::uint64_t fallback) const {
    if (!has(key)) return fallback;
    const nlohmann::json& v = j_.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) {
      throw type_error(key, "a non-negative integer");
    }
    if (v.is_number_integer() && v.get<std::int64_t>() < 0) {
      throw type_error(key, "a non-negative integer");
    }
    return v.get<std::uint64_t>();
  }

  std::size_t get_size(const char* key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
  }

  int get_int(const char* key, int fallback) const {
    if (!has(key)) return fallback;
    const nlohmann::json& v = j_.at(key);
    if (!v.is_number_integer() && !v.is_number_unsigned()) throw type_error(key, "an integer");
    return v.get<int>();
  }

 private:
  std::invalid_argument type_error(const char* key, const char* want) const {
    return std::invalid_argument(path_ + "." + key + ": expected " + want);
  }

  const nlohmann::json& j_;
  std::string path_;
};

inline void parse_model(const JsonCursor& c, ModelSpec& spec) {
  c.allow_keys({"family", "channels_in", "hidden", "depth", "residual"});
  std::string family = c.get_string("family", to_string(spec.family));
  if (family == "dncnn_like") {
    if (!c.get_bool("residual", true)) {
      throw std::invalid_argument(c.path() + ".residual: dncnn_like is always residual");
    }
    spec = ModelSpec::dncnn_like(c.get_size("channels_in", 1), c.get_size("depth", 8),
                                 c.get_size("hidden", 32));
  } else if (family == "arcnn_like") {
    if (c.has("depth") || c.has("residual")) {
      throw std::invalid_argument(c.path() + ": arcnn_like fixes depth and residual");
    }
    spec = ModelSpec::arcnn_like(c.get_size("channels_in", 1), c.get_size("hidden", 32));
  } else if (family == "mlp") {
    spec = ModelSpec::mlp(c.get_size("channels_in", 2), c.get_size("hidden", 16),
                          c.get_size("depth", 3), c.get_bool("residual", true));
  } else {
    throw std::invalid_argument(c.path() + ".family: unknown family '" + family + "'");
  }
  spec.validate();
}

inline void parse_train(const JsonCursor& c, TrainConfig& t) {
  c.allow_keys({"mode", "optimizer", "iterations", "batch_size", "learning_rate", "patch_size",
                "distance", "log_interval", "checkpoint_interval", "adam"});
  t.mode = train_mode_from_string(c.get_string("mode", to_string(t.mode)));
  t.optimizer = optimizer_from_string(c.get_string("optimizer", to_string(t.optimizer)));
  t.iterations = c.get_size("iterations", t.iterations);
  t.batch_size = c.get_size("batch_size", t.batch_size);
  t.learning_rate = c.get_double("learning_rate", t.learning_rate);
  t.patch_size = c.get_size("patch_size", t.patch_size);
  t.distance = distance_from_string(c.get_string("distance", to_string(t.distance)));
  t.log_interval = c.get_size("log_interval", t.log_interval);
  t.checkpoint_interval = c.get_size("checkpoint_interval", t.checkpoint_interval);
  if (c.has("adam")) {
    JsonCursor a = c.child("adam");
    a.allow_keys({"beta1", "beta2", "epsilon"});
    t.adam.beta1 = a.get_double("beta1", t.adam.beta1);
    t.adam.beta2 = a.get_double("beta2", t.adam.beta2);
    t.adam.epsilon = a.get_double("epsilon", t.adam.epsilon);
  }
}

inline void parse_loss(const JsonCursor& c, LossWeights& w) {
  c.allow_keys({"lambda_iden", "lambda_idem", "lambda_comp", "a"});
  w.lambda_iden = c.get_double("lambda_iden", w.lambda_iden);
  w.lambda_idem = c.get_double("lambda_idem", w.lambda_idem);
  w.lambda_comp = c.get_double("lambda_comp", w.lambda_comp);
  w.a = c.get_double("a", w.a);
}

inline void parse_straightforward(const JsonCursor& c, StraightforwardConfig& s) {
  c.allow_keys({"rounds", "weights"});
  s.m = c.get_size("rounds", s.m);
  if (c.has("weights")) {
    const nlohmann::json& v = c.raw("weights");
    if (!v.is_array()) throw std::invalid_argument(c.path() + ".weights: expected an array");
    s.weights.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        throw std::invalid_argument(c.path() + ".weights[" + std::to_string(i) +
                                    "]: expected a number");
      }
      s.weights.push_back(v[i].get<double>());
    }
  }
}

inline OperatorConfig parse_operator(const nlohmann::json& j, const std::string& path) {
  JsonCursor c(j, path);
  OperatorConfig oc;
  oc.kind = c.get_string("kind", "builtin");
  if (oc.kind == "builtin") {
    c.allow_keys({"kind", "filter"});
    oc.parameters = c.get_string("filter", "");
    if (oc.parameters.empty()) throw std::invalid_argument(path + ".filter: required");
    oc.name = oc.parameters;
  } else if (oc.kind == "checkpoint") {
    c.allow_keys({"kind", "path", "name"});
    oc.parameters = c.get_string("path", "");
    if (oc.parameters.empty()) throw std::invalid_argument(path + ".path: required");
    oc.name = c.get_string("name", std::filesystem::path(oc.parameters).stem().string());
  } else if (oc.kind == "external") {
    c.allow_keys({"kind", "command", "name"});
    oc.parameters = c.get_string("command", "");
    if (oc.parameters.empty()) throw std::invalid_argument(path + ".command: required");
    oc.name = c.get_string("name", "");
    if (oc.name.empty()) throw std::invalid_argument(path + ".name: required for external");
  } else {
    throw std::invalid_argument(path + ".kind: unknown kind '" + oc.kind + "'");
  }
  return oc;
}

inline void parse_cycle(const JsonCursor& c, CycleSection& s) {
  c.allow_keys({"cycles", "case", "clamp_between_cycles", "quantize_between_cycles",
                "operators"});
  s.cycles = c.get_size("cycles", s.cycles);
  s.kase = c.get_string("case", s.kase);
  cycle_case_from_string(s.kase);  // reject unknown names at parse time
  s.clamp_between_cycles = c.get_bool("clamp_between_cycles", s.clamp_between_cycles);
  s.quantize_between_cycles = c.get_bool("quantize_between_cycles", s.quantize_between_cycles);
  if (c.has("operators")) {
    const nlohmann::json& v = c.raw("operators");
    if (!v.is_array()) throw std::invalid_argument(c.path() + ".operators: expected an array");
    s.operators.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      s.operators.push_back(
          parse_operator(v[i], c.path() + ".operators[" + std::to_string(i) + "]"));
    }
  }
}

inline void parse_toy(const JsonCursor& c, ToySection& s) {
  c.allow_keys({"components", "hidden", "depth", "residual", "corruption_sigma", "train_count",
                "eval_count"});
  s.components = c.get_size("components", s.components);
  s.hidden = c.get_size("hidden", s.hidden);
  s.depth = c.get_size("depth", s.depth);
  s.residual = c.get_bool("residual", s.residual);
  if (c.has("corruption_sigma")) s.corruption_sigma = c.get_double("corruption_sigma", 0.0);
  s.train_count = c.get_size("train_count", s.train_count);
  s.eval_count = c.get_size("eval_count", s.eval_count);
}

}  // namespace detail

inline const std::vector<std::string>& known_commands() {
  static const std::vector<std::string> cmds = {"train", "cycle", "experiment", "toy", "report"};
  return cmds;
}

// Parses a full configuration document. `source` names the input (file name
// or "<flags>") for diagnostics. Unknown keys anywhere are rejected with
// their key path; absent keys keep module-level defaults, including the
// published loss weights.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::string& source) {
  RunConfig cfg;
  detail::JsonCursor c(j, source);
  c.allow_keys({"command", "dataset", "out", "seed", "workers", "model", "train", "loss",
                "straightforward", "cycle", "codecs", "metrics", "toy", "version"});
  cfg.command = c.get_string("command", "");
  if (!cfg.command.empty()) {
    bool known = false;
    for (const std::string& k : known_commands()) known = known || k == cfg.command;
    if (!known) {
      throw std::invalid_argument(source + ".command: unknown command '" + cfg.command + "'");
    }
  }
  cfg.dataset = c.get_string("dataset", "");
  cfg.out = c.get_string("out", "");
  cfg.seed = c.get_u64("seed", 0);
  cfg.workers = c.get_size("workers", 0);
  if (c.has("model")) detail::parse_model(c.child("model"), cfg.model);
  if (c.has("train")) detail::parse_train(c.child("train"), cfg.train);
  if (c.has("loss")) detail::parse_loss(c.child("loss"), cfg.loss);
  if (c.has("straightforward")) {
    detail::parse_straightforward(c.child("straightforward"), cfg.straightforward);
  }
  if (c.has("cycle")) detail::parse_cycle(c.child("cycle"), cfg.cycle);
  if (c.has("codecs")) {
    const nlohmann::json& v = c.raw("codecs");
    if (!v.is_array()) throw std::invalid_argument(source + ".codecs: expected an array");
    cfg.codecs.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number_integer() && !v[i].is_number_unsigned()) {
        throw std::invalid_argument(source + ".codecs[" + std::to_string(i) +
                                    "]: expected an integer quality factor");
      }
      cfg.codecs.push_back(v[i].get<int>());
    }
  }
  if (c.has("metrics")) {
    const nlohmann::json& v = c.raw("metrics");
    if (!v.is_array()) throw std::invalid_argument(source + ".metrics: expected an array");
    cfg.metrics.clear();
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_string()) {
        throw std::invalid_argument(source + ".metrics[" + std::to_string(i) +
                                    "]: expected a metric name");
      }
      cfg.metrics.push_back(v[i].get<std::string>());
    }
  }
  if (c.has("toy")) detail::parse_toy(c.child("toy"), cfg.toy);
  return cfg;
}

inline RunConfig parse_run_config_text(const std::string& text, const std::string& source) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument(source + ": " + e.what());
  }
  return parse_run_config(j, source);
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_run_config_text(buf.str(), path);
}

// ---------------------------------------------------------------------------
// canonical echo

inline nlohmann::json config_to_json(const RunConfig& cfg) {
  nlohmann::json j;
  j["command"] = cfg.command;
  j["dataset"] = cfg.dataset;
  j["out"] = cfg.out;
  j["seed"] = cfg.seed;
  j["workers"] = cfg.workers;
  j["model"] = {{"family", to_string(cfg.model.family)},
                {"channels_in", cfg.model.channels_in},
                {"hidden", cfg.model.channels_hidden},
                {"depth", cfg.model.depth},
                {"residual", cfg.model.residual}};
  if (cfg.model.family == ModelFamily::kArcnnLike) {
    j["model"].erase("depth");
    j["model"].erase("residual");
  }
  j["train"] = {{"mode", to_string(cfg.train.mode)},
                {"optimizer", to_string(cfg.train.optimizer)},
                {"iterations", cfg.train.iterations},
                {"batch_size", cfg.train.batch_size},
                {"learning_rate", cfg.train.learning_rate},
                {"patch_size", cfg.train.patch_size},
                {"distance", to_string(cfg.train.distance)},
                {"log_interval", cfg.train.log_interval},
                {"checkpoint_interval", cfg.train.checkpoint_interval},
                {"adam",
                 {{"beta1", cfg.train.adam.beta1},
                  {"beta2", cfg.train.adam.beta2},
                  {"epsilon", cfg.train.adam.epsilon}}}};
  j["loss"] = {{"lambda_iden", cfg.loss.lambda_iden},
               {"lambda_idem", cfg.loss.lambda_idem},
               {"lambda_comp", cfg.loss.lambda_comp},
               {"a", cfg.loss.a}};
  j["straightforward"] = {{"rounds", cfg.straightforward.m},
                          {"weights", cfg.straightforward.weights}};
  nlohmann::json ops = nlohmann::json::array();
  for (const OperatorConfig& oc : cfg.cycle.operators) {
    if (oc.kind == "builtin") {
      ops.push_back({{"kind", "builtin"}, {"filter", oc.parameters}});
    } else if (oc.kind == "checkpoint") {
      ops.push_back({{"kind", "checkpoint"}, {"path", oc.parameters}, {"name", oc.name}});
    } else {
      ops.push_back({{"kind", "external"}, {"command", oc.parameters}, {"name", oc.name}});
    }
  }
  j["cycle"] = {{"cycles", cfg.cycle.cycles},
                {"case", cfg.cycle.kase},
                {"clamp_between_cycles", cfg.cycle.clamp_between_cycles},
                {"quantize_between_cycles", cfg.cycle.quantize_between_cycles},
                {"operators", ops}};
  j["codecs"] = cfg.codecs;
  j["metrics"] = cfg.metrics;
  j["toy"] = {{"components", cfg.toy.components},
              {"hidden", cfg.toy.hidden},
              {"depth", cfg.toy.depth},
              {"residual", cfg.toy.residual},
              {"train_count", cfg.toy.train_count},
              {"eval_count", cfg.toy.eval_count}};
  if (cfg.toy.corruption_sigma) {
    j["toy"]["corruption_sigma"] = *cfg.toy.corruption_sigma;
  } else {
    j["toy"]["corruption_sigma"] = nullptr;
  }
  return j;
}

// Full materialized configuration plus the toolkit version; re-parsing the
// echo reproduces the run.
inline std::string echo_config(const RunConfig& cfg) {
  nlohmann::json j = config_to_json(cfg);
  j["version"] = kVersion;
  return j.dump(2) + "\n";
}

// ---------------------------------------------------------------------------
// flag overrides (flags win over file values)

struct FlagOverrides {
  std::optional<std::string> dataset;
  std::optional<std::string> out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::size_t> cycles;
  std::optional<int> quality;
  std::optional<std::string> kase;
  std::optional<double> lambda_iden;
  std::optional<double> lambda_idem;
  std::optional<double> lambda_comp;
  std::optional<double> a;
};

inline void apply_overrides(RunConfig& cfg, const FlagOverrides& f) {
  if (f.dataset) cfg.dataset = *f.dataset;
  if (f.out) cfg.out = *f.out;
  if (f.seed) cfg.seed = *f.seed;
  if (f.workers) cfg.workers = *f.workers;
  if (f.cycles) cfg.cycle.cycles = *f.cycles;
  if (f.quality) cfg.codecs = {*f.quality};
  if (f.kase) {
    cycle_case_from_string(*f.kase);
    cfg.cycle.kase = *f.kase;
  }
  if (f.lambda_iden) cfg.loss.lambda_iden = *f.lambda_iden;
  if (f.lambda_idem) cfg.loss.lambda_idem = *f.lambda_idem;
  if (f.lambda_comp) cfg.loss.lambda_comp = *f.lambda_comp;
  if (f.a) cfg.loss.a = *f.a;
}

// ---------------------------------------------------------------------------
// materialization helpers

inline EnhanceOperator make_operator(const OperatorConfig& oc) {
  if (oc.kind == "builtin") return EnhanceOperator::builtin(oc.parameters);
  if (oc.kind == "checkpoint") return EnhanceOperator::checkpoint(oc.parameters, oc.name);
  if (oc.kind == "external") return EnhanceOperator::external(oc.parameters, oc.name);
  throw std::invalid_argument("unknown operator kind: " + oc.kind);
}

inline std::vector<CodecConfig> codec_pool_from(const RunConfig& cfg) {
  if (cfg.codecs.empty()) throw std::invalid_argument("at least one codec quality is required");
  std::vector<CodecConfig> pool;
  for (int q : cfg.codecs) pool.push_back(CodecConfig::for_quality(q));
  return pool;
}

inline CycleSpec cycle_spec_from(const RunConfig& cfg) {
  CycleSpec spec;
  spec.cycles = cfg.cycle.cycles;
  spec.kase = cycle_case_from_string(cfg.cycle.kase);
  spec.clamp_between_cycles = cfg.cycle.clamp_between_cycles;
  spec.quantize_between_cycles = cfg.cycle.quantize_between_cycles;
  spec.seed = cfg.seed;
  spec.metrics = cfg.metrics;
  for (const OperatorConfig& oc : cfg.cycle.operators) {
    spec.operators.push_back(make_operator(oc));
  }
  return spec;
}

inline std::size_t resolve_workers(std::size_t requested) {
  if (requested > 0) return requested;
  unsigned hc = std::thread::hardware_concurrency();
  return hc > 0 ? hc : 1;
}

// ---------------------------------------------------------------------------
// stored-run summary rendering

namespace detail {

inline std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
      std::size_t comma = line.find(',', start);
      if (comma == std::string::npos) {
        cells.push_back(line.substr(start));
        break;
      }
      cells.push_back(line.substr(start, comma - start));
      start = comma + 1;
    }
    rows.push_back(std::move(cells));
  }
  return rows;
}

}  // namespace detail

// Renders the degradation-index tables of a stored experiment directory:
// one fixed-width block per metric with a row per (codec, case).
inline std::string render_summary_tables(const std::string& run_dir) {
  std::vector<std::vector<std::string>> rows = detail::read_csv(run_dir + "/summary.csv");
  if (rows.empty() || rows[0] != std::vector<std::string>{"codec", "case", "metric", "images",
                                                          "mean_di", "di_of_mean_series"}) {
    throw std::runtime_error(run_dir + "/summary.csv: unexpected header");
  }
  std::vector<std::string> metrics;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (rows[i].size() != 6) {
      throw std::runtime_error(run_dir + "/summary.csv: malformed row " + std::to_string(i + 1));
    }
    const std::string& m = rows[i][2];
    bool seen = false;
    for (const std::string& k : metrics) seen = seen || k == m;
    if (!seen) metrics.push_back(m);
  }
  auto fixed = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%10.3f", v);
    return std::string(buf);
  };
  std::string out;
  for (const std::string& m : metrics) {
    out += "degradation index (" + m + ")\n";
    char header[128];
    std::snprintf(header, sizeof header, "  %-8s %-24s %8s %10s %14s\n", "codec", "case",
                  "images", "DI", "per-image DI");
    out += header;
    for (std::size_t i = 1; i < rows.size(); ++i) {
      if (rows[i][2] != m) continue;
      char line[160];
      // the reported DI is the one computed on the dataset-mean series
      std::snprintf(line, sizeof line, "  %-8s %-24s %8s %s   %s\n", rows[i][0].c_str(),
                    rows[i][1].c_str(), rows[i][3].c_str(), fixed(std::stod(rows[i][5])).c_str(),
                    fixed(std::stod(rows[i][4])).c_str());
      out += line;
    }
    out += "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------
// command dispatch

namespace detail {

inline std::vector<std::pair<std::string, ImageBuffer>> read_image_dir(const std::string& dir) {
  std::vector<std::filesystem::path> files;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::vector<std::pair<std::string, ImageBuffer>> images;
  for (const std::filesystem::path& p : files) {
    try {
      images.emplace_back(p.filename().string(), read_pnm_file(p.string()));
    } catch (const std::exception&) {
      // non-image files in a training directory are simply not training data
    }
  }
  if (images.empty()) throw std::runtime_error("no readable image in dataset: " + dir);
  return images;
}

// Aligned (compressed, raw) patch pairs from every image in the dataset,
// compressed at the first configured quality. Patch layout derives from the
// run seed and the image name.
inline void build_patch_pairs(const RunConfig& cfg, std::vector<ImageBuffer>& patches_c,
                              std::vector<ImageBuffer>& patches_r) {
  CodecConfig codec = codec_pool_from(cfg).front();
  for (const auto& [name, raw] : read_image_dir(cfg.dataset)) {
    ImageBuffer compressed = encode_decode(raw, codec);
    std::uint64_t layout_seed = Rng::substream(cfg.seed, "patches:" + name).next_u64();
    std::vector<ImageBuffer> pr =
        extract_patches(raw, cfg.train.patch_size, cfg.train.patch_size, layout_seed);
    std::vector<ImageBuffer> pc =
        extract_patches(compressed, cfg.train.patch_size, cfg.train.patch_size, layout_seed);
    for (std::size_t i = 0; i < pr.size(); ++i) {
      patches_r.push_back(pr[i]);
      patches_c.push_back(pc[i]);
    }
  }
  if (patches_r.empty()) {
    throw std::runtime_error("dataset images are smaller than the patch size");
  }
}

inline void run_train(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw std::invalid_argument("train needs a dataset directory");
  std::vector<ImageBuffer> patches_c, patches_r;
  build_patch_pairs(cfg, patches_c, patches_r);
  TrainConfig tc = cfg.train;
  tc.seed = cfg.seed;  // the run seed is the only seed
  train_loop(cfg.model, tc, cfg.straightforward, cfg.loss, patches_c, patches_r, cfg.out);
}

inline void run_cycle(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw std::invalid_argument("cycle needs an input image path");
  ImageBuffer raw = read_pnm_file(cfg.dataset);
  CycleSpec spec = cycle_spec_from(cfg);
  std::vector<CodecConfig> pool = codec_pool_from(cfg);
  if (spec.kase == CycleCase::kVaryMethodAndCodec) spec.codec_pool = pool;
  DegradationReport r = run_cycles(raw, pool.front(), spec);

  ExperimentReport rep;
  rep.dataset = cfg.dataset;
  rep.spec = spec;
  std::string label = spec.kase == CycleCase::kVaryMethodAndCodec
                          ? "mixed"
                          : "q" + std::to_string(pool.front().quality);
  std::string image = std::filesystem::path(cfg.dataset).filename().string();
  rep.runs.push_back(ExperimentReport::Run{label, image, r});
  rep.aggregates.push_back(aggregate_runs(label, spec, {r}));
  write_experiment_report(rep, cfg.out);
}

inline void run_experiment_cmd(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw std::invalid_argument("experiment needs a dataset directory");
  CycleSpec spec = cycle_spec_from(cfg);
  std::vector<EnhanceOperator> ops = spec.operators;
  ExperimentReport rep = run_experiment(cfg.dataset, ops, codec_pool_from(cfg), spec,
                                        cfg.metrics, resolve_workers(cfg.workers));
  write_experiment_report(rep, cfg.out);
}

inline void run_toy_cmd(const RunConfig& cfg) {
  ToyDistribution dist = ToyDistribution::standard_mixture(cfg.toy.components);
  ToyTrainConfig tc;
  tc.train = cfg.train;
  tc.train.seed = cfg.seed;
  tc.straightforward = cfg.straightforward;
  tc.hidden = cfg.toy.hidden;
  tc.depth = cfg.toy.depth;
  tc.residual = cfg.toy.residual;
  tc.corruption_sigma = cfg.toy.corruption_sigma;
  tc.train_count = cfg.toy.train_count;
  tc.eval_count = cfg.toy.eval_count;
  train_toy(dist, tc, cfg.loss, cfg.out);
}

inline std::string run_report(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw std::invalid_argument("report needs a stored-run directory");
  std::string tables = render_summary_tables(cfg.dataset);
  std::ofstream out(cfg.out + "/tables.txt", std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + cfg.out + "/tables.txt");
  out << tables;
  return tables;
}

}  // namespace detail

// Runs one configured command. The output directory must be new or empty;
// it receives the config echo (with seed and version) plus the command's
// artifacts, and is removed again if anything fails, so a directory that
// exists afterwards is always complete. Returns the text that belongs on
// stdout (non-empty for `report`).
inline std::string execute_run(const RunConfig& cfg) {
  bool known = false;
  for (const std::string& k : known_commands()) known = known || k == cfg.command;
  if (!known) {
    throw std::invalid_argument("unknown or missing command: '" + cfg.command + "'");
  }
  if (cfg.out.empty()) throw std::invalid_argument("output directory is required");
  std::filesystem::path out(cfg.out);
  if (std::filesystem::exists(out)) {
    if (!std::filesystem::is_directory(out)) {
      throw std::runtime_error("output path is not a directory: " + cfg.out);
    }
    if (!std::filesystem::is_empty(out)) {
      throw std::runtime_error("output directory is not empty: " + cfg.out);
    }
  }
  std::filesystem::create_directories(out);
  std::string stdout_text;
  try {
    {
      std::ofstream echo(cfg.out + "/config_echo.json", std::ios::trunc);
      if (!echo) throw std::runtime_error("cannot write " + cfg.out + "/config_echo.json");
      echo << echo_config(cfg);
    }
    if (cfg.command == "train") {
      detail::run_train(cfg);
    } else if (cfg.command == "cycle") {
      detail::run_cycle(cfg);
    } else if (cfg.command == "experiment") {
      detail::run_experiment_cmd(cfg);
    } else if (cfg.command == "toy") {
      detail::run_toy_cmd(cfg);
    } else {
      stdout_text = detail::run_report(cfg);
    }
  } catch (...) {
    std::error_code ec;
    std::filesystem::remove_all(out, ec);  // never leave partial artifacts
    throw;
  }
  return stdout_text;
}

}  // namespace idemqe
