#pragma once
// Multi-cycle enhancement evaluation. An image is compressed once, then
// repeatedly passed through enhancement operators; quality against the
// pristine original is tracked per cycle and summarized by the degradation
// index. Three draw disciplines are supported: repeating one method every
// cycle, varying the method per cycle, and varying both the method and the
// compression setting of the input.
//
// All randomness flows from the spec seed through named substreams, and
// dataset runs derive one seed per image from its file name, so results are
// independent of processing order and worker count.

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <idemqe/codec.hpp>
#include <idemqe/image.hpp>
#include <idemqe/metrics.hpp>
#include <idemqe/model.hpp>
#include <idemqe/rng.hpp>
#include <idemqe/training.hpp>

namespace idemqe {

// ---------------------------------------------------------------------------
// metric registry

inline double metric_value(const std::string& name, const ImageBuffer& candidate,
                           const ImageBuffer& reference) {
  if (name == "psnr") return psnr(candidate, reference);
  if (name == "ssim") return ssim(candidate, reference);
  if (name == "mse") return mse(candidate, reference);
  throw std::invalid_argument("unknown metric: " + name);
}

// +1 when higher is better, -1 when lower is better
inline int metric_orientation(const std::string& name) {
  if (name == "psnr" || name == "ssim") return +1;
  if (name == "mse") return -1;
  throw std::invalid_argument("unknown metric: " + name);
}

// ---------------------------------------------------------------------------
// enhancement operators

enum class OperatorKind : std::uint32_t {
  kBuiltin = 0,     // fixed filter identified by `parameters`
  kCheckpoint = 1,  // trained model loaded from the checkpoint at `parameters`
  kExternal = 2,    // shell command, PNM on stdin -> PNM on stdout, exit 0
};

inline const char* to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::kBuiltin: return "builtin";
    case OperatorKind::kCheckpoint: return "checkpoint";
    case OperatorKind::kExternal: return "external";
  }
  throw std::invalid_argument("unknown operator kind");
}

namespace detail {

inline void clamp_samples(ImageBuffer& img) {
  for (double& v : img.samples) v = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
}

// byte round trip: emulates crossing an 8-bit device boundary
inline void quantize_samples(ImageBuffer& img) {
  for (double& v : img.samples) v = sample_to_byte(v) / 255.0;
}

// 3x3 convolution with edge replication, one fixed kernel for all channels
inline ImageBuffer filter3x3(const ImageBuffer& img, const double (&k)[9]) {
  ImageBuffer out = ImageBuffer::make(img.height, img.width, img.channels);
  auto clampi = [](long v, long lo, long hi) { return v < lo ? lo : (v > hi ? hi : v); };
  long h = static_cast<long>(img.height), w = static_cast<long>(img.width);
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < img.channels; ++c) {
        double acc = 0.0;
        for (long dy = -1; dy <= 1; ++dy) {
          for (long dx = -1; dx <= 1; ++dx) {
            long yy = clampi(y + dy, 0, h - 1);
            long xx = clampi(x + dx, 0, w - 1);
            acc += k[(dy + 1) * 3 + (dx + 1)] * img.at(static_cast<std::size_t>(yy),
                                                       static_cast<std::size_t>(xx), c);
          }
        }
        out.at(static_cast<std::size_t>(y), static_cast<std::size_t>(x), c) = acc;
      }
    }
  }
  return out;
}

inline ImageBuffer apply_builtin(const std::string& filter, const ImageBuffer& img) {
  if (filter == "identity") return img;
  if (filter == "box_blur3") {
    static constexpr double k[9] = {1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9,
                                    1.0 / 9, 1.0 / 9, 1.0 / 9, 1.0 / 9};
    return filter3x3(img, k);
  }
  if (filter == "sharpen3") {
    static constexpr double k[9] = {0, -1, 0, -1, 5, -1, 0, -1, 0};
    return filter3x3(img, k);
  }
  throw std::invalid_argument("unknown built-in filter: " + filter);
}

// Run `command < in.pnm > out.pnm` through the shell and decode the result.
inline ImageBuffer apply_external(const std::string& name, const std::string& command,
                                  const ImageBuffer& img) {
  static std::atomic<std::uint64_t> counter{0};
  std::uint64_t id = counter.fetch_add(1);
  auto dir = std::filesystem::temp_directory_path();
  std::string stem = "idemqe-op-" + std::to_string(static_cast<unsigned long>(::getpid())) +
                     "-" + std::to_string(id);
  std::string in_path = (dir / (stem + "-in.pnm")).string();
  std::string out_path = (dir / (stem + "-out.pnm")).string();
  struct Cleanup {
    std::string a, b;
    ~Cleanup() {
      std::error_code ec;
      std::filesystem::remove(a, ec);
      std::filesystem::remove(b, ec);
    }
  } cleanup{in_path, out_path};

  write_pnm_file(img, in_path);
  std::string line = command + " < '" + in_path + "' > '" + out_path + "'";
  int status = std::system(line.c_str());
  if (status != 0) {
    throw std::runtime_error("external operator '" + name + "' exited with status " +
                             std::to_string(status));
  }
  try {
    return read_pnm_file(out_path);
  } catch (const std::exception& e) {
    throw std::runtime_error("external operator '" + name +
                             "' produced unreadable output: " + e.what());
  }
}

}  // namespace detail

// One enhancement method. Checkpoint operators carry their loaded model in a
// shared, read-only slot so copies handed to parallel workers share weights.
struct EnhanceOperator {
  std::string name;
  OperatorKind kind = OperatorKind::kBuiltin;
  // builtin: filter name; checkpoint: file path; external: shell command
  std::string parameters;
  std::shared_ptr<const std::pair<ModelSpec, ModelParams>> model;

  static EnhanceOperator builtin(const std::string& filter) {
    return EnhanceOperator{filter, OperatorKind::kBuiltin, filter, nullptr};
  }
  static EnhanceOperator checkpoint(const std::string& path, std::string label = "") {
    if (label.empty()) label = std::filesystem::path(path).stem().string();
    return EnhanceOperator{std::move(label), OperatorKind::kCheckpoint, path, nullptr};
  }
  static EnhanceOperator external(const std::string& command, std::string label) {
    return EnhanceOperator{std::move(label), OperatorKind::kExternal, command, nullptr};
  }

  // Materializes whatever the operator needs to run: loads the checkpoint,
  // or rejects an unknown built-in name up front.
  void ensure_loaded() {
    if (name.empty()) throw std::invalid_argument("operator name must not be empty");
    if (kind == OperatorKind::kBuiltin) {
      if (parameters != "identity" && parameters != "box_blur3" && parameters != "sharpen3") {
        throw std::invalid_argument("unknown built-in filter: " + parameters);
      }
    } else if (kind == OperatorKind::kCheckpoint && !model) {
      auto loaded = load_checkpoint(parameters);
      model = std::make_shared<const std::pair<ModelSpec, ModelParams>>(std::move(loaded));
    }
  }

  // Enhances one image. Output dimensions must match the input; range policy
  // (clamping, byte quantization) is owned by the cycle runner, not here.
  ImageBuffer apply(const ImageBuffer& img) const {
    ImageBuffer out;
    switch (kind) {
      case OperatorKind::kBuiltin:
        out = detail::apply_builtin(parameters, img);
        break;
      case OperatorKind::kCheckpoint: {
        if (!model) throw std::logic_error("checkpoint operator '" + name + "' not loaded");
        out = enhance_image(model->second, model->first, img, /*clamp=*/false);
        break;
      }
      case OperatorKind::kExternal:
        out = detail::apply_external(name, parameters, img);
        break;
      default:
        throw std::invalid_argument("unknown operator kind");
    }
    if (out.height != img.height || out.width != img.width || out.channels != img.channels) {
      throw std::runtime_error(
          "operator '" + name + "' changed image dimensions: " + std::to_string(img.height) +
          "x" + std::to_string(img.width) + "x" + std::to_string(img.channels) + " -> " +
          std::to_string(out.height) + "x" + std::to_string(out.width) + "x" +
          std::to_string(out.channels));
    }
    return out;
  }
};

// Operators that lose information under cycling; used by directional tests
// and demos. Blur and sharpen partially undo each other, which is exactly
// what makes mixed-method cycling milder than repeating one method.
inline std::vector<EnhanceOperator> degrading_pool() {
  return {EnhanceOperator::builtin("box_blur3"), EnhanceOperator::builtin("sharpen3")};
}

// ---------------------------------------------------------------------------
// cycle configuration

enum class CycleCase : std::uint32_t {
  kSameMethod = 0,          // one method drawn per image, repeated every cycle
  kVaryMethod = 1,          // method re-drawn per cycle, compression fixed
  kVaryMethodAndCodec = 2,  // method per cycle and compression drawn per image
};

inline const char* to_string(CycleCase c) {
  switch (c) {
    case CycleCase::kSameMethod: return "same_method";
    case CycleCase::kVaryMethod: return "vary_method";
    case CycleCase::kVaryMethodAndCodec: return "vary_method_and_codec";
  }
  throw std::invalid_argument("unknown cycle case");
}

inline CycleCase cycle_case_from_string(const std::string& s) {
  if (s == "same_method") return CycleCase::kSameMethod;
  if (s == "vary_method") return CycleCase::kVaryMethod;
  if (s == "vary_method_and_codec") return CycleCase::kVaryMethodAndCodec;
  throw std::invalid_argument("unknown cycle case: " + s);
}

struct CycleSpec {
  std::size_t cycles = 5;
  CycleCase kase = CycleCase::kSameMethod;
  std::vector<EnhanceOperator> operators;
  std::vector<CodecConfig> codec_pool;  // draw pool; consulted only when the codec varies
  std::uint64_t seed = 0;
  // Real pipelines hand 8-bit images between devices: clamping is on by
  // default; byte quantization is opt-in so the default run isolates the
  // operator itself.
  bool clamp_between_cycles = true;
  bool quantize_between_cycles = false;
  std::vector<std::string> metrics = {"psnr", "ssim"};

  void validate() const {
    if (cycles < 1) throw std::invalid_argument("cycles must be >= 1");
    std::size_t min_ops = kase == CycleCase::kSameMethod ? 1 : 2;
    if (operators.size() < min_ops) {
      throw std::invalid_argument(std::string("case ") + to_string(kase) + " needs at least " +
                                  std::to_string(min_ops) + " operators, got " +
                                  std::to_string(operators.size()));
    }
    for (std::size_t i = 0; i < operators.size(); ++i) {
      if (operators[i].name.empty()) throw std::invalid_argument("operator name must not be empty");
      for (std::size_t j = i + 1; j < operators.size(); ++j) {
        if (operators[i].name == operators[j].name) {
          throw std::invalid_argument("duplicate operator name: " + operators[i].name);
        }
      }
    }
    if (kase == CycleCase::kVaryMethodAndCodec && codec_pool.size() < 2) {
      throw std::invalid_argument("vary_method_and_codec needs a codec pool of at least 2, got " +
                                  std::to_string(codec_pool.size()));
    }
    if (metrics.empty()) throw std::invalid_argument("at least one metric is required");
    for (const std::string& m : metrics) metric_orientation(m);  // rejects unknown names
  }
};

// ---------------------------------------------------------------------------
// reports

struct CycleTraceEntry {
  std::size_t cycle = 0;  // 1-based
  std::string operator_name;
  int codec_quality = 0;  // quality of the compression the cycle's input descends from
};

struct DegradationReport {
  // config echo
  std::size_t cycles = 0;
  CycleCase kase = CycleCase::kSameMethod;
  std::uint64_t seed = 0;
  bool clamp_between_cycles = true;
  bool quantize_between_cycles = false;
  std::string replacement_rule;  // "without_replacement" | "with_replacement" | "single_method"
  int codec_quality = 0;         // quality used for the cycle-0 round trip

  // one series per metric, values over cycles 0..n (cycle 0 = compressed
  // input, no enhancement); truncated runs carry fewer values
  std::vector<MetricSeries> series;
  // per-metric degradation index over the enhanced cycles 1..n; NaN when a
  // truncated run leaves fewer than two enhanced cycles
  std::vector<double> di;
  std::vector<CycleTraceEntry> trace;  // one entry per completed enhancement cycle

  bool truncated = false;
  std::string error;  // why the run stopped early, empty otherwise
};

// ---------------------------------------------------------------------------
// single-image cycle run

namespace detail {

// Operator indices for cycles 1..n under the case's draw discipline. When
// every cycle draws its own method, draws are without replacement whenever
// the pool is at least as large as the cycle count, otherwise with
// replacement; the applied rule is reported alongside the schedule.
inline std::vector<std::size_t> draw_schedule(const CycleSpec& spec, Rng& rng,
                                              std::string& rule) {
  std::size_t n = spec.cycles;
  std::size_t pool = spec.operators.size();
  std::vector<std::size_t> schedule(n);
  if (spec.kase == CycleCase::kSameMethod) {
    std::size_t pick = rng.index(pool);
    for (std::size_t k = 0; k < n; ++k) schedule[k] = pick;
    rule = "single_method";
    return schedule;
  }
  if (pool >= n) {
    std::vector<std::size_t> order(pool);
    for (std::size_t i = 0; i < pool; ++i) order[i] = i;
    rng.shuffle(order);
    for (std::size_t k = 0; k < n; ++k) schedule[k] = order[k];
    rule = "without_replacement";
  } else {
    for (std::size_t k = 0; k < n; ++k) schedule[k] = rng.index(pool);
    rule = "with_replacement";
  }
  return schedule;
}

}  // namespace detail

// Runs the full protocol on one image: compress once, enhance for `cycles`
// rounds, score every round against the pristine original. An operator
// failure at cycle k yields a report truncated at cycle k-1 whose `error`
// names the culprit.
inline DegradationReport run_cycles(const ImageBuffer& raw, const CodecConfig& codec,
                                    const CycleSpec& spec) {
  spec.validate();
  std::vector<EnhanceOperator> pool = spec.operators;
  for (EnhanceOperator& op : pool) op.ensure_loaded();

  // the varied-codec case replaces the base compression with a drawn one
  CodecConfig effective = codec;
  if (spec.kase == CycleCase::kVaryMethodAndCodec) {
    Rng codec_rng = Rng::substream(spec.seed, "codec-draw");
    effective = spec.codec_pool[codec_rng.index(spec.codec_pool.size())];
  }

  DegradationReport report;
  report.cycles = spec.cycles;
  report.kase = spec.kase;
  report.seed = spec.seed;
  report.clamp_between_cycles = spec.clamp_between_cycles;
  report.quantize_between_cycles = spec.quantize_between_cycles;
  report.codec_quality = effective.quality;

  Rng draw_rng = Rng::substream(spec.seed, "operator-draws");
  std::vector<std::size_t> schedule = detail::draw_schedule(spec, draw_rng,
                                                            report.replacement_rule);

  ImageBuffer current = encode_decode(raw, effective);
  for (const std::string& m : spec.metrics) {
    report.series.push_back(MetricSeries{m, metric_orientation(m),
                                         {metric_value(m, current, raw)}});
  }

  for (std::size_t k = 1; k <= spec.cycles; ++k) {
    const EnhanceOperator& op = pool[schedule[k - 1]];
    ImageBuffer next;
    try {
      next = op.apply(current);
    } catch (const std::exception& e) {
      report.truncated = true;
      report.error = "cycle " + std::to_string(k) + ": " + e.what();
      break;
    }
    if (spec.clamp_between_cycles) detail::clamp_samples(next);
    if (spec.quantize_between_cycles) detail::quantize_samples(next);
    current = std::move(next);
    report.trace.push_back(CycleTraceEntry{k, op.name, effective.quality});
    for (MetricSeries& s : report.series) {
      s.values.push_back(metric_value(s.name, current, raw));
    }
  }

  // degradation index over the enhanced cycles only (cycle 0 excluded)
  for (const MetricSeries& s : report.series) {
    if (s.values.size() < 3) {  // cycle 0 plus fewer than two enhanced cycles
      report.di.push_back(std::numeric_limits<double>::quiet_NaN());
      continue;
    }
    MetricSeries enhanced{s.name, s.orientation,
                          std::vector<double>(s.values.begin() + 1, s.values.end())};
    report.di.push_back(degradation_index(enhanced));
  }
  return report;
}

// ---------------------------------------------------------------------------
// dataset experiment

struct ExperimentAggregate {
  std::string codec_label;  // "q<quality>", or "mixed" when compression is drawn per image
  std::string case_label;
  // element-wise mean of the per-image series (non-truncated runs only)
  std::vector<MetricSeries> mean_series;
  // mean of the per-image degradation indices, kept as a cross-check
  std::vector<double> mean_di;
  // degradation index computed on the dataset-mean series; this is the
  // toolkit's reported DI (the two averaging orders differ, so the choice
  // is fixed here and surfaced in every report)
  std::vector<double> di_of_mean;
  std::size_t images = 0;  // runs contributing to the means
};

struct ExperimentReport {
  std::string dataset;
  CycleSpec spec;                     // config echo (pools, metrics, flags, seed)
  std::vector<std::string> skipped;   // "<file>: <reason>" log entries
  struct Run {
    std::string codec_label;
    std::string image;  // file name within the dataset
    DegradationReport report;
  };
  std::vector<Run> runs;  // ordered by (codec as given, image name)
  std::vector<ExperimentAggregate> aggregates;
};

namespace detail {

// index-addressed parallel map; output order never depends on scheduling
template <typename Job>
inline void parallel_for(std::size_t count, std::size_t workers, Job&& job) {
  if (workers <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::exception_ptr> errors(count);
  auto body = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  std::vector<std::thread> threads;
  std::size_t spawn = workers < count ? workers : count;
  threads.reserve(spawn);
  for (std::size_t t = 0; t < spawn; ++t) threads.emplace_back(body);
  for (std::thread& t : threads) t.join();
  for (std::size_t i = 0; i < count; ++i) {
    if (errors[i]) std::rethrow_exception(errors[i]);
  }
}

inline ExperimentAggregate aggregate_runs(const std::string& codec_label,
                                          const CycleSpec& spec,
                                          const std::vector<DegradationReport>& reports) {
  ExperimentAggregate agg;
  agg.codec_label = codec_label;
  agg.case_label = to_string(spec.kase);
  std::size_t full = spec.cycles + 1;
  for (const DegradationReport& r : reports) {
    if (!r.truncated && r.series.front().values.size() == full) agg.images += 1;
  }
  for (std::size_t m = 0; m < spec.metrics.size(); ++m) {
    MetricSeries mean{spec.metrics[m], metric_orientation(spec.metrics[m]),
                      std::vector<double>(full, 0.0)};
    double di_sum = 0.0;
    if (agg.images > 0) {
      // plain sequential sums keep the reduction bit-reproducible
      for (std::size_t k = 0; k < full; ++k) {
        double acc = 0.0;
        for (const DegradationReport& r : reports) {
          if (r.truncated || r.series.front().values.size() != full) continue;
          acc += r.series[m].values[k];
        }
        mean.values[k] = acc / static_cast<double>(agg.images);
      }
      for (const DegradationReport& r : reports) {
        if (r.truncated || r.series.front().values.size() != full) continue;
        di_sum += r.di[m];
      }
    }
    agg.mean_series.push_back(mean);
    if (agg.images == 0) {
      agg.mean_di.push_back(std::numeric_limits<double>::quiet_NaN());
      agg.di_of_mean.push_back(std::numeric_limits<double>::quiet_NaN());
    } else {
      agg.mean_di.push_back(di_sum / static_cast<double>(agg.images));
      MetricSeries enhanced{mean.name, mean.orientation,
                            std::vector<double>(mean.values.begin() + 1, mean.values.end())};
      agg.di_of_mean.push_back(degradation_index(enhanced));
    }
  }
  return agg;
}

}  // namespace detail

// Runs the cycle protocol over every readable image in a directory, once per
// base compression setting (or once total when compression is drawn per
// image). Each image derives its own seed from the experiment seed and its
// file name, so per-image work can fan out to `workers` threads without
// changing any result. Unreadable files are skipped and logged; a dataset
// with no readable image is rejected.
inline ExperimentReport run_experiment(const std::string& dataset_dir,
                                       const std::vector<EnhanceOperator>& operators,
                                       const std::vector<CodecConfig>& codecs,
                                       const CycleSpec& base_spec,
                                       const std::vector<std::string>& metrics,
                                       std::size_t workers = 1) {
  if (codecs.empty()) throw std::invalid_argument("at least one codec is required");

  CycleSpec spec = base_spec;
  spec.operators = operators;
  spec.metrics = metrics;
  if (spec.kase == CycleCase::kVaryMethodAndCodec) spec.codec_pool = codecs;
  spec.validate();
  for (EnhanceOperator& op : spec.operators) op.ensure_loaded();

  ExperimentReport report;
  report.dataset = dataset_dir;
  report.spec = spec;

  // deterministic image order: sorted by file name
  std::vector<std::pair<std::string, ImageBuffer>> images;
  {
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dataset_dir)) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
    for (const std::filesystem::path& p : files) {
      try {
        images.emplace_back(p.filename().string(), read_pnm_file(p.string()));
      } catch (const std::exception& e) {
        report.skipped.push_back(p.filename().string() + ": " + e.what());
      }
    }
  }
  if (images.empty()) {
    throw std::runtime_error("no readable image in dataset: " + dataset_dir);
  }

  // when compression is drawn per image the codec list is the pool, not an
  // iteration axis
  bool drawn_codec = spec.kase == CycleCase::kVaryMethodAndCodec;
  std::size_t codec_runs = drawn_codec ? 1 : codecs.size();

  for (std::size_t c = 0; c < codec_runs; ++c) {
    std::string label = drawn_codec ? "mixed" : "q" + std::to_string(codecs[c].quality);
    std::vector<DegradationReport> results(images.size());
    detail::parallel_for(images.size(), workers, [&](std::size_t i) {
      CycleSpec per_image = spec;
      per_image.seed = Rng::substream(spec.seed, images[i].first).next_u64();
      results[i] = run_cycles(images[i].second, codecs[c], per_image);
    });
    for (std::size_t i = 0; i < images.size(); ++i) {
      report.runs.push_back(ExperimentReport::Run{label, images[i].first, results[i]});
    }
    report.aggregates.push_back(detail::aggregate_runs(label, spec, results));
  }
  return report;
}

// ---------------------------------------------------------------------------
// report serialization

namespace detail {

// one row per (image, cycle, metric); cycle 0 is the bare compressed input
inline void write_cycles_csv(const std::string& path, const ExperimentReport& rep) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "codec,image,cycle,metric,value\n";
  for (const ExperimentReport::Run& run : rep.runs) {
    for (const MetricSeries& s : run.report.series) {
      for (std::size_t k = 0; k < s.values.size(); ++k) {
        out << run.codec_label << ',' << run.image << ',' << k << ',' << s.name << ','
            << fmt_double(s.values[k]) << '\n';
      }
    }
  }
}

// one row per completed enhancement cycle: which operator ran on which input
inline void write_trace_csv(const std::string& path, const ExperimentReport& rep) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "codec,image,cycle,operator,codec_quality\n";
  for (const ExperimentReport::Run& run : rep.runs) {
    for (const CycleTraceEntry& t : run.report.trace) {
      out << run.codec_label << ',' << run.image << ',' << t.cycle << ',' << t.operator_name
          << ',' << t.codec_quality << '\n';
    }
  }
}

// one row per (codec, case, metric) with the dataset-level indices
inline void write_summary_csv(const std::string& path, const ExperimentReport& rep) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << "codec,case,metric,images,mean_di,di_of_mean_series\n";
  for (const ExperimentAggregate& agg : rep.aggregates) {
    for (std::size_t m = 0; m < agg.mean_series.size(); ++m) {
      out << agg.codec_label << ',' << agg.case_label << ',' << agg.mean_series[m].name << ','
          << agg.images << ',' << fmt_double(agg.mean_di[m]) << ','
          << fmt_double(agg.di_of_mean[m]) << '\n';
    }
  }
}

}  // namespace detail

// Human-readable experiment summary: configuration header, skip log, and one
// block per (codec, metric) with the mean per-cycle values and both indices.
inline std::string render_table(const ExperimentReport& rep) {
  auto num = [](double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return std::string(buf);
  };
  std::string out;
  out += "dataset: " + rep.dataset + "\n";
  out += "case: " + std::string(to_string(rep.spec.kase)) +
         "  cycles: " + std::to_string(rep.spec.cycles) +
         "  seed: " + std::to_string(rep.spec.seed) + "\n";
  out += "clamp_between_cycles: " + std::string(rep.spec.clamp_between_cycles ? "on" : "off") +
         "  quantize_between_cycles: " +
         std::string(rep.spec.quantize_between_cycles ? "on" : "off") + "\n";
  out += "operators:";
  for (const EnhanceOperator& op : rep.spec.operators) out += " " + op.name;
  out += "\n";
  if (!rep.runs.empty()) {
    out += "draw rule: " + rep.runs.front().report.replacement_rule + "\n";
  }
  for (const std::string& entry : rep.skipped) out += "skipped: " + entry + "\n";
  for (const ExperimentAggregate& agg : rep.aggregates) {
    out += "\n[" + agg.codec_label + " / " + agg.case_label + "]  images: " +
           std::to_string(agg.images) + "\n";
    for (std::size_t m = 0; m < agg.mean_series.size(); ++m) {
      const MetricSeries& s = agg.mean_series[m];
      out += "  " + s.name + " mean by cycle:";
      for (double v : s.values) out += " " + num(v);
      out += "\n  " + s.name + " DI (of mean series): " + num(agg.di_of_mean[m]) +
             "  per-image mean: " + num(agg.mean_di[m]) + "\n";
    }
  }
  return out;
}

// Writes the full artifact set for one experiment into a directory:
// cycles.csv (per image/cycle/metric), trace.csv (per-cycle operator draws),
// summary.csv (per codec/case/metric indices), and report.txt.
inline void write_experiment_report(const ExperimentReport& rep, const std::string& out_dir) {
  std::filesystem::create_directories(out_dir);
  detail::write_cycles_csv(out_dir + "/cycles.csv", rep);
  detail::write_trace_csv(out_dir + "/trace.csv", rep);
  detail::write_summary_csv(out_dir + "/summary.csv", rep);
  std::ofstream txt(out_dir + "/report.txt", std::ios::trunc);
  if (!txt) throw std::runtime_error("cannot write " + out_dir + "/report.txt");
  txt << render_table(rep);
}

}  // namespace idemqe
