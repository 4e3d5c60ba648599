// SPDX-License-Identifier: Apache-2.0
#include "sepipe/cli.h"

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <mutex>
#include <random>
#include <set>

#include "sepipe/bands.h"
#include "sepipe/engine.h"
#include "sepipe/errors.h"
#include "sepipe/metrics.h"
#include "sepipe/mixture.h"
#include "sepipe/weights.h"

namespace sepipe {
namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

constexpr int kExitOk = 0;
constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

using ConfigMap = std::map<std::string, std::string>;

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

// key=value per line; '#' starts a comment. Underscores in keys are accepted
// in place of dashes.
ConfigMap read_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError(fmt::format("cannot read config file {}", path.string()));
  ConfigMap cfg;
  std::string line;
  for (std::size_t line_no = 1; std::getline(in, line); ++line_no) {
    const auto hash = line.find('#');
    const std::string body = trim(std::string_view(line).substr(0, hash));
    if (body.empty()) continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      throw UsageError(fmt::format("{}:{}: expected key=value", path.string(), line_no));
    }
    std::string key = trim(std::string_view(body).substr(0, eq));
    std::replace(key.begin(), key.end(), '_', '-');
    cfg[key] = trim(std::string_view(body).substr(eq + 1));
  }
  return cfg;
}

// Fills options of `sub` that were not given on the command line.
void apply_config(CLI::App& sub, const ConfigMap& cfg) {
  for (const auto& [key, value] : cfg) {
    CLI::Option* opt = sub.get_option_no_throw("--" + key);
    if (opt == nullptr || opt->count() > 0) continue;
    opt->add_result(value);
    opt->run_callback();
  }
}

void check_config_keys(CLI::App& app, const ConfigMap& cfg) {
  for (const auto& [key, value] : cfg) {
    bool known = false;
    for (CLI::App* sub : app.get_subcommands({})) {
      known = known || sub->get_option_no_throw("--" + key) != nullptr;
    }
    if (!known) throw UsageError(fmt::format("unknown config key '{}'", key));
  }
}

ExecPolicy parse_policy(const std::string& s) {
  if (s == "serial") return ExecPolicy::kSerial;
  if (s == "parallel") return ExecPolicy::kParallel;
  throw UsageError(fmt::format("unknown kernel policy '{}' (expected serial or parallel)", s));
}

SampleFormat parse_format(const std::string& s) {
  if (s == "float32") return SampleFormat::kFloat32;
  if (s == "pcm16") return SampleFormat::kPcm16;
  throw UsageError(fmt::format("unknown sample format '{}' (expected float32 or pcm16)", s));
}

ModelKind parse_kind(const std::string& s) {
  if (s == "gru") return ModelKind::kGru;
  if (s == "unet") return ModelKind::kUnet;
  throw UsageError(fmt::format("unknown model kind '{}' (expected gru or unet)", s));
}

struct EngineArgs {
  std::string engine = "baseline";
  std::string weights;
  std::optional<double> max_atten_db;
  bool dd_previous_gamma = false;
  SuppressorConfig suppressor;
  std::string kernels = "serial";

  void add_to(CLI::App& sub) {
    sub.add_option("--engine", engine, "baseline, gru or unet")->capture_default_str();
    sub.add_option("--weights", weights, "weight file for neural engines");
    sub.add_option("--max-atten-db", max_atten_db,
                   "attenuation limit (default 12 baseline, 15 neural)");
    sub.add_flag("--dd-previous-gamma", dd_previous_gamma,
                 "baseline: previous-frame a posteriori SNR in the decision-directed term");
    sub.add_option("--alpha-dd", suppressor.alpha_dd, "baseline: decision-directed weight")
        ->capture_default_str();
    sub.add_option("--alpha-noise", suppressor.alpha_noise, "baseline: noise update in noise")
        ->capture_default_str();
    sub.add_option("--alpha-speech", suppressor.alpha_speech, "baseline: noise update in speech")
        ->capture_default_str();
    sub.add_option("--minstat-window-s", suppressor.minstat_window_s,
                   "baseline: minimum-statistics window")
        ->capture_default_str();
    sub.add_option("--kernels", kernels, "serial or parallel")->capture_default_str();
  }

  EngineConfig config() const {
    EngineConfig c;
    c.kind = parse_engine(engine);
    c.max_atten_db = max_atten_db;
    c.suppressor = suppressor;
    c.suppressor.dd_previous_gamma = dd_previous_gamma;
    c.policy = parse_policy(kernels);
    return c;
  }
};

std::optional<NeuralModel> load_model(const EngineConfig& config, const std::string& weights) {
  if (config.kind == EngineKind::kBaseline) return std::nullopt;
  if (weights.empty()) {
    throw UsageError(fmt::format("engine '{}' needs --weights", to_string(config.kind)));
  }
  return load_weights(weights);
}

// ---------------------------------------------------------------------------

struct EnhanceArgs {
  EngineArgs engine;
  std::vector<std::string> inputs;
  std::string output_dir;
  std::string format = "float32";
  int jobs = 1;
};

int cmd_enhance(const EnhanceArgs& a, std::ostream& err) {
  const EngineConfig config = a.engine.config();
  const SampleFormat format = parse_format(a.format);
  if (a.jobs < 1) throw UsageError("--jobs must be at least 1");
  const std::optional<NeuralModel> model = load_model(config, a.engine.weights);
  { EnhanceStream probe(config, model); }  // reject bad engine setups before touching files

  std::set<std::string> names;
  for (const auto& in : a.inputs) {
    if (!names.insert(fs::path(in).filename().string()).second) {
      throw UsageError(fmt::format("two inputs share the file name {}",
                                   fs::path(in).filename().string()));
    }
  }
  fs::create_directories(a.output_dir);

  std::mutex log_mutex;
  int failures = 0;
#pragma omp parallel for schedule(dynamic) num_threads(a.jobs) reduction(+ : failures)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(a.inputs.size()); ++i) {
    const fs::path in = a.inputs[static_cast<std::size_t>(i)];
    const fs::path out = fs::path(a.output_dir) / in.filename();
    std::string line;
    try {
      const AudioBuffer x = read_wav(in);
      const auto start = Clock::now();
      const AudioBuffer y = enhance(x, config, model);
      const double wall = std::chrono::duration<double>(Clock::now() - start).count();
      write_wav(out, y, format);
      line = fmt::format("{} -> {}: {:.2f} s audio, RTF {:.1f}", in.string(), out.string(),
                         x.duration_s(), wall > 0.0 ? x.duration_s() / wall : INFINITY);
    } catch (const std::exception& e) {
      line = fmt::format("error: {}: {}", in.string(), e.what());
      ++failures;
    }
    const std::lock_guard lock(log_mutex);
    err << line << '\n';
  }
  return failures == 0 ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------

struct SimulateArgs {
  std::string speech_dir;
  std::string noise_dir;
  std::string ir_dir;
  std::string out_dir;
  std::size_t count = 10;
  MixSpec spec;
};

int cmd_simulate(const SimulateArgs& a, std::ostream& out, std::ostream& err) {
  std::optional<fs::path> irs;
  if (!a.ir_dir.empty()) irs = a.ir_dir;
  const TestSetResult r = make_test_set(a.speech_dir, a.noise_dir, a.spec, a.count, a.out_dir, irs);
  for (const auto& e : r.errors) err << fmt::format("error: {}: {}\n", e.id, e.message);
  out << (fs::path(a.out_dir) / "manifest.tsv").string() << '\n';
  err << fmt::format("generated {} of {} items\n", r.rows.size(), a.count);
  return r.errors.empty() ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------

struct EvalArgs {
  std::string manifest;
  std::string enhanced_dir;
  std::string report;
  std::string summary;
};

int cmd_eval(const EvalArgs& a, std::ostream& out, std::ostream& err) {
  const MetricReport r = evaluate_set(a.manifest, a.enhanced_dir);
  const fs::path report = a.report.empty() ? fs::path(a.enhanced_dir) / "report.tsv" : fs::path(a.report);
  const fs::path summary =
      a.summary.empty() ? fs::path(a.enhanced_dir) / "summary.json" : fs::path(a.summary);
  write_report_tsv(report, r);
  write_report_json(summary, r);
  for (const auto& item : r.items) {
    if (item.error) err << fmt::format("error: {}: {}\n", item.id, *item.error);
  }
  out << fmt::format("items {} failed {} mean_sdr_db {:.4f} mean_stoi {:.4f}\n", r.valid, r.failed,
                     r.mean_sdr_db, r.mean_stoi);
  return r.failed == 0 ? kExitOk : kExitFailure;
}

// ---------------------------------------------------------------------------

struct BenchArgs {
  EngineArgs engine;
  double duration_s = 10.0;
  std::uint64_t seed = 0;
};

double percentile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size()))) - 1;
  return v[std::min(idx, v.size() - 1)];
}

int cmd_bench(const BenchArgs& a, std::ostream& out, std::ostream& err) {
  if (!(a.duration_s > 0.0) || !std::isfinite(a.duration_s)) {
    throw UsageError("--duration must be positive");
  }
  const EngineConfig config = a.engine.config();
  std::optional<NeuralModel> model;
  if (config.kind != EngineKind::kBaseline) {
    if (a.engine.weights.empty()) {
      const ModelKind kind = config.kind == EngineKind::kGru ? ModelKind::kGru : ModelKind::kUnet;
      err << fmt::format("no --weights given; using random {} weights (seed 0)\n", to_string(kind));
      model = make_model(random_weights(kind, 0));
    } else {
      model = load_weights(a.engine.weights);
    }
  }
  EnhanceStream stream(config, model);

  const auto samples = static_cast<std::size_t>(std::llround(a.duration_s * 32000.0));
  const std::size_t blocks = std::max<std::size_t>(1, samples / stream.hop());
  std::mt19937_64 rng(a.seed);
  std::normal_distribution<double> gauss(0.0, 0.05);
  std::vector<double> input(blocks * stream.hop());
  for (double& v : input) v = gauss(rng);

  std::vector<double> frame_us(blocks);
  const auto start = Clock::now();
  for (std::size_t b = 0; b < blocks; ++b) {
    const auto t0 = Clock::now();
    stream.process_block(std::span<const double>(input).subspan(b * stream.hop(), stream.hop()));
    frame_us[b] = std::chrono::duration<double, std::micro>(Clock::now() - t0).count();
  }
  const double wall = std::chrono::duration<double>(Clock::now() - start).count();
  const double audio = static_cast<double>(input.size()) / 32000.0;

  double mean = 0.0;
  for (double t : frame_us) mean += t;
  mean /= static_cast<double>(blocks);

  nlohmann::json j;
  j["engine"] = to_string(config.kind);
  j["kernels"] = a.engine.kernels;
  j["audio_seconds"] = audio;
  j["wall_seconds"] = wall;
  j["real_time_factor"] = wall > 0.0 ? audio / wall : 0.0;
  j["frames"] = blocks;
  j["frame_latency_us"] = {{"mean", mean},
                           {"p50", percentile(frame_us, 0.50)},
                           {"p95", percentile(frame_us, 0.95)},
                           {"max", *std::max_element(frame_us.begin(), frame_us.end())}};
  if (model) {
    j["params"] = count_params(*model);
    j["macs_per_second"] = count_macs_per_second(*model);
  }
  out << j.dump(2) << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------

int cmd_inspect_weights(const std::string& path, std::ostream& out, std::ostream& err) {
  const WeightFile file = read_weight_file(path);
  nlohmann::json j;
  j["kind"] = to_string(file.kind);
  j["version"] = kWeightFileVersion;
  std::size_t total = 0;
  auto& tensors = j["tensors"] = nlohmann::json::array();
  for (const Tensor& t : file.tensors) {
    tensors.push_back({{"name", t.name}, {"dims", t.dims}, {"elements", t.element_count()}});
    total += t.element_count();
  }
  j["parameters"] = total;
  int status = kExitOk;
  try {
    validate_schema(file);
    j["schema"] = "ok";
    j["macs_per_second"] = count_macs_per_second(file.kind);
  } catch (const SchemaError& e) {
    j["schema"] = e.what();
    err << "error: " << e.what() << '\n';
    status = kExitFailure;
  }
  out << j.dump(2) << '\n';
  return status;
}

int cmd_inspect_layout(std::ostream& out) {
  const WindowPair wp = design_windows();
  const BandLayout& layout = make_layout();
  out << fmt::format("analysis {}  synthesis {}  hop {}  fft {}  latency {} samples\n",
                     wp.analysis.size(), wp.synthesis.size(), wp.hop, wp.fft_len,
                     latency_samples(wp));
  out << "feature\tfirst_bin\tlast_bin\twidth\n";
  for (std::size_t f = 0; f < layout.feature_count(); ++f) {
    const auto [first, last] = layout.bins_of(f);
    out << fmt::format("{}\t{}\t{}\t{}\n", f, first, last - 1, last - first);
  }
  return kExitOk;
}

struct InitWeightsArgs {
  std::string kind;
  std::string output;
  std::uint64_t seed = 0;
  double scale = 1.0;
  bool zero = false;
};

int cmd_init_weights(const InitWeightsArgs& a, std::ostream& out) {
  const ModelKind kind = parse_kind(a.kind);
  write_weight_file(a.output, a.zero ? zero_weights(kind) : random_weights(kind, a.seed, a.scale));
  out << a.output << '\n';
  return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Low-latency single-channel speech enhancement", "sepipe"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "key=value defaults, overridden by flags");

  EnhanceArgs enhance_args;
  auto* enhance_cmd = app.add_subcommand("enhance", "enhance WAV files");
  enhance_args.engine.add_to(*enhance_cmd);
  enhance_cmd->add_option("inputs", enhance_args.inputs, "input WAV files")->required();
  enhance_cmd->add_option("-o,--output-dir", enhance_args.output_dir, "output directory")->required();
  enhance_cmd->add_option("--format", enhance_args.format, "float32 or pcm16")->capture_default_str();
  enhance_cmd->add_option("--jobs", enhance_args.jobs, "files processed concurrently")
      ->capture_default_str();

  SimulateArgs sim_args;
  auto* sim_cmd = app.add_subcommand("simulate", "generate a simulated test set");
  sim_cmd->add_option("--speech-dir", sim_args.speech_dir)->required();
  sim_cmd->add_option("--noise-dir", sim_args.noise_dir)->required();
  sim_cmd->add_option("--ir-dir", sim_args.ir_dir, "channel impulse responses");
  sim_cmd->add_option("-o,--out-dir", sim_args.out_dir)->required();
  sim_cmd->add_option("--count", sim_args.count)->capture_default_str();
  sim_cmd->add_option("--seed", sim_args.spec.seed)->capture_default_str();
  sim_cmd->add_option("--snr-min", sim_args.spec.snr_min_db)->capture_default_str();
  sim_cmd->add_option("--snr-max", sim_args.spec.snr_max_db)->capture_default_str();
  sim_cmd->add_option("--hp-cutoff", sim_args.spec.hp_cutoff_hz)->capture_default_str();
  sim_cmd->add_option("--level-min", sim_args.spec.level_min_db)->capture_default_str();
  sim_cmd->add_option("--level-max", sim_args.spec.level_max_db)->capture_default_str();

  EvalArgs eval_args;
  auto* eval_cmd = app.add_subcommand("eval", "score enhanced files against references");
  eval_cmd->add_option("--manifest", eval_args.manifest)->required();
  eval_cmd->add_option("--enhanced-dir", eval_args.enhanced_dir)->required();
  eval_cmd->add_option("--report", eval_args.report, "TSV report (default <enhanced-dir>/report.tsv)");
  eval_cmd->add_option("--summary", eval_args.summary,
                       "JSON summary (default <enhanced-dir>/summary.json)");

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "measure streaming throughput");
  bench_args.engine.add_to(*bench_cmd);
  bench_cmd->add_option("--duration", bench_args.duration_s, "seconds of audio")
      ->capture_default_str();
  bench_cmd->add_option("--seed", bench_args.seed)->capture_default_str();

  std::string weights_path;
  auto* inspect_weights_cmd = app.add_subcommand("inspect-weights", "describe a weight file");
  inspect_weights_cmd->add_option("file", weights_path)->required();

  auto* inspect_layout_cmd =
      app.add_subcommand("inspect-layout", "print window and band layout");

  InitWeightsArgs init_args;
  auto* init_cmd = app.add_subcommand("init-weights", "write a zero or random weight file");
  init_cmd->add_option("--kind", init_args.kind, "gru or unet")->required();
  init_cmd->add_option("-o,--output", init_args.output)->required();
  init_cmd->add_option("--seed", init_args.seed)->capture_default_str();
  init_cmd->add_option("--scale", init_args.scale)->capture_default_str();
  init_cmd->add_flag("--zero", init_args.zero);

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (!config_path.empty()) {
      const ConfigMap cfg = read_config(config_path);
      check_config_keys(app, cfg);
      for (CLI::App* sub : app.get_subcommands()) apply_config(*sub, cfg);
    }
    if (*enhance_cmd) return cmd_enhance(enhance_args, err);
    if (*sim_cmd) return cmd_simulate(sim_args, out, err);
    if (*eval_cmd) return cmd_eval(eval_args, out, err);
    if (*bench_cmd) return cmd_bench(bench_args, out, err);
    if (*inspect_weights_cmd) return cmd_inspect_weights(weights_path, out, err);
    if (*inspect_layout_cmd) return cmd_inspect_layout(out);
    if (*init_cmd) return cmd_init_weights(init_args, out);
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const CLI::Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

int run_cli(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return run_cli(args, std::cout, std::cerr);
}

}  // namespace sepipe
