// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sepipe/audio.h"
#include "sepipe/cli.h"
#include "sepipe/engine.h"
#include "sepipe/errors.h"
#include "sepipe/neural.h"
#include "sepipe/weights.h"
#include "signals.h"

using namespace sepipe;
namespace fs = std::filesystem;

namespace {

struct Run {
  int status;
  std::string out;
  std::string err;
};

Run cli(const std::vector<std::string>& args) {
  std::ostringstream out, err;
  const int status = run_cli(args, out, err);
  return {status, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

double max_abs(std::span<const double> x) {
  double m = 0.0;
  for (double v : x) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace

TEST_SUITE("engine") {
  TEST_CASE("engine names") {
    CHECK(parse_engine("baseline") == EngineKind::kBaseline);
    CHECK(parse_engine("gru") == EngineKind::kGru);
    CHECK(parse_engine("unet") == EngineKind::kUnet);
    CHECK_THROWS_AS(parse_engine("wiener"), UsageError);
    CHECK(to_string(EngineKind::kUnet) == "unet");
  }

  TEST_CASE("attenuation defaults") {
    EngineConfig c;
    CHECK(c.effective_max_atten_db() == 12.0);
    c.kind = EngineKind::kGru;
    CHECK(c.effective_max_atten_db() == 15.0);
    c.max_atten_db = 6.0;
    CHECK(c.effective_max_atten_db() == 6.0);
  }

  TEST_CASE("baseline on silence is silence") {
    const AudioBuffer y = enhance(testsig::buffer(std::vector<double>(32000, 0.0)), EngineConfig{});
    CHECK(y.size() == 32000);
    CHECK(max_abs(y.samples) == 0.0);
  }

  TEST_CASE("zero-weight GRU halves every sample") {
    EngineConfig c;
    c.kind = EngineKind::kGru;
    const auto x = testsig::speech_like(20000, 32000, 3);
    const AudioBuffer y = enhance(testsig::buffer(x), c, make_model(zero_weights(ModelKind::kGru)));
    REQUIRE(y.size() == x.size());
    double err = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) err = std::max(err, std::abs(y.samples[n] - 0.5 * x[n]));
    CHECK(err < 1e-9);
  }

  TEST_CASE("zero-weight U-Net halves every sample") {
    EngineConfig c;
    c.kind = EngineKind::kUnet;
    const auto x = testsig::white_noise(12345, 4);
    const AudioBuffer y = enhance(testsig::buffer(x), c, make_model(zero_weights(ModelKind::kUnet)));
    REQUIRE(y.size() == x.size());
    double err = 0.0;
    for (std::size_t n = 0; n < x.size(); ++n) err = std::max(err, std::abs(y.samples[n] - 0.5 * x[n]));
    CHECK(err < 1e-9);
  }

  TEST_CASE("16 kHz input keeps its rate and length") {
    EngineConfig c;
    c.kind = EngineKind::kGru;
    const auto x = testsig::speech_like(16003, 16000, 5);
    const AudioBuffer y =
        enhance(testsig::buffer(x, 16000), c, make_model(zero_weights(ModelKind::kGru)));
    CHECK(y.sample_rate == 16000);
    REQUIRE(y.size() == x.size());
    // Constant 0.5 mask through the 2x resampler pair: aligned up to the
    // resampler's band edge.
    double err = 0.0, ref = 0.0;
    for (std::size_t n = 200; n + 200 < x.size(); ++n) {
      err += std::pow(y.samples[n] - 0.5 * x[n], 2);
      ref += std::pow(0.5 * x[n], 2);
    }
    CHECK(10.0 * std::log10(err / ref) < -40.0);
  }

  TEST_CASE("neural engines need a matching model") {
    EngineConfig c;
    c.kind = EngineKind::kGru;
    CHECK_THROWS_AS(EnhanceStream{c}, UsageError);
    CHECK_THROWS_AS((EnhanceStream{c, make_model(zero_weights(ModelKind::kUnet))}), UsageError);
  }

  TEST_CASE("reset restores the initial state") {
    EngineConfig c;
    EnhanceStream s(c);
    const auto x = testsig::white_noise(32000, 6);
    const AudioBuffer a = enhance(testsig::buffer(x), s);
    s.reset();
    const AudioBuffer b = enhance(testsig::buffer(x), s);
    CHECK(a.samples == b.samples);
  }

  TEST_CASE("kernel policy does not change the output") {
    EngineConfig c;
    c.kind = EngineKind::kUnet;
    const auto x = testsig::speech_like(16000, 32000, 7);
    const WeightFile w = random_weights(ModelKind::kUnet, 3);
    const AudioBuffer serial = enhance(testsig::buffer(x), c, make_model(w));
    c.policy = ExecPolicy::kParallel;
    const AudioBuffer parallel = enhance(testsig::buffer(x), c, make_model(w));
    CHECK(serial.samples == parallel.samples);
  }
}

TEST_SUITE("cli") {
  TEST_CASE("usage errors exit with 2") {
    CHECK(cli({}).status == 2);
    CHECK(cli({"frobnicate"}).status == 2);
    CHECK(cli({"bench", "--duration", "0"}).status == 2);
    CHECK(cli({"bench", "--duration", "-1"}).status == 2);
    CHECK(cli({"bench", "--engine", "wiener"}).status == 2);
    CHECK(cli({"bench", "--kernels", "gpu"}).status == 2);
    CHECK(cli({"--help"}).status == 0);
  }

  TEST_CASE("enhance, simulate and eval") {
    const fs::path dir = testsig::temp_dir("cli_flow");
    fs::create_directories(dir / "speech");
    fs::create_directories(dir / "noise");
    write_wav(dir / "speech" / "a.wav", testsig::buffer(testsig::speech_like(48000, 32000, 1)));
    write_wav(dir / "speech" / "b.wav", testsig::buffer(testsig::speech_like(24000, 16000, 2), 16000));
    write_wav(dir / "noise" / "n.wav", testsig::buffer(testsig::white_noise(40000, 3)));

    const Run sim = cli({"simulate", "--speech-dir", (dir / "speech").string(), "--noise-dir",
                         (dir / "noise").string(), "-o", (dir / "set").string(), "--count", "3",
                         "--seed", "4"});
    REQUIRE(sim.status == 0);
    CHECK(sim.out == (dir / "set" / "manifest.tsv").string() + "\n");

    std::vector<std::string> args{"enhance", "-o", (dir / "enh").string()};
    for (const char* id : {"mix00000", "mix00001", "mix00002"}) {
      args.push_back((dir / "set" / "mixtures" / (std::string(id) + ".wav")).string());
    }
    const Run enh = cli(args);
    REQUIRE(enh.status == 0);
    CHECK(enh.err.find("RTF") != std::string::npos);
    for (const char* id : {"mix00000", "mix00001", "mix00002"}) {
      const AudioBuffer in = read_wav(dir / "set" / "mixtures" / (std::string(id) + ".wav"));
      const AudioBuffer out = read_wav(dir / "enh" / (std::string(id) + ".wav"));
      CHECK(out.size() == in.size());
      CHECK(wav_format(dir / "enh" / (std::string(id) + ".wav")) == SampleFormat::kFloat32);
    }

    const Run ev = cli({"eval", "--manifest", (dir / "set" / "manifest.tsv").string(),
                        "--enhanced-dir", (dir / "enh").string()});
    REQUIRE(ev.status == 0);
    CHECK(ev.out.rfind("items 3 failed 0 mean_sdr_db ", 0) == 0);
    CHECK(fs::exists(dir / "enh" / "report.tsv"));
    const auto summary = nlohmann::json::parse(slurp(dir / "enh" / "summary.json"));
    CHECK(summary["valid"] == 3);

    // One enhanced file removed: the item fails, the others are still scored.
    fs::remove(dir / "enh" / "mix00001.wav");
    const Run partial = cli({"eval", "--manifest", (dir / "set" / "manifest.tsv").string(),
                             "--enhanced-dir", (dir / "enh").string()});
    CHECK(partial.status == 1);
    CHECK(partial.out.rfind("items 2 failed 1", 0) == 0);
    CHECK(partial.err.find("mix00001") != std::string::npos);
  }

  TEST_CASE("enhance is deterministic for every engine") {
    const fs::path dir = testsig::temp_dir("cli_determinism");
    write_wav(dir / "in.wav", testsig::buffer(testsig::speech_like(40000, 32000, 8)));
    REQUIRE(cli({"init-weights", "--kind", "gru", "--seed", "1", "-o", (dir / "g.nmwf").string()})
                .status == 0);
    REQUIRE(cli({"init-weights", "--kind", "unet", "--seed", "2", "-o", (dir / "u.nmwf").string()})
                .status == 0);
    const std::vector<std::pair<std::string, std::string>> engines{
        {"baseline", ""}, {"gru", (dir / "g.nmwf").string()}, {"unet", (dir / "u.nmwf").string()}};
    for (const auto& [engine, weights] : engines) {
      CAPTURE(engine);
      std::vector<std::string> out_files;
      for (const char* run : {"r1", "r2"}) {
        std::vector<std::string> args{"enhance", "--engine", engine, "-o", (dir / engine / run).string(),
                                      (dir / "in.wav").string()};
        if (!weights.empty()) {
          args.push_back("--weights");
          args.push_back(weights);
        }
        REQUIRE(cli(args).status == 0);
        out_files.push_back(slurp(dir / engine / run / "in.wav"));
      }
      CHECK(out_files[0] == out_files[1]);
      CHECK(out_files[0].size() > 40000);
    }
  }

  TEST_CASE("enhance failures") {
    const fs::path dir = testsig::temp_dir("cli_enhance_errors");
    write_wav(dir / "ok.wav", testsig::buffer(testsig::white_noise(8000, 1)));
    std::ofstream(dir / "junk.wav") << "not a wav file";

    const Run bad_file = cli({"enhance", "-o", (dir / "out").string(), (dir / "ok.wav").string(),
                              (dir / "junk.wav").string()});
    CHECK(bad_file.status == 1);
    CHECK(fs::exists(dir / "out" / "ok.wav"));
    CHECK(bad_file.err.find("junk.wav") != std::string::npos);

    CHECK(cli({"enhance", "--engine", "gru", "-o", (dir / "o2").string(), (dir / "ok.wav").string()})
              .status == 2);
    std::ofstream(dir / "bad.nmwf") << "NMWF garbage";
    CHECK(cli({"enhance", "--engine", "gru", "--weights", (dir / "bad.nmwf").string(), "-o",
               (dir / "o3").string(), (dir / "ok.wav").string()})
              .status == 1);
    // A U-Net file offered to the GRU engine.
    REQUIRE(cli({"init-weights", "--kind", "unet", "-o", (dir / "u.nmwf").string()}).status == 0);
    CHECK(cli({"enhance", "--engine", "gru", "--weights", (dir / "u.nmwf").string(), "-o",
               (dir / "o4").string(), (dir / "ok.wav").string()})
              .status != 0);
  }

  TEST_CASE("pcm16 output") {
    const fs::path dir = testsig::temp_dir("cli_pcm");
    write_wav(dir / "in.wav", testsig::buffer(testsig::white_noise(8000, 1)));
    REQUIRE(cli({"enhance", "--format", "pcm16", "-o", (dir / "out").string(),
                 (dir / "in.wav").string()})
                .status == 0);
    CHECK(wav_format(dir / "out" / "in.wav") == SampleFormat::kPcm16);
  }

  TEST_CASE("bench reports the counted MACs") {
    const Run gru = cli({"bench", "--engine", "gru", "--duration", "0.5"});
    REQUIRE(gru.status == 0);
    const auto j = nlohmann::json::parse(gru.out);
    CHECK(j["macs_per_second"].get<std::size_t>() == count_macs_per_second(ModelKind::kGru));
    CHECK(j["params"].get<std::size_t>() == count_params(ModelKind::kGru));
    CHECK(j["real_time_factor"].get<double>() > 0.0);
    CHECK(j["frame_latency_us"]["p95"].get<double>() >= j["frame_latency_us"]["p50"].get<double>());

    const Run base = cli({"bench", "--duration", "0.5"});
    REQUIRE(base.status == 0);
    CHECK_FALSE(nlohmann::json::parse(base.out).contains("macs_per_second"));
  }

  TEST_CASE("inspect-weights and init-weights") {
    const fs::path dir = testsig::temp_dir("cli_weights");
    REQUIRE(cli({"init-weights", "--kind", "gru", "--zero", "-o", (dir / "z.nmwf").string()}).status == 0);
    const Run ok = cli({"inspect-weights", (dir / "z.nmwf").string()});
    REQUIRE(ok.status == 0);
    const auto j = nlohmann::json::parse(ok.out);
    CHECK(j["kind"] == "gru");
    CHECK(j["schema"] == "ok");
    CHECK(j["parameters"] == 83778);
    CHECK(j["tensors"].size() == 14);

    // Same container, one tensor dropped: readable but fails the schema.
    WeightFile w = read_weight_file(dir / "z.nmwf");
    w.tensors.pop_back();
    write_weight_file(dir / "short.nmwf", w);
    const Run bad = cli({"inspect-weights", (dir / "short.nmwf").string()});
    CHECK(bad.status == 1);
    CHECK(nlohmann::json::parse(bad.out)["schema"].get<std::string>().find("output.bias") !=
          std::string::npos);

    CHECK(cli({"inspect-weights", (dir / "missing.nmwf").string()}).status == 1);
    CHECK(cli({"init-weights", "--kind", "lstm", "-o", (dir / "x.nmwf").string()}).status == 2);
  }

  TEST_CASE("inspect-layout") {
    const Run r = cli({"inspect-layout"});
    REQUIRE(r.status == 0);
    std::istringstream in(r.out);
    std::string header, columns, line;
    std::getline(in, header);
    std::getline(in, columns);
    CHECK(header.find("latency 640 samples") != std::string::npos);
    CHECK(columns == "feature\tfirst_bin\tlast_bin\twidth");
    std::size_t rows = 0;
    std::string last;
    while (std::getline(in, line)) {
      ++rows;
      last = line;
    }
    CHECK(rows == 66);
    CHECK(last == "65\t430\t512\t83");
  }

  TEST_CASE("config file fills unset options and flags win") {
    const fs::path dir = testsig::temp_dir("cli_config");
    write_wav(dir / "in.wav", testsig::buffer(testsig::white_noise(16000, 2)));
    REQUIRE(cli({"init-weights", "--kind", "gru", "--zero", "-o", (dir / "z.nmwf").string()}).status == 0);
    {
      std::ofstream cfg(dir / "run.cfg");
      cfg << "# zero-weight GRU gives a constant 0.5 mask\n"
          << "engine = gru\n"
          << "weights = " << (dir / "z.nmwf").string() << "\n"
          << "max_atten_db = 1\n";
    }
    const auto peak_ratio = [&](const fs::path& out) {
      const AudioBuffer x = read_wav(dir / "in.wav");
      const AudioBuffer y = read_wav(out / "in.wav");
      return max_abs(y.samples) / max_abs(x.samples);
    };
    // Config alone: the 1 dB floor (0.891) dominates the 0.5 mask.
    REQUIRE(cli({"--config", (dir / "run.cfg").string(), "enhance", "-o", (dir / "a").string(),
                 (dir / "in.wav").string()})
                .status == 0);
    CHECK(peak_ratio(dir / "a") == doctest::Approx(std::pow(10.0, -1.0 / 20.0)).epsilon(1e-5));
    // Flag overrides the config value.
    REQUIRE(cli({"--config", (dir / "run.cfg").string(), "enhance", "--max-atten-db", "15", "-o",
                 (dir / "b").string(), (dir / "in.wav").string()})
                .status == 0);
    CHECK(peak_ratio(dir / "b") == doctest::Approx(0.5).epsilon(1e-5));

    std::ofstream(dir / "bad.cfg") << "no_such_option = 3\n";
    CHECK(cli({"--config", (dir / "bad.cfg").string(), "bench", "--duration", "0.1"}).status == 2);
    std::ofstream(dir / "syntax.cfg") << "engine gru\n";
    CHECK(cli({"--config", (dir / "syntax.cfg").string(), "bench", "--duration", "0.1"}).status == 2);
  }
}
