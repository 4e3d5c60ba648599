// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include <json.hpp>

#include "oracles.h"
#include "sepipe/audio.h"
#include "sepipe/errors.h"
#include "sepipe/metrics.h"
#include "sepipe/mixture.h"
#include "signals.h"

using namespace sepipe;
namespace fs = std::filesystem;

namespace {

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  return std::inner_product(a.begin(), a.end(), b.begin(), 0.0);
}

std::vector<double> add_noise(const std::vector<double>& s, double snr_db, std::uint64_t seed) {
  const auto n = testsig::white_noise(s.size(), seed, 1.0);
  const double g = noise_gain_for_snr(s, n, snr_db);
  std::vector<double> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out[i] = s[i] + g * n[i];
  return out;
}

// Four simulated items, two to three seconds each.
struct SmallSet {
  fs::path manifest;
  fs::path mixtures;
  fs::path references;
  std::vector<ManifestRow> rows;
};

SmallSet make_set(const std::string& tag) {
  const fs::path root = testsig::temp_dir(tag);
  fs::create_directories(root / "speech");
  fs::create_directories(root / "noise");
  write_wav(root / "speech" / "a.wav", testsig::buffer(testsig::speech_like(64000, 32000, 1)));
  write_wav(root / "speech" / "b.wav", testsig::buffer(testsig::speech_like(56000, 32000, 2)));
  write_wav(root / "noise" / "n.wav", testsig::buffer(testsig::white_noise(50000, 3)));
  MixSpec spec;
  spec.seed = 17;
  const auto result = make_test_set(root / "speech", root / "noise", spec, 4, root / "set");
  REQUIRE(result.errors.empty());
  return {root / "set" / "manifest.tsv", root / "set" / "mixtures", root / "set" / "references",
          result.rows};
}

}  // namespace

TEST_SUITE("sdr") {
  TEST_CASE("identity and scaled copies hit the cap") {
    const auto s = testsig::speech_like(32000, 32000, 4);
    const SdrResult same = sdr_detail(s, s);
    CHECK(same.db == kSdrCapDb);
    CHECK(same.saturated);
    std::vector<double> half(s);
    for (double& v : half) v *= 0.5;
    const SdrResult h = sdr_detail(s, half);
    CHECK(h.db == kSdrCapDb);
    CHECK(h.saturated);
  }

  TEST_CASE("orthogonal perturbation at one tenth of the power is 10 dB") {
    const auto s = testsig::speech_like(32000, 32000, 5);
    auto n = testsig::white_noise(s.size(), 6, 1.0);
    const double proj = dot(n, s) / dot(s, s);
    for (std::size_t i = 0; i < n.size(); ++i) n[i] -= proj * s[i];
    const double scale = std::sqrt(dot(s, s) / 10.0 / dot(n, n));
    std::vector<double> est(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) est[i] = s[i] + scale * n[i];
    const SdrResult r = sdr_detail(s, est);
    CHECK(std::abs(r.db - 10.0) < 1e-6);
    CHECK_FALSE(r.saturated);
  }

  TEST_CASE("scale invariance") {
    const auto s = testsig::speech_like(16000, 32000, 7);
    const auto est = add_noise(s, 3.0, 8);
    const double base = sdr_detail(s, est).db;
    for (double c : {1e-3, 0.25, 2.0, 40.0}) {
      std::vector<double> scaled(est);
      for (double& v : scaled) v *= c;
      CHECK(sdr_detail(s, scaled).db == doctest::Approx(base).epsilon(1e-10));
    }
  }

  TEST_CASE("values track the noise level") {
    const auto s = testsig::speech_like(32000, 32000, 9);
    CHECK(std::abs(sdr_detail(s, add_noise(s, 0.0, 1)).db) < 0.1);
    CHECK(std::abs(sdr_detail(s, add_noise(s, 20.0, 1)).db - 20.0) < 0.1);
  }

  TEST_CASE("silent estimate saturates at the lower cap") {
    const auto s = testsig::speech_like(8000, 32000, 1);
    const SdrResult r = sdr_detail(s, std::vector<double>(s.size(), 0.0));
    CHECK(r.saturated);
    CHECK(r.db == -kSdrCapDb);
  }

  TEST_CASE("errors") {
    const auto s = testsig::speech_like(8000, 32000, 1);
    CHECK_THROWS_AS(sdr_detail(std::vector<double>(s.size(), 0.0), s), UsageError);
    CHECK_THROWS_AS(sdr_detail(s, std::vector<double>(10, 1.0)), UsageError);
    CHECK_THROWS_AS(sdr(testsig::buffer(s), testsig::buffer(s, 16000)), UsageError);
  }
}

TEST_SUITE("stoi") {
  TEST_CASE("third-octave bands") {
    const ThirdOctaveBands b = third_octave_bands();
    // Centre 150 * 2^(k/3) Hz; bins are 10000 / 512 Hz wide.
    CHECK(b.lo[0] == 7);
    CHECK(b.hi[0] == 9);
    CHECK(b.hi[14] == 219);
    for (std::size_t k = 0; k < stoi_params::kBands; ++k) {
      CHECK(b.lo[k] < b.hi[k]);
      if (k > 0) CHECK(b.lo[k] == b.hi[k - 1]);
    }
    CHECK(b.hi[14] * 10000.0 / 512.0 == doctest::Approx(4276.4).epsilon(0.001));
  }

  TEST_CASE("self score is one") {
    for (int fs : {16000, 32000}) {
      const auto s = testsig::buffer(testsig::speech_like(3 * static_cast<std::size_t>(fs), fs, 2), fs);
      CHECK(stoi(s, s) == doctest::Approx(1.0).epsilon(1e-6));
    }
  }

  TEST_CASE("sign of the estimate does not matter") {
    const auto s = testsig::speech_like(64000, 32000, 3);
    std::vector<double> neg(s);
    for (double& v : neg) v = -v;
    const double score = stoi(testsig::buffer(s), testsig::buffer(neg));
    CHECK(score == doctest::Approx(1.0).epsilon(1e-6));
  }

  TEST_CASE("matches the straight-line oracle") {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const int fs = seed % 2 == 0 ? 32000 : 16000;
      const auto s = testsig::speech_like(static_cast<std::size_t>(fs) * 3, fs, 10 + seed);
      const auto est = add_noise(s, 0.0, 20 + seed);
      const double fast = stoi(testsig::buffer(s, fs), testsig::buffer(est, fs));
      const double slow = oracle::stoi(s, est, fs);
      CAPTURE(seed);
      CHECK(std::abs(fast - slow) < 0.01);
      CHECK(std::abs(fast - slow) < 1e-9);
    }
  }

  TEST_CASE("bounded and monotone in the noise level") {
    const auto s = testsig::speech_like(96000, 32000, 4);
    double prev = -2.0;
    for (double snr : {-10.0, 0.0, 10.0}) {
      const double score = stoi(testsig::buffer(s), testsig::buffer(add_noise(s, snr, 5)));
      CHECK(score >= -1.0);
      CHECK(score <= 1.0);
      CHECK(score > prev);
      prev = score;
    }
  }

  TEST_CASE("deterministic") {
    const auto s = testsig::speech_like(64000, 32000, 6);
    const auto est = add_noise(s, 2.0, 7);
    CHECK(stoi(testsig::buffer(s), testsig::buffer(est)) ==
          stoi(testsig::buffer(s), testsig::buffer(est)));
    CHECK(sdr(testsig::buffer(s), testsig::buffer(est)) ==
          sdr(testsig::buffer(s), testsig::buffer(est)));
  }

  TEST_CASE("silent frames are dropped") {
    // 1 s of signal, 1 s of silence, 1 s of signal at 10 kHz.
    auto s = testsig::white_noise(30000, 1, 0.1);
    std::fill(s.begin() + 10000, s.begin() + 20000, 0.0);
    const auto [r, e] = remove_silent_frames(s, s);
    CHECK(r == e);
    CHECK(r.size() < 21000);
    CHECK(r.size() > 19000);
  }

  TEST_CASE("errors") {
    const auto s = testsig::speech_like(16000, 32000, 1);
    CHECK_THROWS_AS(stoi(testsig::buffer(s), testsig::buffer(s)), UsageError);
    const auto longer = testsig::speech_like(64000, 32000, 1);
    CHECK_THROWS_AS(stoi(testsig::buffer(longer), testsig::buffer(s)), UsageError);
    // Long enough in time, but almost everything is silent.
    std::vector<double> sparse(64000, 0.0);
    for (std::size_t i = 0; i < 3000; ++i) sparse[i] = std::sin(0.1 * static_cast<double>(i));
    CHECK_THROWS_AS(stoi(testsig::buffer(sparse), testsig::buffer(sparse)), UsageError);
  }
}

TEST_SUITE("evaluate_set") {
  TEST_CASE("references score at the cap") {
    const SmallSet set = make_set("eval_ref");
    const MetricReport r = evaluate_set(set.manifest, set.references);
    CHECK(r.valid == 4);
    CHECK(r.failed == 0);
    CHECK(r.mean_sdr_db == kSdrCapDb);
    CHECK(r.mean_stoi == doctest::Approx(1.0).epsilon(1e-6));
    for (std::size_t i = 1; i < r.items.size(); ++i) CHECK(r.items[i - 1].id < r.items[i].id);
  }

  TEST_CASE("identity processing reports the mixture metrics") {
    const SmallSet set = make_set("eval_mix");
    const MetricReport r = evaluate_set(set.manifest, set.mixtures);
    REQUIRE(r.items.size() == set.rows.size());
    double sum_sdr = 0.0, sum_stoi = 0.0;
    for (const auto& item : r.items) {
      const AudioBuffer ref = read_wav(set.references / (item.id + ".wav"));
      const AudioBuffer mix = read_wav(set.mixtures / (item.id + ".wav"));
      CHECK(item.sdr_db == sdr(ref, mix));
      CHECK(item.stoi == stoi(ref, mix));
      CHECK(item.sdr_db < 15.0);
      sum_sdr += item.sdr_db;
      sum_stoi += item.stoi;
    }
    CHECK(r.mean_sdr_db == doctest::Approx(sum_sdr / 4).epsilon(1e-12));
    CHECK(r.mean_stoi == doctest::Approx(sum_stoi / 4).epsilon(1e-12));
  }

  TEST_CASE("missing outputs are recorded per item") {
    const SmallSet set = make_set("eval_missing");
    const fs::path partial = set.manifest.parent_path() / "partial";
    fs::create_directories(partial);
    fs::copy_file(set.mixtures / (set.rows[0].id + ".wav"), partial / (set.rows[0].id + ".wav"));
    fs::copy_file(set.mixtures / (set.rows[2].id + ".wav"), partial / (set.rows[2].id + ".wav"));
    const MetricReport r = evaluate_set(set.manifest, partial);
    CHECK(r.valid == 2);
    CHECK(r.failed == 2);
    CHECK(r.items.size() == 4);
    CHECK(r.items[1].error.has_value());
    CHECK(r.items[3].error.has_value());
    CHECK_FALSE(r.items[0].error.has_value());
    CHECK(r.mean_sdr_db == doctest::Approx((r.items[0].sdr_db + r.items[2].sdr_db) / 2));

    const fs::path tsv = partial / "report.tsv";
    const fs::path json = partial / "summary.json";
    write_report_tsv(tsv, r);
    write_report_json(json, r);
    std::ifstream in(tsv);
    std::string line;
    std::size_t lines = 0;
    std::getline(in, line);
    CHECK(line == "id\tsdr_db\tsdr_saturated\tstoi\terror");
    while (std::getline(in, line)) ++lines;
    CHECK(lines == 5);
    const auto j = nlohmann::json::parse(std::ifstream(json));
    CHECK(j["valid"] == 2);
    CHECK(j["failed"] == 2);
    CHECK(j["items"].size() == 4);
  }

  TEST_CASE("no valid item is an error") {
    const SmallSet set = make_set("eval_none");
    const fs::path empty = set.manifest.parent_path() / "empty";
    fs::create_directories(empty);
    CHECK_THROWS_AS(evaluate_set(set.manifest, empty), UsageError);
  }
}
