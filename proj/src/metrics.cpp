// SPDX-License-Identifier: Apache-2.0
#include "sepipe/metrics.h"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <json.hpp>

#include "sepipe/errors.h"
#include "sepipe/mixture.h"

namespace sepipe {
namespace fs = std::filesystem;

SdrResult sdr_detail(std::span<const double> reference, std::span<const double> estimate) {
  if (reference.size() != estimate.size()) {
    throw UsageError(fmt::format("SDR inputs differ in length: {} vs {}", reference.size(),
                                 estimate.size()));
  }
  double ss = 0.0, se = 0.0;
  for (std::size_t n = 0; n < reference.size(); ++n) {
    ss += reference[n] * reference[n];
    se += reference[n] * estimate[n];
  }
  if (!(ss > 0.0)) throw UsageError("SDR reference has zero energy");
  const double alpha = se / ss;
  double target = 0.0, residual = 0.0;
  for (std::size_t n = 0; n < reference.size(); ++n) {
    const double p = alpha * reference[n];
    target += p * p;
    residual += (p - estimate[n]) * (p - estimate[n]);
  }
  const double db = 10.0 * std::log10(target / residual);
  if (std::isnan(db)) return {-kSdrCapDb, true};  // estimate identically zero
  if (db >= kSdrCapDb) return {kSdrCapDb, true};
  if (db <= -kSdrCapDb) return {-kSdrCapDb, true};
  return {db, false};
}

double sdr(const AudioBuffer& reference, const AudioBuffer& estimate) {
  if (reference.sample_rate != estimate.sample_rate) {
    throw UsageError(fmt::format("SDR inputs differ in rate: {} vs {} Hz", reference.sample_rate,
                                 estimate.sample_rate));
  }
  return sdr_detail(reference.samples, estimate.samples).db;
}

MetricReport evaluate_set(const fs::path& manifest, const fs::path& enhanced_dir) {
  auto rows = read_manifest(manifest);
  std::sort(rows.begin(), rows.end(),
            [](const ManifestRow& a, const ManifestRow& b) { return a.id < b.id; });
  const fs::path ref_dir = manifest.parent_path() / "references";

  MetricReport report;
  report.items.resize(rows.size());
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(rows.size()); ++i) {
    auto& item = report.items[static_cast<std::size_t>(i)];
    item.id = rows[static_cast<std::size_t>(i)].id;
    try {
      const AudioBuffer ref = read_wav(ref_dir / (item.id + ".wav"));
      const AudioBuffer est = read_wav(enhanced_dir / (item.id + ".wav"));
      if (ref.sample_rate != est.sample_rate) {
        throw UsageError(fmt::format("rate {} Hz does not match reference {} Hz", est.sample_rate,
                                     ref.sample_rate));
      }
      const SdrResult s = sdr_detail(ref.samples, est.samples);
      item.sdr_db = s.db;
      item.sdr_saturated = s.saturated;
      item.stoi = stoi(ref, est);
    } catch (const std::exception& e) {
      item.error = e.what();
    }
  }

  double sum_sdr = 0.0, sum_stoi = 0.0;
  for (const auto& item : report.items) {
    if (item.error) {
      ++report.failed;
      continue;
    }
    ++report.valid;
    sum_sdr += item.sdr_db;
    sum_stoi += item.stoi;
  }
  if (report.valid == 0) {
    const std::string first =
        report.items.empty() ? "manifest is empty" : *report.items.front().error;
    throw UsageError(fmt::format("no valid items to evaluate ({})", first));
  }
  report.mean_sdr_db = sum_sdr / static_cast<double>(report.valid);
  report.mean_stoi = sum_stoi / static_cast<double>(report.valid);
  return report;
}

void write_report_tsv(const fs::path& path, const MetricReport& report) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << "id\tsdr_db\tsdr_saturated\tstoi\terror\n";
  for (const auto& item : report.items) {
    if (item.error) {
      out << fmt::format("{}\t\t\t\t{}\n", item.id, *item.error);
    } else {
      out << fmt::format("{}\t{:.6f}\t{}\t{:.6f}\t\n", item.id, item.sdr_db,
                         item.sdr_saturated ? 1 : 0, item.stoi);
    }
  }
  out << fmt::format("mean\t{:.6f}\t\t{:.6f}\t\n", report.mean_sdr_db, report.mean_stoi);
  if (!out) throw IoError(fmt::format("write failed: {}", path.string()));
}

void write_report_json(const fs::path& path, const MetricReport& report) {
  nlohmann::json j;
  j["valid"] = report.valid;
  j["failed"] = report.failed;
  j["mean_sdr_db"] = report.mean_sdr_db;
  j["mean_stoi"] = report.mean_stoi;
  auto& items = j["items"] = nlohmann::json::array();
  for (const auto& item : report.items) {
    nlohmann::json e{{"id", item.id}};
    if (item.error) {
      e["error"] = *item.error;
    } else {
      e["sdr_db"] = item.sdr_db;
      e["sdr_saturated"] = item.sdr_saturated;
      e["stoi"] = item.stoi;
    }
    items.push_back(std::move(e));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(fmt::format("cannot write {}", path.string()));
  out << j.dump(2) << '\n';
  if (!out) throw IoError(fmt::format("write failed: {}", path.string()));
}

}  // namespace sepipe
