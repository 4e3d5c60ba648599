// SPDX-License-Identifier: Apache-2.0
#include "sepipe/gru.h"

#include <algorithm>
#include <array>
#include <cmath>

#include "sepipe/errors.h"

namespace sepipe {
namespace {

constexpr std::size_t kGates = 3;  // z, r, h

inline float sigmoid(float x) { return 1.0f / (1.0f + std::exp(-x)); }

std::array<float, kFeatureCount> to_input(const FeatureFrame& f) {
  std::array<float, kFeatureCount> x{};
  for (std::size_t i = 0; i < kFeatureCount; ++i) {
    if (!std::isfinite(f.values[i])) throw UsageError("network input contains non-finite features");
    x[i] = static_cast<float>(f.values[i]);
  }
  return x;
}

}  // namespace

struct GruModel::Weights {
  std::array<std::vector<float>, kGates> w;   // [66][128]
  std::array<std::vector<float>, kGates> u;   // [128][128]
  std::array<std::vector<float>, kGates> bw;  // [128]
  std::array<std::vector<float>, kGates> bu;  // [128]
  std::vector<float> out_w;                   // [128][66]
  std::vector<float> out_b;                   // [66]
};

GruModel::GruModel(std::shared_ptr<const Weights> w)
    : w_(std::move(w)), hidden_(kHidden, 0.0f) {}

GruModel GruModel::from_weights(const WeightFile& file) {
  if (file.kind != ModelKind::kGru) throw SchemaError("weight file does not hold a GRU model");
  validate_schema(file);
  auto w = std::make_shared<Weights>();
  const char* gates[kGates] = {"z", "r", "h"};
  for (std::size_t g = 0; g < kGates; ++g) {
    w->w[g] = file.at(std::string("gru.W_") + gates[g]).data;
    w->u[g] = file.at(std::string("gru.U_") + gates[g]).data;
    w->bw[g] = file.at(std::string("gru.bW_") + gates[g]).data;
    w->bu[g] = file.at(std::string("gru.bU_") + gates[g]).data;
  }
  w->out_w = file.at("output.weight").data;
  w->out_b = file.at("output.bias").data;
  return GruModel(std::move(w));
}

void GruModel::reset() { std::fill(hidden_.begin(), hidden_.end(), 0.0f); }

MaskFrame GruModel::step(const FeatureFrame& features) {
  const auto x = to_input(features);
  const Weights& w = *w_;

  std::array<std::vector<float>, kGates> gx, gh;
  for (std::size_t g = 0; g < kGates; ++g) {
    gx[g] = w.bw[g];
    kernels::gemv_acc(policy_, x, w.w[g], gx[g]);
  }
  for (std::size_t g = 0; g < 2; ++g) {
    gh[g] = w.bu[g];
    kernels::gemv_acc(policy_, hidden_, w.u[g], gh[g]);
  }

  std::vector<float> z(kHidden), reset_h(kHidden);
  for (std::size_t j = 0; j < kHidden; ++j) {
    z[j] = sigmoid(gx[0][j] + gh[0][j]);
    reset_h[j] = sigmoid(gx[1][j] + gh[1][j]) * hidden_[j];
  }
  gh[2] = w.bu[2];
  kernels::gemv_acc(policy_, reset_h, w.u[2], gh[2]);
  for (std::size_t j = 0; j < kHidden; ++j) {
    const float candidate = std::tanh(gx[2][j] + gh[2][j]);
    hidden_[j] = (1.0f - z[j]) * hidden_[j] + z[j] * candidate;
  }

  std::vector<float> y = w.out_b;
  kernels::gemv_acc(policy_, hidden_, w.out_w, y);
  MaskFrame mask;
  for (std::size_t i = 0; i < kFeatureCount; ++i) mask.values[i] = sigmoid(y[i]);
  return mask;
}

std::vector<MaskFrame> GruModel::run_batch(std::span<const FeatureFrame> frames) const {
  const Weights& w = *w_;
  const std::size_t n = frames.size();

  // Input projections for the whole sequence: P_g = X W_g + bW_g, [n][128].
  std::array<std::vector<float>, kGates> proj;
  std::vector<float> xs(n * kInput);
  for (std::size_t t = 0; t < n; ++t) {
    const auto x = to_input(frames[t]);
    std::copy(x.begin(), x.end(), xs.begin() + static_cast<std::ptrdiff_t>(t * kInput));
  }
  for (std::size_t g = 0; g < kGates; ++g) {
    proj[g].assign(n * kHidden, 0.0f);
#pragma omp parallel for schedule(static) if (policy_ == ExecPolicy::kParallel)
    for (std::ptrdiff_t t = 0; t < static_cast<std::ptrdiff_t>(n); ++t) {
      for (std::size_t j = 0; j < kHidden; ++j) {
        float acc = 0.0f;
        for (std::size_t i = 0; i < kInput; ++i) acc += xs[t * kInput + i] * w.w[g][i * kHidden + j];
        proj[g][t * kHidden + j] = acc + w.bw[g][j];
      }
    }
  }

  auto recur = [](std::span<const float> h, const std::vector<float>& u, std::size_t j) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < kHidden; ++i) acc += h[i] * u[i * kHidden + j];
    return acc;
  };

  std::vector<float> h(kHidden, 0.0f), rh(kHidden), z(kHidden);
  std::vector<MaskFrame> masks(n);
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < kHidden; ++j) {
      z[j] = sigmoid(proj[0][t * kHidden + j] + recur(h, w.u[0], j) + w.bu[0][j]);
      rh[j] = sigmoid(proj[1][t * kHidden + j] + recur(h, w.u[1], j) + w.bu[1][j]) * h[j];
    }
    std::vector<float> next(kHidden);
    for (std::size_t j = 0; j < kHidden; ++j) {
      const float candidate = std::tanh(proj[2][t * kHidden + j] + recur(rh, w.u[2], j) + w.bu[2][j]);
      next[j] = (1.0f - z[j]) * h[j] + z[j] * candidate;
    }
    h = std::move(next);
    for (std::size_t o = 0; o < kInput; ++o) {
      float acc = 0.0f;
      for (std::size_t i = 0; i < kHidden; ++i) acc += h[i] * w.out_w[i * kInput + o];
      masks[t].values[o] = sigmoid(acc + w.out_b[o]);
    }
  }
  return masks;
}

std::size_t GruModel::param_count() {
  return kGates * (kInput * kHidden + kHidden * kHidden + 2 * kHidden) + kHidden * kInput + kInput;
}

std::size_t GruModel::macs_per_frame() {
  return kGates * (kInput * kHidden + kHidden * kHidden) + kHidden * kInput;
}

}  // namespace sepipe
