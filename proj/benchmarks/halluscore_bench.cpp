#include <cmath>
#include <string>
#include <vector>

#include <benchmark/benchmark.h>

#include "halluscore/aggregation.hpp"
#include "halluscore/budget.hpp"
#include "halluscore/calibration.hpp"
#include "halluscore/rng.hpp"
#include "halluscore/scorers.hpp"
#include "halluscore/types.hpp"

using namespace halluscore;

namespace {

// Correlated-but-noisy probability features with Bernoulli labels, the same
// shape the selection and calibration paths see in production.
struct Synthetic {
  std::vector<double> truth;
  std::vector<int> labels;
};

Synthetic synthetic_population(std::size_t n, std::uint64_t seed) {
  Rng rng(seed);
  Synthetic s;
  s.truth.reserve(n);
  s.labels.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double p = rng.uniform(0.05, 0.95);
    s.truth.push_back(p);
    s.labels.push_back(rng.bernoulli(p));
  }
  return s;
}

FeatureMatrix noisy_features(const Synthetic& s, std::size_t cols,
                             std::uint64_t seed) {
  Rng rng(seed);
  FeatureMatrix X;
  for (std::size_t c = 0; c < cols; ++c) {
    X.columns.push_back(ScorerKind{ScorerBase::SelfCheckNli,
                                   static_cast<int>(c) + 2});
  }
  const std::size_t n = s.truth.size();
  X.values.resize(n * cols);
  X.imputed.assign(n * cols, 0);
  for (std::size_t r = 0; r < n; ++r) {
    X.row_ids.push_back("r" + std::to_string(r));
    for (std::size_t c = 0; c < cols; ++c) {
      const double noisy = std::clamp(
          s.truth[r] + rng.uniform(-0.25, 0.25), 1e-3, 1.0 - 1e-3);
      X.values[r * cols + c] = logit_transform(noisy);
    }
  }
  return X;
}

}  // namespace

static void BM_VerdictProbability(benchmark::State& state) {
  Rng rng(1);
  std::vector<FirstTokenLogits> inputs;
  for (int i = 0; i < 1024; ++i) {
    FirstTokenLogits logits;
    logits.entries.push_back({"True", -rng.uniform(0.01, 4.0)});
    logits.entries.push_back({"False", -rng.uniform(0.01, 4.0)});
    logits.entries.push_back({"true", -rng.uniform(0.01, 4.0)});
    inputs.push_back(std::move(logits));
  }
  std::size_t i = 0;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        verdict_probability(inputs[i++ & 1023], "True", "False"));
  }
}
BENCHMARK(BM_VerdictProbability);

static void BM_InversePerplexity(benchmark::State& state) {
  Rng rng(2);
  TokenLogprobs tl;
  for (int i = 0; i < 256; ++i) {
    tl.tokens.push_back({"t", -rng.uniform(0.01, 5.0)});
  }
  for (auto _ : state) {
    benchmark::DoNotOptimize(score_inverse_perplexity(tl));
  }
}
BENCHMARK(BM_InversePerplexity);

static void BM_Multicalibrate(benchmark::State& state) {
  const std::size_t n = static_cast<std::size_t>(state.range(0));
  const Synthetic s = synthetic_population(n, 11);
  Rng rng(12);
  std::vector<double> scores;
  std::vector<std::vector<int>> memberships;
  scores.reserve(n);
  memberships.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int a = static_cast<int>(i % 2);
    const int b = static_cast<int>((i / 2) % 2);
    const double shift = 0.15 * (2 * a - 1) + 0.1 * (2 * b - 1);
    scores.push_back(std::clamp(s.truth[i] + shift, 0.0, 1.0));
    memberships.push_back({0, 1 + a, 3 + b});
  }
  CalibrationConfig cfg;
  for (auto _ : state) {
    benchmark::DoNotOptimize(multicalibrate(scores, s.labels, memberships, cfg));
  }
}
BENCHMARK(BM_Multicalibrate)->Arg(1000)->Arg(5000);

static void BM_ApplyCalibrator(benchmark::State& state) {
  const Synthetic s = synthetic_population(5000, 21);
  std::vector<double> scores = s.truth;
  std::vector<std::vector<int>> memberships(scores.size(),
                                            std::vector<int>{0});
  CalibrationConfig cfg;
  const Calibrator calibrator =
      multicalibrate(scores, s.labels, memberships, cfg);
  for (auto _ : state) {
    benchmark::DoNotOptimize(apply_calibrator(calibrator, scores, memberships));
  }
}
BENCHMARK(BM_ApplyCalibrator);

static void BM_LogisticFit(benchmark::State& state) {
  const Synthetic s = synthetic_population(2000, 31);
  const FeatureMatrix X = noisy_features(s, 4, 32);
  for (auto _ : state) {
    benchmark::DoNotOptimize(fit_logistic_regression(X, s.labels, 1e-3, 33));
  }
}
BENCHMARK(BM_LogisticFit);

static void BM_SubsetSelection(benchmark::State& state) {
  const std::size_t cols = static_cast<std::size_t>(state.range(0));
  const Synthetic s = synthetic_population(1000, 41);
  const FeatureMatrix X = noisy_features(s, cols, 42);
  const CostModel cm =
      CostModel::standard(X.columns, CostModel::Sharing::Additive);
  int total = 0;
  for (const auto& kind : X.columns) total += standard_cost(kind).llm_calls;
  for (auto _ : state) {
    benchmark::DoNotOptimize(
        select_cost_effective(X, s.labels, cm, total, LossKind::Brier, 43));
  }
}
BENCHMARK(BM_SubsetSelection)->Arg(5)->Arg(8)->Arg(10)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
