#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "tcnn/decode.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/rng.hpp"

namespace tcnn {

inline double accuracy(std::span<const int> predictions, std::span<const int> truth) {
  TCNN_REQUIRE(predictions.size() == truth.size(), "accuracy: length mismatch");
  TCNN_REQUIRE(!truth.empty(), "accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hits += predictions[i] == truth[i] ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

/// Exact upper tail P(X >= n_correct), X ~ Binomial(n_trials, chance).
/// Terms are formed in log space from accumulated log-factorials and summed
/// with a log-sum-exp, all in extended precision.
inline double binomial_pvalue(std::size_t n_correct, std::size_t n_trials, double chance) {
  TCNN_REQUIRE(n_trials >= 1, "binomial_pvalue: need at least one trial");
  TCNN_REQUIRE(n_correct <= n_trials, "binomial_pvalue: more successes than trials");
  TCNN_REQUIRE(chance > 0.0 && chance < 1.0, "binomial_pvalue: chance must lie in (0, 1)");
  if (n_correct == 0) return 1.0;

  std::vector<long double> log_fact(n_trials + 1, 0.0L);
  for (std::size_t i = 2; i <= n_trials; ++i) log_fact[i] = log_fact[i - 1] + std::log(static_cast<long double>(i));
  const long double lp = std::log(static_cast<long double>(chance));
  const long double lq = std::log1p(-static_cast<long double>(chance));

  std::vector<long double> terms;
  terms.reserve(n_trials - n_correct + 1);
  for (std::size_t i = n_correct; i <= n_trials; ++i)
    terms.push_back(log_fact[n_trials] - log_fact[i] - log_fact[n_trials - i] + static_cast<long double>(i) * lp +
                    static_cast<long double>(n_trials - i) * lq);
  const long double peak = *std::max_element(terms.begin(), terms.end());
  long double sum = 0.0L;
  for (auto t : terms) sum += std::exp(t - peak);
  return static_cast<double>(std::min(1.0L, std::exp(peak + std::log(sum))));
}

// ---------------------------------------------------------------------------
// Learning curves

struct LearningCurvePoint {
  std::size_t train_size = 0;
  double train_error = 0.0;
  double test_error = 0.0;
};

struct LearningCurve {
  std::vector<LearningCurvePoint> points;
  std::size_t step = 20;
};

inline constexpr double kLearningCurveTrainFraction = 0.75;

namespace detail {

inline Matrix take_rows(const Matrix& m, std::span<const std::size_t> idx) {
  Matrix out(idx.size(), m.cols());
  for (std::size_t r = 0; r < idx.size(); ++r) {
    auto src = m.row(idx[r]);
    std::copy(src.begin(), src.end(), out.row(r).begin());
  }
  return out;
}

}  // namespace detail

/// Holds out a seeded uniform 25% of the pool for testing, then grows the
/// training set from the rest in increments of `step` (the last increment may
/// be partial), recording kNN train and test error at each size.
inline LearningCurve learning_curve(const DesignMatrix& pool, std::size_t step, std::size_t k, Metric metric,
                                    std::uint64_t seed) {
  TCNN_REQUIRE(step >= 1, "learning_curve: step must be positive");
  TCNN_REQUIRE(pool.rows() >= 2 * step, "learning_curve: pool needs at least 2*step samples");
  TCNN_REQUIRE(k >= 1 && k <= step, "learning_curve: k must lie in [1, step]");

  const std::size_t total = pool.rows();
  const auto train_pool = static_cast<std::size_t>(std::floor(kLearningCurveTrainFraction * static_cast<double>(total)));
  std::vector<std::size_t> perm(total);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);

  const std::span<const std::size_t> train_order(perm.data(), train_pool);
  const std::span<const std::size_t> test_idx(perm.data() + train_pool, total - train_pool);
  const Matrix test = detail::take_rows(pool.features, test_idx);
  std::vector<int> test_labels;
  for (auto i : test_idx) test_labels.push_back(pool.labels[i]);

  LearningCurve curve;
  curve.step = step;
  std::vector<std::size_t> sizes;
  for (std::size_t s = step; s <= train_pool; s += step) sizes.push_back(s);
  if (train_pool % step != 0) sizes.push_back(train_pool);

  for (auto size : sizes) {
    auto idx = train_order.first(size);
    const Matrix train = detail::take_rows(pool.features, idx);
    std::vector<int> train_labels;
    for (auto i : idx) train_labels.push_back(pool.labels[i]);
    LearningCurvePoint p;
    p.train_size = size;
    p.train_error = 1.0 - accuracy(knn_classify(train, train_labels, train, k, metric), train_labels);
    p.test_error =
        test_labels.empty() ? 0.0 : 1.0 - accuracy(knn_classify(train, train_labels, test, k, metric), test_labels);
    curve.points.push_back(p);
  }
  return curve;
}

}  // namespace tcnn
