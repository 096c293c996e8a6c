#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tcnn/convnet.hpp"
#include "tcnn/dataset.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/hrf.hpp"
#include "tcnn/matrix.hpp"

namespace tcnn {

/// One row per labeled sample, in label order.
struct DesignMatrix {
  Matrix features;
  std::vector<int> labels;
  std::vector<Phase> phases;

  std::size_t rows() const noexcept { return features.rows(); }
  std::size_t feature_dim() const noexcept { return features.cols(); }

  friend bool operator==(const DesignMatrix&, const DesignMatrix&) = default;
};

/// Design matrix whose row i is column labels[i].column of `representation`.
inline DesignMatrix extract_labeled_columns(const Matrix& representation, std::span<const Label> labels) {
  DesignMatrix dm;
  dm.features = Matrix(labels.size(), representation.rows());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    TCNN_REQUIRE(labels[i].column < representation.cols(), "label column outside the representation");
    for (std::size_t r = 0; r < representation.rows(); ++r)
      dm.features(i, r) = representation(r, labels[i].column);
    dm.labels.push_back(labels[i].class_id);
    dm.phases.push_back(labels[i].phase);
  }
  return dm;
}

/// Rows of `dm` whose phase equals `phase`.
inline DesignMatrix select_phase(const DesignMatrix& dm, Phase phase) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < dm.rows(); ++i)
    if (dm.phases[i] == phase) keep.push_back(i);
  DesignMatrix out;
  out.features = Matrix(keep.size(), dm.feature_dim());
  for (std::size_t r = 0; r < keep.size(); ++r) {
    auto src = dm.features.row(keep[r]);
    std::copy(src.begin(), src.end(), out.features.row(r).begin());
    out.labels.push_back(dm.labels[keep[r]]);
    out.phases.push_back(dm.phases[keep[r]]);
  }
  return out;
}

inline DesignMatrix raw_mvpa_features(const VTDataset& d) {
  TCNN_REQUIRE(!d.labels.empty(), "raw_mvpa_features: dataset has no labels");
  return extract_labeled_columns(d.values, d.labels);
}

/// Every voxel correlated with the 6-tap HRF (same alignment as the
/// convolutional blocks), sampled at the labeled columns.
inline DesignMatrix hrf_mvpa_features(const VTDataset& d) {
  TCNN_REQUIRE(!d.labels.empty(), "hrf_mvpa_features: dataset has no labels");
  const auto kernel = hrf_kernel(d.tr_seconds, 6);
  return extract_labeled_columns(temporal_convolve(d.values, kernel.taps), d.labels);
}

/// Concatenates columns t..t+window-1 of every voxel, voxel-major.
inline DesignMatrix t_mvpa_features(const VTDataset& d, std::size_t window = 6) {
  TCNN_REQUIRE(!d.labels.empty(), "t_mvpa_features: dataset has no labels");
  TCNN_REQUIRE(window >= 1, "t_mvpa_features: window must be positive");
  DesignMatrix dm;
  dm.features = Matrix(d.labels.size(), d.m() * window);
  for (std::size_t i = 0; i < d.labels.size(); ++i) {
    const auto& l = d.labels[i];
    if (l.column + window > d.n())
      throw ContractViolation("t_mvpa_features: label at column " + std::to_string(l.column) +
                              " leaves fewer than " + std::to_string(window) + " samples");
    auto dst = dm.features.row(i);
    for (std::size_t v = 0; v < d.m(); ++v)
      for (std::size_t s = 0; s < window; ++s) dst[v * window + s] = d.values(v, l.column + s);
    dm.labels.push_back(l.class_id);
    dm.phases.push_back(l.phase);
  }
  return dm;
}

inline DesignMatrix cnn_features(const VTDataset& d, const PipelineModel& model, int depth) {
  TCNN_REQUIRE(!d.labels.empty(), "cnn_features: dataset has no labels");
  return extract_labeled_columns(transform(d, model, depth), d.labels);
}

// ---------------------------------------------------------------------------
// k-nearest neighbours

enum class Metric { kEuclidean, kCosine };

inline const char* metric_name(Metric m) { return m == Metric::kEuclidean ? "euclidean" : "cosine"; }

inline Metric parse_metric(const std::string& s) {
  if (s == "euclidean") return Metric::kEuclidean;
  if (s == "cosine") return Metric::kCosine;
  throw UsageError("unknown metric '" + s + "' (expected euclidean or cosine)");
}

inline double distance(std::span<const double> a, std::span<const double> b, Metric metric) {
  if (metric == Metric::kEuclidean) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const double d = a[i] - b[i];
      s += d * d;
    }
    return std::sqrt(s);
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 1.0;
  return 1.0 - dot / std::sqrt(na * nb);
}

/// Majority vote among the k nearest training rows. Neighbour ties go to the
/// lower training index; vote ties to the smaller summed distance, then the
/// smaller class id.
inline std::vector<int> knn_classify(const Matrix& train, std::span<const int> train_labels, const Matrix& test,
                                     std::size_t k, Metric metric = Metric::kEuclidean) {
  TCNN_REQUIRE(train.rows() > 0, "knn_classify: empty training set");
  TCNN_REQUIRE(train_labels.size() == train.rows(), "knn_classify: label count differs from training rows");
  TCNN_REQUIRE(train.cols() == test.cols(), "knn_classify: feature dimensions differ");
  TCNN_REQUIRE(k >= 1 && k <= train.rows(), "knn_classify: k must lie in [1, training rows]");

  std::vector<int> predictions;
  predictions.reserve(test.rows());
  std::vector<std::pair<double, std::size_t>> dist(train.rows());
  for (std::size_t q = 0; q < test.rows(); ++q) {
    for (std::size_t i = 0; i < train.rows(); ++i) dist[i] = {distance(test.row(q), train.row(i), metric), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());

    std::map<int, std::pair<std::size_t, double>> votes;  // class -> (count, summed distance)
    for (std::size_t j = 0; j < k; ++j) {
      auto& v = votes[train_labels[dist[j].second]];
      ++v.first;
      v.second += dist[j].first;
    }
    auto best = votes.begin();
    for (auto it = std::next(votes.begin()); it != votes.end(); ++it) {
      const auto& [count, sum] = it->second;
      if (count > best->second.first || (count == best->second.first && sum < best->second.second)) best = it;
    }
    predictions.push_back(best->first);
  }
  return predictions;
}

inline std::vector<int> knn_classify(const DesignMatrix& train, const DesignMatrix& test, std::size_t k,
                                     Metric metric = Metric::kEuclidean) {
  return knn_classify(train.features, train.labels, test.features, k, metric);
}

}  // namespace tcnn
