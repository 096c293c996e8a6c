#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <set>
#include <tuple>
#include <vector>

#include "tcnn/autoencoder.hpp"
#include "tcnn/dataset.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/matrix.hpp"
#include "tcnn/rng.hpp"

namespace tcnn {

/// Pearson correlation between every pair of filters (over their tau taps).
inline Matrix filter_correlation(const FilterBank& bank) {
  const std::size_t k = bank.k();
  TCNN_REQUIRE(k >= 2, "filter_correlation: need at least two filters");
  std::vector<std::vector<double>> centered(k);
  std::vector<double> norm(k);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& f = bank.filters[i];
    TCNN_REQUIRE(f.size() == bank.tau && !f.empty(), "filter_correlation: filter length differs from tau");
    double mean = 0.0;
    for (double v : f) mean += v;
    mean /= static_cast<double>(f.size());
    centered[i].resize(f.size());
    double ss = 0.0;
    for (std::size_t s = 0; s < f.size(); ++s) {
      centered[i][s] = f[s] - mean;
      ss += centered[i][s] * centered[i][s];
    }
    if (!(ss > 0.0)) throw DegenerateFilterError(i);
    norm[i] = std::sqrt(ss);
  }
  Matrix r(k, k);
  for (std::size_t i = 0; i < k; ++i) {
    r(i, i) = 1.0;
    for (std::size_t j = i + 1; j < k; ++j) {
      double dot = 0.0;
      for (std::size_t s = 0; s < bank.tau; ++s) dot += centered[i][s] * centered[j][s];
      const double c = std::clamp(dot / (norm[i] * norm[j]), -1.0, 1.0);
      r(i, j) = r(j, i) = c;
    }
  }
  return r;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, unsorted.
/// Sweeps until the off-diagonal Frobenius norm drops below `tol`.
inline std::vector<double> jacobi_eigenvalues(Matrix a, double tol = 1e-12, int max_sweeps = 100) {
  const std::size_t n = a.rows();
  TCNN_REQUIRE(a.cols() == n, "jacobi_eigenvalues: matrix must be square");
  auto off_norm = [&] {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        if (i != j) s += a(i, j) * a(i, j);
    return std::sqrt(s);
  };
  for (int sweep = 0; sweep < max_sweeps && off_norm() >= tol; ++sweep) {
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t r = 0; r < n; ++r) {
          const double arp = a(r, p), arq = a(r, q);
          a(r, p) = c * arp - s * arq;
          a(r, q) = s * arp + c * arq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double apr = a(p, r), aqr = a(q, r);
          a(p, r) = c * apr - s * aqr;
          a(q, r) = s * apr + c * aqr;
        }
        a(p, q) = a(q, p) = 0.0;
      }
    }
  }
  std::vector<double> eig(n);
  for (std::size_t i = 0; i < n; ++i) eig[i] = a(i, i);
  return eig;
}

/// L1 distance between the eigenvalues of the filter correlation matrix and
/// a vector of ones. Zero iff the filters are mutually uncorrelated.
inline double decorrelation_distance(const FilterBank& bank, bool normalized = false) {
  const Matrix r = filter_correlation(bank);
  const auto eig = jacobi_eigenvalues(r);
  double trace = 0.0, dist = 0.0;
  for (double l : eig) {
    trace += l;
    dist += std::abs(l - 1.0);
  }
  if (std::abs(trace - static_cast<double>(bank.k())) > 1e-9)
    throw DomainError("decorrelation_distance: eigenvalue sum departs from k");
  return normalized ? dist / static_cast<double>(bank.k()) : dist;
}

// ---------------------------------------------------------------------------
// Grid search

struct HyperGrid {
  std::vector<std::size_t> k_values;
  std::vector<double> rho_values{0.01, 0.03, 0.09, 0.27};
  std::vector<double> beta_values{1.0, 3.0, 5.0};
  double lambda_value = 1e-4;

  static HyperGrid layer1_default() {
    HyperGrid g;
    for (std::size_t k = 9; k <= 25; ++k) g.k_values.push_back(k);
    return g;
  }
  static HyperGrid layer2_default() {
    HyperGrid g;
    for (std::size_t k = 4; k <= 9; ++k) g.k_values.push_back(k);
    return g;
  }

  std::size_t size() const { return k_values.size() * rho_values.size() * beta_values.size(); }
};

inline void validate(const HyperGrid& g) {
  auto unique = [](auto v) {
    std::sort(v.begin(), v.end());
    return std::adjacent_find(v.begin(), v.end()) == v.end();
  };
  if (g.k_values.empty() || g.rho_values.empty() || g.beta_values.empty())
    throw ConfigError("hyper grid: every axis needs at least one value");
  if (!unique(g.k_values) || !unique(g.rho_values) || !unique(g.beta_values))
    throw ConfigError("hyper grid: axis values must be unique");
  for (auto k : g.k_values)
    if (k == 0) throw ConfigError("hyper grid: k values must be positive");
  for (auto r : g.rho_values)
    if (!(r > 0.0 && r < 1.0)) throw ConfigError("hyper grid: rho values must lie in (0, 1)");
  for (auto b : g.beta_values)
    if (!(b >= 0.0)) throw ConfigError("hyper grid: beta values must be nonnegative");
  if (!(g.lambda_value >= 0.0)) throw ConfigError("hyper grid: lambda must be nonnegative");
}

struct GridEntry {
  AEHyper hyper;
  double distance = 0.0;  // +inf when training failed
  FilterBank bank;
};

struct GridResult {
  std::vector<GridEntry> entries;
  std::size_t best = 0;
};

using Trainer = std::function<FilterBank(const WindowSet&, const AEHyper&)>;

/// Lowest distance wins; ties go to smaller k, then rho, then beta.
inline std::size_t best_entry(const std::vector<GridEntry>& entries) {
  TCNN_REQUIRE(!entries.empty(), "best_entry: no entries");
  auto key = [&](std::size_t i) {
    const auto& e = entries[i];
    return std::make_tuple(e.distance, e.hyper.k, e.hyper.rho, e.hyper.beta);
  };
  std::size_t best = 0;
  for (std::size_t i = 1; i < entries.size(); ++i)
    if (key(i) < key(best)) best = i;
  return best;
}

/// Trains one autoencoder per (k, rho, beta) point; point i uses seed
/// derive_seed(base.seed, "grid/i"). `trainer` is a seam for tests.
inline GridResult grid_search(const WindowSet& windows, const HyperGrid& grid, const AEHyper& base,
                              bool normalized = false, const Trainer& trainer = Trainer(train)) {
  TCNN_REQUIRE(windows.size() > 0, "grid_search: empty window set");
  validate(grid);
  GridResult result;
  std::size_t index = 0;
  for (auto k : grid.k_values) {
    for (auto rho : grid.rho_values) {
      for (auto beta : grid.beta_values) {
        AEHyper h = base;
        h.k = k;
        h.rho = rho;
        h.beta = beta;
        h.lambda = grid.lambda_value;
        h.seed = derive_seed(base.seed, "grid/" + std::to_string(index++));
        GridEntry e{h, std::numeric_limits<double>::infinity(), {}};
        try {
          e.bank = trainer(windows, h);
          e.distance = decorrelation_distance(e.bank, normalized);
        } catch (const DivergenceError&) {
        } catch (const DegenerateFilterError&) {
        }
        result.entries.push_back(std::move(e));
      }
    }
  }
  result.best = best_entry(result.entries);
  return result;
}

}  // namespace tcnn
