#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <numeric>

#include "oracles.hpp"
#include "tcnn/hyperopt.hpp"

using namespace tcnn;

namespace {

FilterBank bank_of(std::vector<std::vector<double>> filters) {
  FilterBank b;
  b.tau = filters.front().size();
  b.filters = std::move(filters);
  return b;
}

FilterBank random_bank(std::size_t tau, std::size_t k, std::mt19937_64& rng) {
  FilterBank b;
  b.tau = tau;
  for (std::size_t j = 0; j < k; ++j) b.filters.push_back(oracle::random_vector(tau, rng));
  return b;
}

// k zero-mean, mutually orthogonal filters of length tau >= k + 1.
FilterBank orthogonal_bank(std::size_t tau, std::size_t k, std::mt19937_64& rng) {
  std::vector<std::vector<double>> basis;
  for (std::size_t j = 0; j < k; ++j) {
    auto v = oracle::random_vector(tau, rng);
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(tau);
    for (auto& x : v) x -= mean;
    for (const auto& b : basis) {
      double dot = 0, nn = 0;
      for (std::size_t s = 0; s < tau; ++s) {
        dot += v[s] * b[s];
        nn += b[s] * b[s];
      }
      for (std::size_t s = 0; s < tau; ++s) v[s] -= dot / nn * b[s];
    }
    basis.push_back(v);
  }
  return bank_of(basis);
}

}  // namespace

TEST(Correlation, UnitDiagonalAndSymmetric) {
  std::mt19937_64 rng(1);
  const auto r = filter_correlation(random_bank(6, 10, rng));
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(r(i, i), 1.0);
    for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(r(i, j), r(j, i));
  }
}

TEST(Correlation, NegatedFilter) {
  const auto r = filter_correlation(bank_of({{1, 2, 4, 3}, {-1, -2, -4, -3}}));
  EXPECT_NEAR(r(0, 1), -1.0, 1e-15);
}

TEST(Correlation, MatchesTwoPassOracle) {
  std::mt19937_64 rng(2);
  const auto bank = random_bank(9, 12, rng);
  const auto r = filter_correlation(bank);
  for (std::size_t i = 0; i < 12; ++i)
    for (std::size_t j = 0; j < 12; ++j)
      EXPECT_NEAR(r(i, j), oracle::pearson(bank.filters[i], bank.filters[j]), 1e-12);
}

TEST(Correlation, ZeroVarianceNamesFilter) {
  try {
    filter_correlation(bank_of({{1, 2, 3}, {2, 2, 2}, {0, 1, 0}}));
    FAIL();
  } catch (const DegenerateFilterError& e) {
    EXPECT_EQ(e.filter(), 1u);
  }
}

TEST(Jacobi, MatchesEigenSolver) {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 2 + rng() % 20;
    auto a = oracle::random_matrix(n, n, rng);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < i; ++j) a(i, j) = a(j, i);
    auto got = jacobi_eigenvalues(a);
    auto expect = oracle::eigenvalues(a);
    std::sort(got.begin(), got.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_NEAR(got[i], expect[i], 1e-10);
  }
}

TEST(Distance, ZeroForUncorrelated) {
  std::mt19937_64 rng(4);
  for (std::size_t k : {2u, 5u, 8u}) EXPECT_NEAR(decorrelation_distance(orthogonal_bank(k + 3, k, rng)), 0.0, 1e-9);
}

TEST(Distance, IdenticalFilters) {
  const std::vector<double> f{0.3, -1, 2, 0.5, 0, 1};
  EXPECT_NEAR(decorrelation_distance(bank_of({f, f})), 2.0, 1e-12);
  for (std::size_t k : {3u, 7u, 16u}) {
    std::vector<std::vector<double>> fs(k, f);
    EXPECT_NEAR(decorrelation_distance(bank_of(fs)), 2.0 * static_cast<double>(k - 1), 1e-9);
  }
}

TEST(Distance, MatchesIndependentEigenvalues) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const auto bank = random_bank(6 + rng() % 4, 2 + rng() % 15, rng);
    double expect = 0.0;
    for (double l : oracle::eigenvalues(filter_correlation(bank))) expect += std::abs(l - 1.0);
    EXPECT_NEAR(decorrelation_distance(bank), expect, 1e-8);
    EXPECT_NEAR(decorrelation_distance(bank, true), expect / static_cast<double>(bank.k()), 1e-8);
  }
}

TEST(Distance, TraceEqualsK) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto bank = random_bank(9, 2 + rng() % 20, rng);
    const auto eig = jacobi_eigenvalues(filter_correlation(bank));
    EXPECT_NEAR(std::accumulate(eig.begin(), eig.end(), 0.0), static_cast<double>(bank.k()), 1e-9);
  }
}

TEST(Distance, InvariantUnderReorderAndSignFlip) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    auto bank = random_bank(8, 6, rng);
    const double base = decorrelation_distance(bank);
    std::shuffle(bank.filters.begin(), bank.filters.end(), rng);
    for (auto& f : bank.filters)
      if (rng() % 2)
        for (auto& v : f) v = -v;
    EXPECT_NEAR(decorrelation_distance(bank), base, 1e-9);
  }
}

TEST(Grid, SinglePoint) {
  std::mt19937_64 rng(8);
  WindowSet ws;
  ws.tau = 6;
  ws.windows = oracle::random_matrix(80, 6, rng);
  HyperGrid g;
  g.k_values = {3};
  g.rho_values = {0.05};
  g.beta_values = {1.0};
  const auto r = grid_search(ws, g, AEHyper{3, 0.05, 1.0, 1e-4, 20, 0.1, 1});
  ASSERT_EQ(r.entries.size(), 1u);
  EXPECT_EQ(r.best, 0u);
  EXPECT_TRUE(std::isfinite(r.entries[0].distance));
}

TEST(Grid, InjectedBanksSelectArgmin) {
  WindowSet ws;
  ws.tau = 4;
  ws.windows = Matrix(1, 4);
  // Three banks whose distances are 0.5, 0.2 and 0.9 by construction:
  // two filters with correlation c give eigenvalues 1 +- c, distance 2|c|.
  auto two_filters = [](double c) {
    // x = (1,-1,1,-1)/2, y = (1,1,-1,-1)/2 orthonormal and zero mean
    const std::vector<double> x{0.5, -0.5, 0.5, -0.5}, y{0.5, 0.5, -0.5, -0.5};
    std::vector<double> f(4);
    for (int s = 0; s < 4; ++s) f[static_cast<std::size_t>(s)] = c * x[static_cast<std::size_t>(s)] + std::sqrt(1 - c * c) * y[static_cast<std::size_t>(s)];
    return bank_of({x, f});
  };
  const std::map<double, FilterBank> by_rho{{0.1, two_filters(0.25)}, {0.2, two_filters(0.1)}, {0.3, two_filters(0.45)}};
  HyperGrid g;
  g.k_values = {2};
  g.rho_values = {0.1, 0.2, 0.3};
  g.beta_values = {1.0};
  const auto r = grid_search(ws, g, AEHyper{}, false, [&](const WindowSet&, const AEHyper& h) { return by_rho.at(h.rho); });
  ASSERT_EQ(r.entries.size(), 3u);
  EXPECT_NEAR(r.entries[0].distance, 0.5, 1e-12);
  EXPECT_NEAR(r.entries[1].distance, 0.2, 1e-12);
  EXPECT_NEAR(r.entries[2].distance, 0.9, 1e-12);
  EXPECT_EQ(r.best, 1u);
}

TEST(Grid, TiesPreferSmallerHyperparameters) {
  WindowSet ws;
  ws.tau = 3;
  ws.windows = Matrix(1, 3);
  const auto same = bank_of({{1, 0, 0}, {0, 1, 0}});
  HyperGrid g;
  g.k_values = {5, 2};
  g.rho_values = {0.2, 0.1};
  g.beta_values = {3.0, 1.0};
  const auto r = grid_search(ws, g, AEHyper{}, false, [&](const WindowSet&, const AEHyper&) { return same; });
  const auto& best = r.entries[r.best].hyper;
  EXPECT_EQ(best.k, 2u);
  EXPECT_EQ(best.rho, 0.1);
  EXPECT_EQ(best.beta, 1.0);
}

TEST(Grid, DivergenceRecordedAsInfinity) {
  WindowSet ws;
  ws.tau = 3;
  ws.windows = Matrix(1, 3);
  HyperGrid g;
  g.k_values = {2, 3};
  g.rho_values = {0.1};
  g.beta_values = {1.0};
  const auto ok = bank_of({{1, 0, 0}, {0, 1, 0}});
  const auto r = grid_search(ws, g, AEHyper{}, false, [&](const WindowSet&, const AEHyper& h) {
    if (h.k == 2) throw DivergenceError(3, "boom");
    return ok;
  });
  EXPECT_TRUE(std::isinf(r.entries[0].distance));
  EXPECT_EQ(r.best, 1u);
}

TEST(Grid, BestIsBruteForceArgminAndSeedsDiffer) {
  std::mt19937_64 rng(9);
  WindowSet ws;
  ws.tau = 6;
  ws.windows = oracle::random_matrix(100, 6, rng, -2, 2);
  HyperGrid g;
  g.k_values = {3, 4};
  g.rho_values = {0.03, 0.27};
  g.beta_values = {1.0, 5.0};
  const auto r = grid_search(ws, g, AEHyper{3, 0.05, 1.0, 1e-4, 15, 0.1, 21});
  ASSERT_EQ(r.entries.size(), g.size());
  std::size_t argmin = 0;
  std::set<std::uint64_t> seeds;
  for (std::size_t i = 0; i < r.entries.size(); ++i) {
    if (r.entries[i].distance < r.entries[argmin].distance) argmin = i;
    seeds.insert(r.entries[i].hyper.seed);
  }
  EXPECT_EQ(r.best, argmin);
  EXPECT_EQ(seeds.size(), r.entries.size());
}

TEST(Grid, DefaultSearchSpace) {
  const auto g1 = HyperGrid::layer1_default();
  EXPECT_EQ(g1.k_values.front(), 9u);
  EXPECT_EQ(g1.k_values.back(), 25u);
  EXPECT_EQ(g1.rho_values, (std::vector<double>{0.01, 0.03, 0.09, 0.27}));
  EXPECT_EQ(g1.beta_values, (std::vector<double>{1, 3, 5}));
  const auto g2 = HyperGrid::layer2_default();
  EXPECT_EQ(g2.k_values.front(), 4u);
  EXPECT_EQ(g2.k_values.back(), 9u);
  HyperGrid bad = g1;
  bad.rho_values = {0.1, 0.1};
  EXPECT_THROW(validate(bad), ConfigError);
}
