#pragma once

// Independent reference implementations used only by the test suites. None
// of these call into the library's numeric kernels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Dense>
#include <boost/multiprecision/cpp_int.hpp>

#include "tcnn/autoencoder.hpp"
#include "tcnn/dataset.hpp"
#include "tcnn/matrix.hpp"

namespace tcnn::oracle {

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (auto& v : m.data()) v = u(rng);
  return m;
}

inline std::vector<double> random_vector(std::size_t n, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

// Brute-force forward correlation, written from the definition.
inline Matrix convolve(const Matrix& in, const std::vector<double>& f) {
  Matrix out(in.rows(), in.cols());
  for (std::size_t v = 0; v < in.rows(); ++v)
    for (std::size_t t = 0; t < in.cols(); ++t) {
      double acc = 0.0;
      for (std::size_t s = 0; s < f.size(); ++s) {
        const double x = t + s < in.cols() ? in(v, t + s) : 0.0;
        acc += f[s] * x;
      }
      out(v, t) = acc;
    }
  return out;
}

inline Matrix group_max(const Matrix& in, std::size_t delta, const std::vector<std::size_t>& order) {
  Matrix out(in.rows() / delta, in.cols());
  for (std::size_t g = 0; g < out.rows(); ++g)
    for (std::size_t t = 0; t < in.cols(); ++t) {
      std::vector<double> group;
      for (std::size_t i = 0; i < delta; ++i) group.push_back(in(order[g * delta + i], t));
      out(g, t) = *std::max_element(group.begin(), group.end());
    }
  return out;
}

// Sparse autoencoder cost in long double, written from the formula.
inline long double ae_cost(const AEParams& p, const Matrix& x, double rho, double beta, double lambda) {
  const std::size_t n = x.rows();
  std::vector<std::vector<long double>> h(n, std::vector<long double>(p.k));
  std::vector<long double> mean(p.k, 0.0L);
  long double recon = 0.0L;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p.k; ++j) {
      long double z = p.b1[j];
      for (std::size_t s = 0; s < p.tau; ++s) z += static_cast<long double>(p.w1(j, s)) * x(i, s);
      h[i][j] = 1.0L / (1.0L + std::exp(-z));
      mean[j] += h[i][j] / static_cast<long double>(n);
    }
    for (std::size_t s = 0; s < p.tau; ++s) {
      long double y = p.b2[s];
      for (std::size_t j = 0; j < p.k; ++j) y += static_cast<long double>(p.w2(s, j)) * h[i][j];
      recon += (y - x(i, s)) * (y - x(i, s));
    }
  }
  long double kl = 0.0L;
  for (auto q : mean) kl += rho * std::log(rho / q) + (1.0L - rho) * std::log((1.0L - rho) / (1.0L - q));
  long double decay = 0.0L;
  for (double v : p.w1.data()) decay += static_cast<long double>(v) * v;
  for (double v : p.w2.data()) decay += static_cast<long double>(v) * v;
  return recon / (2.0L * n) + (beta > 0 ? beta * kl : 0.0L) + lambda * decay;
}

// Central finite differences of ae_cost over every parameter, in the same
// order as AEParams::for_each.
inline std::vector<long double> fd_gradient(const AEParams& p, const Matrix& x, double rho, double beta,
                                            double lambda, double step = 1e-5) {
  std::vector<long double> g;
  AEParams q = p;
  std::vector<double*> slots;
  q.for_each([&](double& v) { slots.push_back(&v); });
  for (double* slot : slots) {
    const double orig = *slot;
    *slot = orig + step;
    const long double up = ae_cost(q, x, rho, beta, lambda);
    *slot = orig - step;
    const long double down = ae_cost(q, x, rho, beta, lambda);
    *slot = orig;
    g.push_back((up - down) / (2.0L * step));
  }
  return g;
}

inline std::set<std::size_t> exclusion(const VTDataset& d, std::size_t tau1, std::size_t tau2) {
  std::set<std::size_t> out;
  const long long r = static_cast<long long>(std::max(tau1, tau2)) - 1;
  for (const auto& l : d.labels) {
    if (l.phase != Phase::kRetrieve) continue;
    for (long long off = -r; off <= r; ++off) {
      const long long c = static_cast<long long>(l.column) + off;
      if (c >= 0 && c < static_cast<long long>(d.n())) out.insert(static_cast<std::size_t>(c));
    }
  }
  return out;
}

// Two-pass Pearson correlation.
inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const double n = static_cast<double>(a.size());
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= n;
  mb /= n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  return sab / std::sqrt(saa * sbb);
}

inline std::vector<double> eigenvalues(const Matrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(i, j);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(e, Eigen::EigenvaluesOnly);
  std::vector<double> out(solver.eigenvalues().data(), solver.eigenvalues().data() + solver.eigenvalues().size());
  return out;
}

// Exact upper binomial tail with rational arithmetic; chance = num/den.
inline double binomial_tail(unsigned n_correct, unsigned n_trials, long num, long den) {
  using boost::multiprecision::cpp_int;
  using boost::multiprecision::cpp_rational;
  cpp_rational p(num, den), q = 1 - p, sum = 0;
  cpp_int choose = 1;  // C(n, 0)
  for (unsigned i = 0; i <= n_trials; ++i) {
    if (i >= n_correct) {
      cpp_rational term = choose;
      for (unsigned a = 0; a < i; ++a) term *= p;
      for (unsigned b = 0; b < n_trials - i; ++b) term *= q;
      sum += term;
    }
    choose = choose * (n_trials - i) / (i + 1);
  }
  return static_cast<double>(sum);
}

// Exhaustive-sort kNN with the documented tie rules.
inline std::vector<int> knn(const Matrix& train, const std::vector<int>& labels, const Matrix& test, std::size_t k) {
  std::vector<int> out;
  for (std::size_t q = 0; q < test.rows(); ++q) {
    std::vector<std::pair<double, std::size_t>> d;
    for (std::size_t i = 0; i < train.rows(); ++i) {
      double s = 0;
      for (std::size_t c = 0; c < train.cols(); ++c) s += (test(q, c) - train(i, c)) * (test(q, c) - train(i, c));
      d.push_back({std::sqrt(s), i});
    }
    std::sort(d.begin(), d.end());
    std::map<int, std::pair<int, double>> votes;
    for (std::size_t j = 0; j < k; ++j) {
      votes[labels[d[j].second]].first += 1;
      votes[labels[d[j].second]].second += d[j].first;
    }
    int best = votes.begin()->first;
    for (auto& [cls, v] : votes) {
      auto& b = votes[best];
      if (v.first > b.first || (v.first == b.first && v.second < b.second)) best = cls;
    }
    out.push_back(best);
  }
  return out;
}

}  // namespace tcnn::oracle
