#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "tcnn/dataset.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/matrix.hpp"
#include "tcnn/rng.hpp"
#include "tcnn/text.hpp"

namespace tcnn {

/// Hyperparameters of one sparse autoencoder.
struct AEHyper {
  std::size_t k = 16;      // hidden units == number of filters
  double rho = 0.03;       // target mean activation
  double beta = 1.0;       // sparsity weight
  double lambda = 1e-4;    // L2 weight on W1 and W2
  std::size_t max_iters = 400;
  double step_size = 0.1;  // initial line-search step
  std::uint64_t seed = 0;

  friend bool operator==(const AEHyper&, const AEHyper&) = default;
};

inline void validate(const AEHyper& h) {
  if (h.k == 0) throw ConfigError("autoencoder: k must be positive");
  if (!(h.rho > 0.0 && h.rho < 1.0)) throw ConfigError("autoencoder: rho must lie in (0, 1)");
  if (!(h.beta >= 0.0)) throw ConfigError("autoencoder: beta must be nonnegative");
  if (!(h.lambda >= 0.0)) throw ConfigError("autoencoder: lambda must be nonnegative");
  if (h.max_iters == 0) throw ConfigError("autoencoder: max_iters must be positive");
  if (!(h.step_size > 0.0)) throw ConfigError("autoencoder: step_size must be positive");
}

/// Encoder h = logistic(W1 x + b1), linear decoder x~ = W2 h + b2.
/// Also used as the gradient container (same shapes).
struct AEParams {
  std::size_t tau = 0;
  std::size_t k = 0;
  Matrix w1;               // k x tau; row j feeds hidden unit j
  std::vector<double> b1;  // k
  Matrix w2;               // tau x k
  std::vector<double> b2;  // tau

  AEParams() = default;
  AEParams(std::size_t tau_, std::size_t k_)
      : tau(tau_), k(k_), w1(k_, tau_), b1(k_, 0.0), w2(tau_, k_), b2(tau_, 0.0) {}

  bool shape_ok() const {
    return w1.rows() == k && w1.cols() == tau && b1.size() == k && w2.rows() == tau && w2.cols() == k &&
           b2.size() == tau;
  }

  /// Visits every scalar parameter in a fixed order (W1, b1, W2, b2).
  template <typename F>
  void for_each(F&& f) {
    for (auto& v : w1.data()) f(v);
    for (auto& v : b1) f(v);
    for (auto& v : w2.data()) f(v);
    for (auto& v : b2) f(v);
  }
  template <typename F>
  void for_each(F&& f) const {
    for (double v : w1.data()) f(v);
    for (double v : b1) f(v);
    for (double v : w2.data()) f(v);
    for (double v : b2) f(v);
  }

  std::size_t parameter_count() const { return 2 * tau * k + k + tau; }

  friend bool operator==(const AEParams&, const AEParams&) = default;
};

/// Uniform in [-r, r] with r = sqrt(6 / (tau + k)); zero biases.
inline AEParams init_params(std::size_t tau, std::size_t k, std::uint64_t seed) {
  AEParams p(tau, k);
  Rng rng(seed);
  const double r = std::sqrt(6.0 / static_cast<double>(tau + k));
  std::uniform_real_distribution<double> u(-r, r);
  for (auto& v : p.w1.data()) v = u(rng);
  for (auto& v : p.w2.data()) v = u(rng);
  return p;
}

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

struct ForwardResult {
  std::vector<double> hidden;
  std::vector<double> reconstruction;
};

inline ForwardResult forward(const AEParams& p, std::span<const double> x) {
  TCNN_REQUIRE(p.shape_ok(), "forward: inconsistent parameter shapes");
  TCNN_REQUIRE(x.size() == p.tau, "forward: input length differs from tau");
  ForwardResult r{std::vector<double>(p.k), std::vector<double>(p.tau)};
  for (std::size_t j = 0; j < p.k; ++j) {
    double z = p.b1[j];
    auto w = p.w1.row(j);
    for (std::size_t s = 0; s < p.tau; ++s) z += w[s] * x[s];
    r.hidden[j] = logistic(z);
  }
  for (std::size_t s = 0; s < p.tau; ++s) {
    double y = p.b2[s];
    auto w = p.w2.row(s);
    for (std::size_t j = 0; j < p.k; ++j) y += w[j] * r.hidden[j];
    r.reconstruction[s] = y;
  }
  return r;
}

/// Sum over units of KL(rho || rho_hat_j) between Bernoulli distributions.
inline double kl_sparsity(double rho, std::span<const double> rho_hat) {
  if (!(rho > 0.0 && rho < 1.0)) throw DomainError("kl_sparsity: rho must lie in (0, 1)");
  double sum = 0.0;
  for (double q : rho_hat) {
    if (!(q > 0.0 && q < 1.0)) throw DomainError("kl_sparsity: rho_hat entries must lie in (0, 1)");
    sum += rho * std::log(rho / q) + (1.0 - rho) * std::log((1.0 - rho) / (1.0 - q));
  }
  return sum;
}

struct CostBreakdown {
  double total = 0.0;
  double reconstruction = 0.0;
  double sparsity = 0.0;
  double weight_decay = 0.0;
};

namespace detail {

inline double squared_norm(const Matrix& m) {
  double s = 0.0;
  for (double v : m.data()) s += v * v;
  return s;
}

// One pass over the batch; fills `grad` when non-null. The KL gradient needs
// the batch-mean activation, so hidden activations are cached.
inline CostBreakdown evaluate(const AEParams& p, const WindowSet& batch, const AEHyper& h, AEParams* grad) {
  TCNN_REQUIRE(p.shape_ok(), "autoencoder: inconsistent parameter shapes");
  TCNN_REQUIRE(batch.size() > 0, "autoencoder: empty batch");
  TCNN_REQUIRE(batch.windows.cols() == p.tau, "autoencoder: window length differs from tau");
  const std::size_t n = batch.size(), tau = p.tau, k = p.k;
  const double inv_n = 1.0 / static_cast<double>(n);

  Matrix hidden(n, k);
  std::vector<double> rho_hat(k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    auto x = batch.windows.row(i);
    auto hrow = hidden.row(i);
    for (std::size_t j = 0; j < k; ++j) {
      double z = p.b1[j];
      auto w = p.w1.row(j);
      for (std::size_t s = 0; s < tau; ++s) z += w[s] * x[s];
      hrow[j] = logistic(z);
      rho_hat[j] += hrow[j];
    }
  }
  for (auto& q : rho_hat) q *= inv_n;

  CostBreakdown c;
  if (h.beta > 0.0) {
    // saturated units would make the KL term infinite; report that as cost
    bool in_domain = std::all_of(rho_hat.begin(), rho_hat.end(), [](double q) { return q > 0.0 && q < 1.0; });
    c.sparsity = in_domain ? h.beta * kl_sparsity(h.rho, rho_hat) : std::numeric_limits<double>::infinity();
  }
  c.weight_decay = h.lambda * (squared_norm(p.w1) + squared_norm(p.w2));

  std::vector<double> sparse_delta(k, 0.0);
  if (grad) {
    *grad = AEParams(tau, k);
    if (h.beta > 0.0)
      for (std::size_t j = 0; j < k; ++j)
        sparse_delta[j] = h.beta * (-h.rho / rho_hat[j] + (1.0 - h.rho) / (1.0 - rho_hat[j])) * inv_n;
  }

  std::vector<double> err(tau), dh(k);
  double recon = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    auto x = batch.windows.row(i);
    auto hrow = hidden.row(i);
    for (std::size_t s = 0; s < tau; ++s) {
      double y = p.b2[s];
      auto w = p.w2.row(s);
      for (std::size_t j = 0; j < k; ++j) y += w[j] * hrow[j];
      err[s] = y - x[s];
      recon += err[s] * err[s];
    }
    if (!grad) continue;
    // d(recon)/d(x~) = err / n
    for (std::size_t s = 0; s < tau; ++s) {
      const double e = err[s] * inv_n;
      grad->b2[s] += e;
      auto gw = grad->w2.row(s);
      for (std::size_t j = 0; j < k; ++j) gw[j] += e * hrow[j];
    }
    for (std::size_t j = 0; j < k; ++j) {
      double back = sparse_delta[j];
      for (std::size_t s = 0; s < tau; ++s) back += p.w2(s, j) * err[s] * inv_n;
      dh[j] = back * hrow[j] * (1.0 - hrow[j]);
      grad->b1[j] += dh[j];
      auto gw = grad->w1.row(j);
      for (std::size_t s = 0; s < tau; ++s) gw[s] += dh[j] * x[s];
    }
  }
  c.reconstruction = 0.5 * recon * inv_n;
  c.total = c.reconstruction + c.sparsity + c.weight_decay;

  if (grad && h.lambda > 0.0) {
    for (std::size_t i = 0; i < p.w1.size(); ++i) grad->w1.data()[i] += 2.0 * h.lambda * p.w1.data()[i];
    for (std::size_t i = 0; i < p.w2.size(); ++i) grad->w2.data()[i] += 2.0 * h.lambda * p.w2.data()[i];
  }
  return c;
}

}  // namespace detail

/// J = (1/N) 1/2 sum ||x~ - x||^2 + beta * KL + lambda * (||W1||^2 + ||W2||^2).
inline CostBreakdown cost(const AEParams& p, const WindowSet& batch, const AEHyper& h) {
  return detail::evaluate(p, batch, h, nullptr);
}

inline AEParams gradient(const AEParams& p, const WindowSet& batch, const AEHyper& h) {
  AEParams g;
  detail::evaluate(p, batch, h, &g);
  return g;
}

// ---------------------------------------------------------------------------
// Training

/// Learned temporal filters: filter j is the encoder weight row of hidden unit j.
struct FilterBank {
  std::vector<std::vector<double>> filters;
  std::size_t tau = 0;
  AEHyper hyper;
  double final_cost = 0.0;

  std::size_t k() const noexcept { return filters.size(); }

  friend bool operator==(const FilterBank&, const FilterBank&) = default;
};

inline FilterBank filters_from(const AEParams& p, const AEHyper& h, double final_cost) {
  FilterBank bank;
  bank.tau = p.tau;
  bank.hyper = h;
  bank.final_cost = final_cost;
  for (std::size_t j = 0; j < p.k; ++j) {
    auto row = p.w1.row(j);
    bank.filters.emplace_back(row.begin(), row.end());
  }
  return bank;
}

struct TrainResult {
  FilterBank bank;
  AEParams params;
  std::vector<double> cost_history;  // cost at every accepted iterate, starting with the initial one
};

inline constexpr double kConvergenceTolerance = 1e-8;
inline constexpr double kMinStep = 1e-20;

/// Full-batch gradient descent with backtracking: halve the step until the
/// cost does not increase, then grow it by 1.1 for the next iteration.
inline TrainResult train_detailed(const WindowSet& batch, const AEHyper& h) {
  validate(h);
  TCNN_REQUIRE(batch.size() > 0, "train: empty batch");
  TCNN_REQUIRE(batch.windows.cols() == batch.tau && batch.tau > 0, "train: inconsistent window length");

  TrainResult out;
  AEParams params = init_params(batch.tau, h.k, h.seed);
  AEParams grad, candidate;
  double current = detail::evaluate(params, batch, h, &grad).total;
  if (!std::isfinite(current)) throw DivergenceError(0, "train: non-finite cost");
  out.cost_history.push_back(current);

  double step = h.step_size;
  for (std::size_t iter = 1; iter <= h.max_iters; ++iter) {
    bool grad_finite = true;
    grad.for_each([&](double v) { grad_finite = grad_finite && std::isfinite(v); });
    if (!grad_finite) throw DivergenceError(iter, "train: non-finite gradient");

    bool accepted = false;
    double next = current;
    while (step > kMinStep) {
      candidate = params;
      auto apply = [&](Matrix& dst, const Matrix& g) {
        for (std::size_t i = 0; i < dst.size(); ++i) dst.data()[i] -= step * g.data()[i];
      };
      apply(candidate.w1, grad.w1);
      apply(candidate.w2, grad.w2);
      for (std::size_t j = 0; j < candidate.k; ++j) candidate.b1[j] -= step * grad.b1[j];
      for (std::size_t s = 0; s < candidate.tau; ++s) candidate.b2[s] -= step * grad.b2[s];
      next = detail::evaluate(candidate, batch, h, nullptr).total;
      if (std::isfinite(next) && next <= current) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;  // no descent direction at machine precision

    step *= 1.1;
    const double improvement = (current - next) / std::max(std::abs(current), 1e-300);
    params = std::move(candidate);
    current = next;
    out.cost_history.push_back(current);
    if (improvement < kConvergenceTolerance) break;
    current = detail::evaluate(params, batch, h, &grad).total;
  }

  out.bank = filters_from(params, h, current);
  out.params = std::move(params);
  return out;
}

inline FilterBank train(const WindowSet& batch, const AEHyper& h) { return train_detailed(batch, h).bank; }

// ---------------------------------------------------------------------------
// Serialization

inline constexpr const char* kBankMagic = "TCNN-BANK";

inline void write_bank(std::ostream& os, const FilterBank& b) {
  os << "magic=" << kBankMagic << '\n'
     << "version=1\n"
     << "tau=" << b.tau << '\n'
     << "k=" << b.k() << '\n'
     << "rho=" << text::format_double(b.hyper.rho) << '\n'
     << "beta=" << text::format_double(b.hyper.beta) << '\n'
     << "lambda=" << text::format_double(b.hyper.lambda) << '\n'
     << "max_iters=" << b.hyper.max_iters << '\n'
     << "step_size=" << text::format_double(b.hyper.step_size) << '\n'
     << "seed=" << b.hyper.seed << '\n'
     << "final_cost=" << text::format_double(b.final_cost) << "\n\n";
  for (const auto& f : b.filters) {
    TCNN_REQUIRE(f.size() == b.tau, "write_bank: filter length differs from tau");
    for (double v : f) text::write_f64_le(os, v);
  }
}

inline FilterBank read_bank(std::istream& is) {
  using K = ParseError::Kind;
  auto header = text::read_header(is);
  if (!header) throw ParseError(K::kMalformedHeader, "filter bank: malformed header");
  auto get = [&](const char* key) -> const std::string& {
    auto it = header->find(key);
    if (it == header->end()) throw ParseError(K::kMalformedHeader, std::string("filter bank: missing ") + key);
    return it->second;
  };
  if (get("magic") != kBankMagic) throw ParseError(K::kMalformedHeader, "filter bank: bad magic");
  if (get("version") != "1") throw ParseError(K::kUnknownVersion, "filter bank: unknown version " + get("version"));
  auto tau = text::parse_int<std::size_t>(get("tau"));
  auto k = text::parse_int<std::size_t>(get("k"));
  auto rho = text::parse_double(get("rho"));
  auto beta = text::parse_double(get("beta"));
  auto lambda = text::parse_double(get("lambda"));
  auto iters = text::parse_int<std::size_t>(get("max_iters"));
  auto step = text::parse_double(get("step_size"));
  auto seed = text::parse_int<std::uint64_t>(get("seed"));
  auto final_cost = text::parse_double(get("final_cost"));
  if (!tau || !k || !rho || !beta || !lambda || !iters || !step || !seed || !final_cost)
    throw ParseError(K::kMalformedHeader, "filter bank: non-numeric header field");
  if (*tau == 0 || *k == 0) throw ParseError(K::kInvariantViolation, "filter bank: tau and k must be positive");

  FilterBank b;
  b.tau = *tau;
  b.hyper = AEHyper{*k, *rho, *beta, *lambda, *iters, *step, *seed};
  b.final_cost = *final_cost;
  std::vector<unsigned char> buf(8 * *tau);
  for (std::size_t j = 0; j < *k; ++j) {
    is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    if (static_cast<std::size_t>(is.gcount()) != buf.size())
      throw ParseError(K::kDimensionMismatch, "filter bank: payload shorter than k*tau values");
    std::vector<double> f(*tau);
    for (std::size_t s = 0; s < *tau; ++s) f[s] = text::decode_f64_le(buf.data() + 8 * s);
    b.filters.push_back(std::move(f));
  }
  return b;
}

inline void save_bank(const FilterBank& b, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_bank(os, b);
}

inline FilterBank load_bank(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  auto b = read_bank(is);
  if (is.peek() != std::char_traits<char>::eof())
    throw ParseError(ParseError::Kind::kDimensionMismatch, "filter bank: trailing bytes after payload");
  return b;
}

}  // namespace tcnn
