#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "tcnn/autoencoder.hpp"
#include "tcnn/dataset.hpp"
#include "tcnn/errors.hpp"
#include "tcnn/matrix.hpp"
#include "tcnn/text.hpp"

namespace tcnn {

/// Forward-looking correlation with zero tail padding:
///   out(v, t) = sum_s filter[s] * in(v, t + s),  in(v, c) = 0 for c >= n.
/// The output has the shape of the input.
inline Matrix temporal_convolve(const Matrix& in, std::span<const double> filter) {
  const std::size_t n = in.cols(), tau = filter.size();
  TCNN_REQUIRE(tau >= 1 && tau <= n, "temporal_convolve: filter longer than the time axis");
  Matrix out(in.rows(), n);
  for (std::size_t v = 0; v < in.rows(); ++v) {
    auto src = in.row(v);
    auto dst = out.row(v);
    for (std::size_t t = 0; t < n; ++t) {
      const std::size_t taps = std::min(tau, n - t);
      double acc = 0.0;
      for (std::size_t s = 0; s < taps; ++s) acc += filter[s] * src[t + s];
      dst[t] = acc;
    }
  }
  return out;
}

/// Permutes rows by `order`, then takes the column-wise max over consecutive
/// non-overlapping groups of `delta` rows.
inline Matrix spatial_max_pool(const Matrix& in, std::size_t delta, std::span<const std::size_t> order) {
  const std::size_t rows = in.rows(), n = in.cols();
  TCNN_REQUIRE(delta >= 1 && rows % delta == 0, "spatial_max_pool: delta must divide the row count");
  TCNN_REQUIRE(order.size() == rows, "spatial_max_pool: order length differs from row count");
  Matrix out(rows / delta, n);
  for (std::size_t g = 0; g < rows / delta; ++g) {
    auto dst = out.row(g);
    auto first = in.row(order[g * delta]);
    std::copy(first.begin(), first.end(), dst.begin());
    for (std::size_t i = 1; i < delta; ++i) {
      auto src = in.row(order[g * delta + i]);
      for (std::size_t t = 0; t < n; ++t) dst[t] = std::max(dst[t], src[t]);
    }
  }
  return out;
}

inline std::vector<std::size_t> identity_order(std::size_t rows) {
  std::vector<std::size_t> o(rows);
  std::iota(o.begin(), o.end(), std::size_t{0});
  return o;
}

/// Equally shaped response matrices plus the filter-index path that produced each.
struct ResponseStack {
  std::vector<Matrix> matrices;
  std::vector<std::vector<std::size_t>> provenance;

  std::size_t size() const noexcept { return matrices.size(); }
};

inline ResponseStack single_input(Matrix m) {
  ResponseStack s;
  s.matrices.push_back(std::move(m));
  s.provenance.emplace_back();
  return s;
}

/// One processing block: tanh(pool(convolve(input, filter))) for every input
/// and every filter of that input's bank. Responses are never summed across
/// filters. `banks` holds either one bank shared by all inputs or one per input.
inline ResponseStack apply_block(const ResponseStack& stack, std::span<const FilterBank> banks, std::size_t delta,
                                 std::span<const std::size_t> order) {
  TCNN_REQUIRE(!stack.matrices.empty(), "apply_block: empty stack");
  TCNN_REQUIRE(stack.provenance.size() == stack.matrices.size(), "apply_block: provenance length mismatch");
  TCNN_REQUIRE(banks.size() == 1 || banks.size() == stack.size(),
               "apply_block: need one shared bank or one bank per input");
  ResponseStack out;
  for (std::size_t i = 0; i < stack.size(); ++i) {
    const auto& bank = banks.size() == 1 ? banks[0] : banks[i];
    for (std::size_t f = 0; f < bank.k(); ++f) {
      Matrix r = spatial_max_pool(temporal_convolve(stack.matrices[i], bank.filters[f]), delta, order);
      for (auto& v : r.data()) v = std::tanh(v);
      out.matrices.push_back(std::move(r));
      auto path = stack.provenance[i];
      path.push_back(f);
      out.provenance.push_back(std::move(path));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

struct PipelineConfig {
  std::size_t tau1 = 6;
  std::size_t tau2 = 9;
  std::size_t delta1 = 2;
  std::size_t delta2 = 2;
  AEHyper layer1_hyper{16, 0.03, 1.0, 1e-4, 400, 0.1, 0};
  AEHyper layer2_hyper{4, 0.03, 1.0, 1e-4, 400, 0.1, 1};
  std::size_t windows = 10000;  // windows sampled per autoencoder
  std::uint64_t sampling_seed = 0;
};

inline void validate(const PipelineConfig& cfg, std::size_t m, std::size_t n) {
  if (cfg.tau1 == 0 || cfg.tau2 == 0 || cfg.tau1 > n || cfg.tau2 > n)
    throw ConfigError("pipeline: tau1 and tau2 must lie in [1, n]");
  if (cfg.delta1 == 0 || m % cfg.delta1 != 0) throw ConfigError("pipeline: delta1 must divide m");
  if (cfg.delta2 == 0 || (m / cfg.delta1) % cfg.delta2 != 0)
    throw ConfigError("pipeline: delta2 must divide m/delta1");
  if (cfg.windows == 0) throw ConfigError("pipeline: window count must be positive");
  validate(cfg.layer1_hyper);
  validate(cfg.layer2_hyper);
}

struct PipelineModel {
  FilterBank layer1;
  std::vector<FilterBank> layer2;  // one bank per layer-1 filter
  PipelineConfig config;
  std::vector<std::size_t> voxel_order;

  friend bool operator==(const PipelineModel& a, const PipelineModel& b) {
    return a.layer1 == b.layer1 && a.layer2 == b.layer2 && a.voxel_order == b.voxel_order &&
           a.config.tau1 == b.config.tau1 && a.config.tau2 == b.config.tau2 && a.config.delta1 == b.config.delta1 &&
           a.config.delta2 == b.config.delta2;
  }
};

/// Rows of the final representation: m*k1/delta1 (depth 1) or
/// m*k1*k2/(delta1*delta2) (depth 2).
inline std::size_t output_dim(std::size_t m, std::size_t k1, std::size_t k2, std::size_t delta1, std::size_t delta2,
                              int depth) {
  TCNN_REQUIRE(depth == 1 || depth == 2, "output_dim: depth must be 1 or 2");
  TCNN_REQUIRE(m > 0 && k1 > 0 && delta1 > 0 && m % delta1 == 0, "output_dim: delta1 must divide m");
  if (depth == 1) return m * k1 / delta1;
  TCNN_REQUIRE(k2 > 0 && delta2 > 0 && (m / delta1) % delta2 == 0, "output_dim: delta2 must divide m/delta1");
  return (m / delta1 / delta2) * k1 * k2;
}

/// Training windows collected for each autoencoder of the pipeline.
struct PretrainTrace {
  WindowSet layer1_windows;
  std::vector<WindowSet> layer2_windows;
};

/// Layer-2 autoencoder i uses seed layer1 seed + 1 + i. With depth 1 only
/// the first layer is trained.
inline PipelineModel pretrain(const VTDataset& d, const PipelineConfig& cfg, PretrainTrace* trace = nullptr,
                              int depth = 2) {
  TCNN_REQUIRE(depth == 1 || depth == 2, "pretrain: depth must be 1 or 2");
  validate(d);
  validate(cfg, d.m(), d.n());
  const ColumnSet excluded = test_exclusion_columns(d, cfg.tau1, cfg.tau2);

  PipelineModel model;
  model.config = cfg;
  model.voxel_order = d.voxel_order;

  auto w1 = sample_windows(d.values, cfg.tau1, cfg.windows, excluded, derive_seed(cfg.sampling_seed, "windows/1"));
  model.layer1 = train(w1, cfg.layer1_hyper);
  if (trace) trace->layer1_windows = std::move(w1);
  if (depth == 1) return model;

  const FilterBank shared[] = {model.layer1};
  const ResponseStack block1 = apply_block(single_input(d.values), shared, cfg.delta1, d.voxel_order);
  for (std::size_t i = 0; i < block1.size(); ++i) {
    AEHyper h = cfg.layer2_hyper;
    h.seed = cfg.layer1_hyper.seed + 1 + i;
    auto w2 = sample_windows(block1.matrices[i], cfg.tau2, cfg.windows, excluded,
                             derive_seed(cfg.sampling_seed, "windows/2/" + std::to_string(i)));
    model.layer2.push_back(train(w2, h));
    if (trace) trace->layer2_windows.push_back(std::move(w2));
  }
  return model;
}

inline ResponseStack block1_output(const Matrix& values, const PipelineModel& model) {
  const FilterBank shared[] = {model.layer1};
  return apply_block(single_input(values), shared, model.config.delta1, model.voxel_order);
}

/// Final representation, rows ordered by provenance path, n columns.
inline Matrix transform(const VTDataset& d, const PipelineModel& model, int depth) {
  TCNN_REQUIRE(depth == 1 || depth == 2, "transform: depth must be 1 or 2");
  TCNN_REQUIRE(model.voxel_order.size() == d.m(), "transform: model was trained on a different voxel count");
  TCNN_REQUIRE(model.layer2.size() == model.layer1.k() || depth == 1, "transform: layer-2 bank count mismatch");
  ResponseStack stack = block1_output(d.values, model);
  if (depth == 2) {
    const std::size_t rows = stack.matrices.front().rows();
    stack = apply_block(stack, model.layer2, model.config.delta2, identity_order(rows));
  }
  // apply_block emits paths in lexicographic order already
  return vstack(stack.matrices);
}

// ---------------------------------------------------------------------------
// Serialization: key=value manifest, voxel order line, then the embedded banks.

inline constexpr const char* kModelMagic = "TCNN-MODEL";

inline void write_model(std::ostream& os, const PipelineModel& m) {
  const auto& c = m.config;
  os << "magic=" << kModelMagic << '\n'
     << "version=1\n"
     << "tau1=" << c.tau1 << '\n'
     << "tau2=" << c.tau2 << '\n'
     << "delta1=" << c.delta1 << '\n'
     << "delta2=" << c.delta2 << '\n'
     << "windows=" << c.windows << '\n'
     << "sampling_seed=" << c.sampling_seed << '\n'
     << "layer2_banks=" << m.layer2.size() << '\n'
     << "m=" << m.voxel_order.size() << "\n\n";
  for (std::size_t i = 0; i < m.voxel_order.size(); ++i) os << (i ? "," : "") << m.voxel_order[i];
  os << '\n';
  write_bank(os, m.layer1);
  for (const auto& b : m.layer2) write_bank(os, b);
}

inline PipelineModel read_model(std::istream& is) {
  using K = ParseError::Kind;
  auto header = text::read_header(is);
  if (!header) throw ParseError(K::kMalformedHeader, "model: malformed header");
  auto num = [&](const char* key) {
    auto it = header->find(key);
    if (it == header->end()) throw ParseError(K::kMalformedHeader, std::string("model: missing ") + key);
    auto v = text::parse_int<std::uint64_t>(it->second);
    if (!v) throw ParseError(K::kMalformedHeader, std::string("model: bad ") + key);
    return *v;
  };
  if (auto it = header->find("magic"); it == header->end() || it->second != kModelMagic)
    throw ParseError(K::kMalformedHeader, "model: bad magic");
  if (num("version") != 1) throw ParseError(K::kUnknownVersion, "model: unknown version");
  PipelineModel m;
  m.config.tau1 = num("tau1");
  m.config.tau2 = num("tau2");
  m.config.delta1 = num("delta1");
  m.config.delta2 = num("delta2");
  m.config.windows = num("windows");
  m.config.sampling_seed = num("sampling_seed");
  const auto banks = num("layer2_banks");
  const auto voxels = num("m");

  std::string line;
  std::getline(is, line);
  for (auto f : text::split(line, ',')) {
    auto v = text::parse_int<std::size_t>(f);
    if (!v) throw ParseError(K::kMalformedHeader, "model: bad voxel order");
    m.voxel_order.push_back(*v);
  }
  if (!is_permutation_of_iota(m.voxel_order, voxels))
    throw ParseError(K::kInvariantViolation, "model: voxel order is not a permutation of 0..m-1");
  m.layer1 = read_bank(is);
  m.config.layer1_hyper = m.layer1.hyper;
  for (std::uint64_t i = 0; i < banks; ++i) m.layer2.push_back(read_bank(is));
  if (!m.layer2.empty()) {
    m.config.layer2_hyper = m.layer2.front().hyper;
    m.config.layer2_hyper.seed = m.layer1.hyper.seed + 1;
    if (m.layer2.size() != m.layer1.k())
      throw ParseError(K::kInvariantViolation, "model: layer-2 bank count differs from layer-1 k");
  }
  return m;
}

inline void save_model(const PipelineModel& m, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_model(os, m);
}

inline PipelineModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_model(is);
}

}  // namespace tcnn
