#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <iterator>
#include <numbers>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "tcnn/errors.hpp"
#include "tcnn/hrf.hpp"
#include "tcnn/matrix.hpp"
#include "tcnn/rng.hpp"
#include "tcnn/text.hpp"

namespace tcnn {

enum class Phase { kEncode, kRetrieve };

inline const char* phase_name(Phase p) { return p == Phase::kEncode ? "encode" : "retrieve"; }

struct Label {
  std::size_t column = 0;
  int class_id = 0;
  Phase phase = Phase::kEncode;

  friend bool operator==(const Label&, const Label&) = default;
};

using ColumnSet = std::set<std::size_t>;

/// Voxel x time intensity matrix with its experiment annotations.
struct VTDataset {
  Matrix values;  // m voxels x n time points
  double tr_seconds = 2.0;
  // Position p in this list is the p-th voxel in spatial order; consecutive
  // entries are neighbours for pooling.
  std::vector<std::size_t> voxel_order;
  std::vector<Label> labels;

  std::size_t m() const noexcept { return values.rows(); }
  std::size_t n() const noexcept { return values.cols(); }

  int num_classes() const {
    int c = 0;
    for (const auto& l : labels) c = std::max(c, l.class_id + 1);
    return c;
  }

  friend bool operator==(const VTDataset& a, const VTDataset& b) {
    // bit-exact payload comparison, so NaN payloads and signed zeros count
    if (a.values.rows() != b.values.rows() || a.values.cols() != b.values.cols()) return false;
    for (std::size_t i = 0; i < a.values.size(); ++i)
      if (std::bit_cast<std::uint64_t>(a.values.data()[i]) !=
          std::bit_cast<std::uint64_t>(b.values.data()[i]))
        return false;
    return std::bit_cast<std::uint64_t>(a.tr_seconds) == std::bit_cast<std::uint64_t>(b.tr_seconds) &&
           a.voxel_order == b.voxel_order && a.labels == b.labels;
  }
};

inline bool is_permutation_of_iota(const std::vector<std::size_t>& order, std::size_t m) {
  if (order.size() != m) return false;
  std::vector<bool> seen(m, false);
  for (auto v : order) {
    if (v >= m || seen[v]) return false;
    seen[v] = true;
  }
  return true;
}

/// Returns an empty string when valid, else a description of the first broken invariant.
inline std::string dataset_violation(const VTDataset& d) {
  if (d.m() == 0 || d.n() == 0) return "dataset must have m >= 1 and n >= 1";
  if (!(d.tr_seconds > 0.0)) return "tr_seconds must be positive";
  if (!is_permutation_of_iota(d.voxel_order, d.m())) return "voxel_order is not a permutation of 0..m-1";
  std::set<std::size_t> cols;
  for (const auto& l : d.labels) {
    if (l.column >= d.n()) return "label column " + std::to_string(l.column) + " out of range";
    if (l.class_id < 0) return "negative class id";
    if (!cols.insert(l.column).second) return "duplicate label column " + std::to_string(l.column);
  }
  return {};
}

inline void validate(const VTDataset& d) {
  if (auto msg = dataset_violation(d); !msg.empty()) throw ContractViolation(msg);
}

// ---------------------------------------------------------------------------
// Synthetic generator

struct SynthConfig {
  std::size_t m = 64;
  std::size_t n = 600;
  std::size_t num_classes = 5;
  std::size_t samples_per_class_per_phase = 6;
  double noise_sigma = 1.0;
  std::size_t voxels_per_class = 6;
  double hrf_amplitude = 2.0;
  double tr_seconds = 2.0;
  std::uint64_t seed = 0;
};

/// Labels of one phase occupy half of the time axis; each label slot is at
/// least this many columns wide.
inline constexpr std::size_t kMinLabelSpacing = 4;
/// Unlabeled columns left at the end of each phase half.
inline constexpr std::size_t kPhaseTailMargin = 8;

inline void validate(const SynthConfig& c) {
  auto fail = [](const std::string& what) { throw ConfigError("synthetic config: " + what); };
  if (c.m == 0 || c.n == 0) fail("m and n must be positive");
  if (c.num_classes == 0) fail("num_classes must be positive");
  if (c.samples_per_class_per_phase == 0) fail("samples_per_class_per_phase must be positive");
  if (c.voxels_per_class == 0) fail("voxels_per_class must be positive");
  if (!(c.noise_sigma >= 0.0)) fail("noise_sigma must be nonnegative");
  if (!(c.hrf_amplitude > 0.0)) fail("hrf_amplitude must be positive");
  if (!(c.tr_seconds > 0.0) || 6.0 * c.tr_seconds < 6.0) fail("tr_seconds must be >= 1");
  if (c.voxels_per_class * c.num_classes > c.m) fail("voxels_per_class * num_classes must be <= m");
  const std::size_t per_phase = c.num_classes * c.samples_per_class_per_phase;
  const std::size_t half = c.n / 2;
  if (half < kPhaseTailMargin || kMinLabelSpacing * per_phase > half - kPhaseTailMargin)
    fail("labels too dense: need 4 * num_classes * samples_per_class_per_phase <= n/2 - 8");
  if (c.num_classes == 1 && 6 * per_phase > half - kPhaseTailMargin)
    fail("single-class layout needs 6 * samples_per_class_per_phase <= n/2 - 8");
}

/// The slow per-voxel baseline used by generate_synthetic, reproduced
/// independently of the bumps and noise.
inline Matrix synthetic_drift(const SynthConfig& c) {
  Matrix drift(c.m, c.n);
  Rng rng(derive_seed(c.seed, "synth/drift"));
  std::uniform_real_distribution<double> phase_dist(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> period_dist(static_cast<double>(c.n) / 4.0, static_cast<double>(c.n));
  const double amp = 0.25 * c.hrf_amplitude;
  for (std::size_t v = 0; v < c.m; ++v) {
    const double phase = phase_dist(rng);
    const double period = std::max(period_dist(rng), 1.0);
    for (std::size_t t = 0; t < c.n; ++t)
      drift(v, t) = amp * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / period + phase);
  }
  return drift;
}

namespace detail {

// `rounds` random permutations of the classes, chained so no two adjacent
// entries repeat a class (as long as there are at least two classes).
inline std::vector<int> class_sequence(std::size_t classes, std::size_t rounds, Rng& rng, int previous) {
  std::vector<int> seq;
  std::vector<int> perm(classes);
  for (std::size_t r = 0; r < rounds; ++r) {
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    if (classes > 1 && perm.front() == previous) std::swap(perm[0], perm[1]);
    seq.insert(seq.end(), perm.begin(), perm.end());
    previous = perm.back();
  }
  return seq;
}

}  // namespace detail

inline VTDataset generate_synthetic(const SynthConfig& c) {
  validate(c);
  VTDataset d;
  d.tr_seconds = c.tr_seconds;

  // Storage rows are scrambled; voxel_order gives the raster order over a
  // virtual 3-D grid.
  d.voxel_order.resize(c.m);
  std::iota(d.voxel_order.begin(), d.voxel_order.end(), std::size_t{0});
  {
    Rng rng(derive_seed(c.seed, "synth/order"));
    std::shuffle(d.voxel_order.begin(), d.voxel_order.end(), rng);
  }

  const std::size_t per_phase = c.num_classes * c.samples_per_class_per_phase;
  const std::size_t half = c.n / 2;
  const std::size_t spacing = (half - kPhaseTailMargin) / per_phase;
  {
    Rng rng(derive_seed(c.seed, "synth/labels"));
    int previous = -1;
    for (Phase phase : {Phase::kEncode, Phase::kRetrieve}) {
      const std::size_t start = phase == Phase::kEncode ? 0 : half;
      auto seq = detail::class_sequence(c.num_classes, c.samples_per_class_per_phase, rng, previous);
      for (std::size_t i = 0; i < seq.size(); ++i) d.labels.push_back({start + i * spacing, seq[i], phase});
      previous = seq.back();
    }
  }

  d.values = synthetic_drift(c);
  const auto kernel = hrf_kernel(c.tr_seconds, 6);
  for (const auto& l : d.labels) {
    const auto cls = static_cast<std::size_t>(l.class_id);
    for (std::size_t i = 0; i < c.voxels_per_class; ++i) {
      const std::size_t row = d.voxel_order[cls * c.voxels_per_class + i];
      for (std::size_t s = 0; s < kernel.taps.size() && l.column + s < c.n; ++s)
        d.values(row, l.column + s) += c.hrf_amplitude * kernel.taps[s];
    }
  }

  if (c.noise_sigma > 0.0) {
    Rng rng(derive_seed(c.seed, "synth/noise"));
    std::normal_distribution<double> noise(0.0, c.noise_sigma);
    for (auto& v : d.values.data()) v += noise(rng);
  }
  return d;
}

// ---------------------------------------------------------------------------
// Persistence

inline constexpr const char* kDatasetMagic = "TCNN-VT";
inline constexpr int kDatasetVersion = 1;
inline constexpr const char* kPayloadMarker = "#payload";

inline void write_dataset(std::ostream& os, const VTDataset& d) {
  validate(d);
  os << "magic=" << kDatasetMagic << '\n'
     << "version=" << kDatasetVersion << '\n'
     << "m=" << d.m() << '\n'
     << "n=" << d.n() << '\n'
     << "tr_seconds=" << text::format_double(d.tr_seconds) << "\n\n";
  for (const auto& l : d.labels) os << l.column << ',' << l.class_id << ',' << phase_name(l.phase) << '\n';
  for (std::size_t i = 0; i < d.voxel_order.size(); ++i) os << (i ? "," : "") << d.voxel_order[i];
  os << '\n' << kPayloadMarker << '\n';
  for (double v : d.values.data()) text::write_f64_le(os, v);
}

inline VTDataset read_dataset(std::istream& is) {
  using K = ParseError::Kind;
  auto header = text::read_header(is);
  if (!header) throw ParseError(K::kMalformedHeader, "dataset header: expected key=value lines");
  auto get = [&](const char* key) -> const std::string& {
    auto it = header->find(key);
    if (it == header->end()) throw ParseError(K::kMalformedHeader, std::string("dataset header: missing ") + key);
    return it->second;
  };
  if (get("magic") != kDatasetMagic) throw ParseError(K::kMalformedHeader, "dataset header: bad magic");
  auto version = text::parse_int<int>(get("version"));
  if (!version) throw ParseError(K::kMalformedHeader, "dataset header: bad version field");
  if (*version != kDatasetVersion)
    throw ParseError(K::kUnknownVersion, "dataset: unknown format version " + std::to_string(*version));
  auto m = text::parse_int<std::size_t>(get("m"));
  auto n = text::parse_int<std::size_t>(get("n"));
  auto tr = text::parse_double(get("tr_seconds"));
  if (!m || !n || !tr) throw ParseError(K::kMalformedHeader, "dataset header: non-numeric m, n or tr_seconds");
  if (*m == 0 || *n == 0 || !(*tr > 0.0))
    throw ParseError(K::kInvariantViolation, "dataset header: need m >= 1, n >= 1, tr_seconds > 0");

  std::vector<std::string> lines;
  std::string line;
  bool marker = false;
  while (std::getline(is, line)) {
    if (text::trim(line) == kPayloadMarker) {
      marker = true;
      break;
    }
    lines.push_back(line);
  }
  if (!marker || lines.empty()) throw ParseError(K::kMalformedHeader, "dataset: missing voxel order or payload marker");

  VTDataset d;
  d.tr_seconds = *tr;
  for (auto f : text::split(lines.back(), ',')) {
    auto v = text::parse_int<std::size_t>(f);
    if (!v) throw ParseError(K::kMalformedHeader, "dataset: bad voxel_order entry");
    d.voxel_order.push_back(*v);
  }
  if (d.voxel_order.size() != *m) throw ParseError(K::kDimensionMismatch, "dataset: voxel_order length differs from m");
  lines.pop_back();
  for (const auto& l : lines) {
    auto f = text::split(l, ',');
    if (f.size() != 3) throw ParseError(K::kMalformedHeader, "dataset: bad label line '" + l + "'");
    auto col = text::parse_int<std::size_t>(f[0]);
    auto cls = text::parse_int<int>(f[1]);
    auto ph = text::trim(f[2]);
    if (!col || !cls || (ph != "encode" && ph != "retrieve"))
      throw ParseError(K::kMalformedHeader, "dataset: bad label line '" + l + "'");
    d.labels.push_back({*col, *cls, ph == "encode" ? Phase::kEncode : Phase::kRetrieve});
  }

  std::vector<char> payload((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  const std::size_t expected = *m * *n;
  if (payload.size() != expected * 8)
    throw ParseError(K::kDimensionMismatch, "dataset: payload holds " + std::to_string(payload.size()) +
                                                " bytes, header implies " + std::to_string(expected * 8));
  std::vector<double> values(expected);
  const auto* bytes = reinterpret_cast<const unsigned char*>(payload.data());
  for (std::size_t i = 0; i < expected; ++i) values[i] = text::decode_f64_le(bytes + 8 * i);
  d.values = Matrix(*m, *n, std::move(values));

  if (auto msg = dataset_violation(d); !msg.empty()) throw ParseError(K::kInvariantViolation, "dataset: " + msg);
  return d;
}

inline void save_dataset(const VTDataset& d, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot open '" + path + "' for writing");
  write_dataset(os, d);
  if (!os) throw IoError("write failed for '" + path + "'");
}

inline VTDataset load_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path + "'");
  return read_dataset(is);
}

// ---------------------------------------------------------------------------
// Window sampling

struct WindowSource {
  std::size_t row = 0;
  std::size_t start = 0;
};

/// Training windows for one autoencoder; row i of `windows` came from source[i].
struct WindowSet {
  Matrix windows;  // count x tau
  std::size_t tau = 0;
  std::vector<WindowSource> source;

  std::size_t size() const noexcept { return windows.rows(); }
};

/// Columns within max(tau1, tau2) - 1 of any retrieve-phase label.
inline ColumnSet test_exclusion_columns(const VTDataset& d, std::size_t tau1, std::size_t tau2) {
  ColumnSet out;
  const auto reach = static_cast<long long>(std::max(tau1, tau2)) - 1;
  const auto n = static_cast<long long>(d.n());
  for (const auto& l : d.labels) {
    if (l.phase != Phase::kRetrieve) continue;
    const auto t = static_cast<long long>(l.column);
    for (long long c = std::max(0LL, t - reach); c <= std::min(n - 1, t + reach); ++c)
      out.insert(static_cast<std::size_t>(c));
  }
  return out;
}

/// Uniform draws with replacement over every (row, start) whose span
/// [start, start+tau) avoids the excluded columns.
inline WindowSet sample_windows(const Matrix& matrix, std::size_t tau, std::size_t count,
                                const ColumnSet& excluded, std::uint64_t seed) {
  const std::size_t n = matrix.cols();
  TCNN_REQUIRE(tau >= 1 && tau <= n, "sample_windows: need 1 <= tau <= n");
  TCNN_REQUIRE(count >= 1, "sample_windows: count must be positive");

  std::vector<std::size_t> prefix(n + 1, 0);
  for (std::size_t c = 0; c < n; ++c) prefix[c + 1] = prefix[c] + (excluded.count(c) ? 1 : 0);
  std::vector<std::size_t> starts;
  for (std::size_t s = 0; s + tau <= n; ++s)
    if (prefix[s + tau] == prefix[s]) starts.push_back(s);
  if (starts.empty() || matrix.rows() == 0) throw SamplingError("sample_windows: no admissible window positions");

  WindowSet ws;
  ws.tau = tau;
  ws.windows = Matrix(count, tau);
  ws.source.reserve(count);
  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick(0, matrix.rows() * starts.size() - 1);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t idx = pick(rng);
    const std::size_t row = idx / starts.size();
    const std::size_t start = starts[idx % starts.size()];
    auto src = matrix.row(row);
    std::copy(src.begin() + static_cast<std::ptrdiff_t>(start),
              src.begin() + static_cast<std::ptrdiff_t>(start + tau), ws.windows.row(i).begin());
    ws.source.push_back({row, start});
  }
  return ws;
}

}  // namespace tcnn
