#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "tcnn/dataset.hpp"

using namespace tcnn;

namespace {

SynthConfig small_config(std::uint64_t seed = 7) {
  SynthConfig c;
  c.m = 64;
  c.n = 600;
  c.num_classes = 5;
  c.samples_per_class_per_phase = 6;
  c.seed = seed;
  return c;
}

std::string temp_path(const std::string& name) {
  return (std::filesystem::temp_directory_path() / ("tcnn_test_" + name)).string();
}

}  // namespace

TEST(Synthetic, ShapeAndPhaseSplit) {
  const auto d = generate_synthetic(small_config());
  EXPECT_EQ(d.m(), 64u);
  EXPECT_EQ(d.n(), 600u);
  ASSERT_EQ(d.labels.size(), 60u);
  std::size_t enc = 0, ret = 0;
  for (const auto& l : d.labels) (l.phase == Phase::kEncode ? enc : ret)++;
  EXPECT_EQ(enc, 30u);
  EXPECT_EQ(ret, 30u);
  EXPECT_EQ(dataset_violation(d), "");
}

TEST(Synthetic, EachClassAppearsEquallyPerPhase) {
  const auto d = generate_synthetic(small_config(3));
  std::map<std::pair<int, Phase>, int> count;
  for (const auto& l : d.labels) count[{l.class_id, l.phase}]++;
  EXPECT_EQ(count.size(), 10u);
  for (const auto& [key, c] : count) EXPECT_EQ(c, 6);
}

TEST(Synthetic, Determinism) {
  const auto a = generate_synthetic(small_config(11));
  const auto b = generate_synthetic(small_config(11));
  const auto c = generate_synthetic(small_config(12));
  EXPECT_TRUE(a == b);
  EXPECT_NE(a.values, c.values);
}

TEST(Synthetic, ZeroNoiseShowsExactBumps) {
  auto cfg = small_config(5);
  cfg.noise_sigma = 0.0;
  cfg.hrf_amplitude = 1.0;
  const auto d = generate_synthetic(cfg);
  const auto drift = synthetic_drift(cfg);
  const auto kernel = hrf_kernel(cfg.tr_seconds, 6);

  for (const auto& l : d.labels) {
    for (std::size_t i = 0; i < cfg.voxels_per_class; ++i) {
      const std::size_t v = d.voxel_order[static_cast<std::size_t>(l.class_id) * cfg.voxels_per_class + i];
      for (std::size_t s = 0; s < 6; ++s)
        ASSERT_EQ(d.values(v, l.column + s), drift(v, l.column + s) + cfg.hrf_amplitude * kernel.taps[s]);
    }
  }
  // voxels outside every class set carry only the drift
  for (std::size_t pos = cfg.num_classes * cfg.voxels_per_class; pos < cfg.m; ++pos) {
    const auto v = d.voxel_order[pos];
    for (std::size_t t = 0; t < cfg.n; ++t) ASSERT_EQ(d.values(v, t), drift(v, t));
  }
}

TEST(Synthetic, RejectsInvalidConfig) {
  auto c = small_config();
  c.voxels_per_class = 20;  // 20 * 5 > 64
  EXPECT_THROW(generate_synthetic(c), ConfigError);
  c = small_config();
  c.samples_per_class_per_phase = 100;
  EXPECT_THROW(generate_synthetic(c), ConfigError);
  c = small_config();
  c.noise_sigma = -1;
  EXPECT_THROW(generate_synthetic(c), ConfigError);
  try {
    c = small_config();
    c.num_classes = 0;
    generate_synthetic(c);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("num_classes"), std::string::npos);
  }
}

TEST(Persistence, RoundTripIsBitExact) {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto d = generate_synthetic(small_config(seed));
    const auto path = temp_path("rt.vt");
    save_dataset(d, path);
    EXPECT_TRUE(load_dataset(path) == d);
    std::filesystem::remove(path);
  }
}

TEST(Persistence, RoundTripPreservesSpecialValues) {
  VTDataset d;
  d.values = Matrix(2, 3, {-0.0, 1e-310, 1.0 / 3.0, -1e300, 0.1, 2.5});
  d.tr_seconds = 0.7;
  d.voxel_order = {1, 0};
  std::stringstream ss;
  write_dataset(ss, d);
  EXPECT_TRUE(read_dataset(ss) == d);
}

TEST(Persistence, TruncatedPayloadIsDimensionMismatch) {
  std::stringstream ss;
  write_dataset(ss, generate_synthetic(small_config()));
  std::string bytes = ss.str();
  bytes.resize(bytes.size() - 8);
  std::stringstream in(bytes);
  try {
    read_dataset(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.kind(), ParseError::Kind::kDimensionMismatch);
  }
}

TEST(Persistence, HeaderErrorsAreDistinct) {
  auto kind_of = [](const std::string& text) {
    std::stringstream in(text);
    try {
      read_dataset(in);
    } catch (const ParseError& e) {
      return e.kind();
    }
    ADD_FAILURE() << "no error for: " << text;
    return ParseError::Kind::kMalformedHeader;
  };
  EXPECT_EQ(kind_of("magic=TCNN-VT\nversion=1\nm=0\nn=4\ntr_seconds=2\n\n\n#payload\n"),
            ParseError::Kind::kInvariantViolation);
  EXPECT_EQ(kind_of("magic=TCNN-VT\nversion=9\nm=1\nn=1\ntr_seconds=2\n\n0\n#payload\n"),
            ParseError::Kind::kUnknownVersion);
  EXPECT_EQ(kind_of("garbage\n"), ParseError::Kind::kMalformedHeader);
  EXPECT_EQ(kind_of("magic=TCNN-VT\nversion=1\nn=1\ntr_seconds=2\n\n0\n#payload\n"),
            ParseError::Kind::kMalformedHeader);
  // voxel order that is not a permutation
  std::string payload(8, '\0');
  EXPECT_EQ(kind_of("magic=TCNN-VT\nversion=1\nm=1\nn=1\ntr_seconds=2\n\n3\n#payload\n" + payload),
            ParseError::Kind::kInvariantViolation);
}

TEST(Windows, AllExcludedIsSamplingError) {
  std::mt19937_64 rng(1);
  const auto m = oracle::random_matrix(4, 20, rng);
  ColumnSet all;
  for (std::size_t c = 0; c < 20; ++c) all.insert(c);
  EXPECT_THROW(sample_windows(m, 5, 10, all, 1), SamplingError);
}

TEST(Windows, FullLengthWindowsAreRows) {
  std::mt19937_64 rng(2);
  const auto m = oracle::random_matrix(5, 12, rng);
  const auto ws = sample_windows(m, 12, 50, {}, 9);
  ASSERT_EQ(ws.size(), 50u);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    EXPECT_EQ(ws.source[i].start, 0u);
    for (std::size_t c = 0; c < 12; ++c) EXPECT_EQ(ws.windows(i, c), m(ws.source[i].row, c));
  }
}

TEST(Windows, NeverOverlapExcludedColumns) {
  std::mt19937_64 rng(3);
  const auto m = oracle::random_matrix(100, 100, rng);
  ColumnSet excluded;
  for (std::size_t c = 40; c < 60; ++c) excluded.insert(c);
  const auto ws = sample_windows(m, 6, 10000, excluded, 42);
  ASSERT_EQ(ws.size(), 10000u);
  for (std::size_t i = 0; i < ws.size(); ++i) {
    const auto [row, start] = ws.source[i];
    EXPECT_TRUE(start + 6 <= 40 || start >= 60) << "window at " << start;
    for (std::size_t s = 0; s < 6; ++s) ASSERT_EQ(ws.windows(i, s), m(row, start + s));
  }
}

TEST(Windows, DeterministicAndCoversBothSides) {
  std::mt19937_64 rng(4);
  const auto m = oracle::random_matrix(3, 30, rng);
  ColumnSet excluded{14, 15};
  const auto a = sample_windows(m, 4, 500, excluded, 5);
  const auto b = sample_windows(m, 4, 500, excluded, 5);
  EXPECT_EQ(a.windows, b.windows);
  bool left = false, right = false;
  for (const auto& s : a.source) {
    left = left || s.start + 4 <= 14;
    right = right || s.start >= 16;
  }
  EXPECT_TRUE(left && right);
}

TEST(Exclusion, NoRetrieveLabelsMeansEmpty) {
  VTDataset d;
  d.values = Matrix(1, 50);
  d.voxel_order = {0};
  d.labels = {{10, 0, Phase::kEncode}, {30, 1, Phase::kEncode}};
  EXPECT_TRUE(test_exclusion_columns(d, 6, 9).empty());
}

TEST(Exclusion, SingleRetrieveLabel) {
  VTDataset d;
  d.values = Matrix(1, 200);
  d.voxel_order = {0};
  d.labels = {{100, 0, Phase::kRetrieve}};
  const auto ex = test_exclusion_columns(d, 6, 9);
  ColumnSet expected;
  for (std::size_t c = 92; c <= 108; ++c) expected.insert(c);
  EXPECT_EQ(ex, expected);
}

TEST(Exclusion, MatchesBruteForceOnRandomLabels) {
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    VTDataset d;
    const std::size_t n = 30 + rng() % 100;
    d.values = Matrix(1, n);
    d.voxel_order = {0};
    std::set<std::size_t> used;
    for (int i = 0; i < 8; ++i) {
      const std::size_t c = rng() % n;
      if (used.insert(c).second) d.labels.push_back({c, 0, rng() % 2 ? Phase::kEncode : Phase::kRetrieve});
    }
    const std::size_t tau1 = 1 + rng() % 10, tau2 = 1 + rng() % 10;
    EXPECT_EQ(test_exclusion_columns(d, tau1, tau2), oracle::exclusion(d, tau1, tau2));
  }
}
