#include <gtest/gtest.h>

#include <cstring>
#include <random>

#include "hallucheck/kernels.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace hallucheck::kernels;

namespace {

Matrix to_matrix(const oracle::Vecs& rows, std::size_t dim) {
  Matrix m(rows.size(), dim);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < dim; ++j) m.row(i)[j] = rows[i][j];
  }
  return m;
}

bool bit_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST(MaxThenMean, HandExample) {
  // One output triple; sample 1 best match 0.8, sample 2 best match 0.4.
  Matrix out(1, 2);
  out.row(0)[0] = 1.0;
  std::vector<Matrix> samples(2, Matrix(2, 2));
  samples[0].row(0)[0] = 0.8;
  samples[0].row(0)[1] = 0.6;
  samples[0].row(1)[0] = -1.0;
  samples[0].row(1)[1] = 0.1;
  samples[1].row(0)[0] = 0.4;
  samples[1].row(0)[1] = std::sqrt(1 - 0.16);
  samples[1].row(1)[0] = 0.0;
  samples[1].row(1)[1] = 1.0;
  const auto c = max_then_mean_serial(out, samples);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_NEAR(c[0], 0.6, 1e-12);
}

TEST(MaxThenMean, EmptySampleContributesZero) {
  Matrix out(1, 2);
  out.row(0)[0] = 1.0;
  std::vector<Matrix> samples{Matrix(1, 2), Matrix(0, 2)};
  samples[0].row(0)[0] = 1.0;
  EXPECT_NEAR(max_then_mean_parallel(out, samples)[0], 0.5, 1e-15);
}

TEST(MaxThenMean, NegativeSimilarityClampedToZero) {
  Matrix out(1, 1);
  out.row(0)[0] = 1.0;
  std::vector<Matrix> samples{Matrix(1, 1)};
  samples[0].row(0)[0] = -3.0;
  EXPECT_EQ(max_then_mean_serial(out, samples)[0], 0.0);
}

TEST(MaxThenMean, MatchesOracleAndSerialParallelBitIdentical) {
  std::mt19937_64 rng(99);
  std::uniform_int_distribution<int> small(0, 5), pos(1, 5), dim(1, 12);
  for (int it = 0; it < 400; ++it) {
    const std::size_t d = dim(rng);
    oracle::Vecs out_rows(pos(rng));
    for (auto& r : out_rows) r = testing_support::random_vector(rng, d);
    std::vector<oracle::Vecs> sample_rows(pos(rng));
    for (auto& s : sample_rows) {
      s.resize(small(rng));
      for (auto& r : s) r = testing_support::random_vector(rng, d);
    }
    std::vector<Matrix> samples;
    for (const auto& s : sample_rows) samples.push_back(to_matrix(s, d));
    const auto out = to_matrix(out_rows, d);
    const auto serial = max_then_mean_serial(out, samples);
    const auto parallel = max_then_mean_parallel(out, samples);
    EXPECT_TRUE(bit_equal(serial, parallel));
    const auto expected = oracle::max_then_mean(out_rows, sample_rows);
    for (std::size_t j = 0; j < expected.size(); ++j) EXPECT_NEAR(serial[j], expected[j], 1e-12);
  }
}

TEST(ThresholdGrid, Points) {
  EXPECT_EQ(kGridPoints, 101);
  EXPECT_EQ(grid_threshold(0), 0.0);
  EXPECT_EQ(grid_threshold(37), 0.37);
  EXPECT_EQ(grid_threshold(100), 1.0);
}

TEST(ThresholdSweep, MatchesOracleAndSerialParallelAgree) {
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<int> n_dist(1, 60), coarse(0, 100);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int it = 0; it < 200; ++it) {
    const int n = n_dist(rng);
    std::vector<double> scores;
    std::vector<std::uint8_t> hal;
    std::vector<oracle::Point> pts;
    for (int i = 0; i < n; ++i) {
      // Half the sets sit exactly on grid values to exercise the strict comparison.
      const double s = it % 2 ? coarse(rng) / 100.0 : u(rng);
      const bool h = u(rng) < 0.5;
      scores.push_back(s);
      hal.push_back(h);
      pts.push_back({s, h});
    }
    for (bool pos_hal : {true, false}) {
      const auto serial = threshold_sweep_serial(scores, hal, pos_hal);
      const auto parallel = threshold_sweep_parallel(scores, hal, pos_hal);
      for (int k = 0; k < kGridPoints; ++k) {
        EXPECT_EQ(serial[k], parallel[k]);
        const auto o = oracle::confusion(pts, grid_threshold(k), pos_hal);
        EXPECT_EQ(serial[k].tp, o.tp);
        EXPECT_EQ(serial[k].fp, o.fp);
        EXPECT_EQ(serial[k].tn, o.tn);
        EXPECT_EQ(serial[k].fn, o.fn);
      }
    }
  }
}

TEST(Resample, MatchesDocumentedSequence) {
  for (std::uint64_t seed : {0ULL, 42ULL, 12345ULL}) {
    for (std::size_t b : {0u, 1u, 999u}) {
      EXPECT_EQ(resample_indices(seed, b, 37), oracle::resample(seed, b, 37));
    }
  }
  for (auto i : resample_indices(1, 2, 1000)) EXPECT_LT(i, 1000u);
}

TEST(BootstrapReplicates, SerialParallelBitIdentical) {
  std::vector<double> data(50);
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u;
  for (auto& x : data) x = u(rng);
  const IndexMetric mean_of_draw = [&](std::span<const std::size_t> idx) {
    double s = 0;
    for (auto i : idx) s += data[i];
    return s / static_cast<double>(idx.size());
  };
  const auto serial = bootstrap_replicates_serial(data.size(), 300, 42, mean_of_draw);
  const auto parallel = bootstrap_replicates_parallel(data.size(), 300, 42, mean_of_draw);
  EXPECT_TRUE(bit_equal(serial, parallel));
  EXPECT_EQ(serial.size(), 300u);
}
