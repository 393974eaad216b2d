#pragma once

// Data-parallel numeric kernels. Each has a serial reference and an OpenMP
// version; both perform the same floating-point operations per output element
// in the same order, so their results are bit-identical.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

namespace hallucheck::kernels {

/// Row-major matrix of embeddings, one row per triple.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
};

/// Per-triple score c_j = (1/n) * sum_k max_m max(0, cos(output_j, sample_k,m)).
/// A sample with no rows contributes 0. Rows must be non-zero and all widths
/// must match (checked by the callers).
std::vector<double> max_then_mean_serial(const Matrix& output, std::span<const Matrix> samples);
std::vector<double> max_then_mean_parallel(const Matrix& output, std::span<const Matrix> samples);

/// Number of points on the threshold grid {0.00, 0.01, ..., 1.00}.
inline constexpr int kGridPoints = 101;
inline constexpr double grid_threshold(int k) { return static_cast<double>(k) / 100.0; }

struct Confusion {
  std::int64_t tp = 0, fp = 0, tn = 0, fn = 0;
  friend bool operator==(const Confusion&, const Confusion&) = default;
};

/// Confusion counts at every grid threshold. An example is predicted factual
/// iff score > threshold. `hallucinated[i]` is the ground truth; when
/// `positive_is_hallucinated` the hallucinated label is the positive class.
std::array<Confusion, kGridPoints> threshold_sweep_serial(std::span<const double> scores,
                                                          std::span<const std::uint8_t> hallucinated,
                                                          bool positive_is_hallucinated);
std::array<Confusion, kGridPoints> threshold_sweep_parallel(std::span<const double> scores,
                                                            std::span<const std::uint8_t> hallucinated,
                                                            bool positive_is_hallucinated);

/// Indices of bootstrap resample `b` of `n` examples drawn with replacement.
/// Resample b uses its own generator seeded from (seed, b), so any resample can
/// be regenerated independently of the others.
std::vector<std::size_t> resample_indices(std::uint64_t seed, std::size_t b, std::size_t n);

using IndexMetric = std::function<double(std::span<const std::size_t>)>;

/// metric(resample_indices(seed, b, n)) for b in [0, resamples).
std::vector<double> bootstrap_replicates_serial(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                                const IndexMetric& metric);
std::vector<double> bootstrap_replicates_parallel(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                                  const IndexMetric& metric);

}  // namespace hallucheck::kernels
