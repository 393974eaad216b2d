#include "hallucheck/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>

namespace hallucheck::kernels {

namespace {

inline double clamped_cosine(std::span<const double> a, std::span<const double> b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  const double c = dot / (std::sqrt(na) * std::sqrt(nb));
  return std::clamp(c, 0.0, 1.0);
}

inline double triple_score(const Matrix& output, std::size_t j, std::span<const Matrix> samples) {
  if (samples.empty()) return 0.0;
  double sum = 0.0;
  for (const Matrix& s : samples) {
    double best = 0.0;
    for (std::size_t m = 0; m < s.rows; ++m) best = std::max(best, clamped_cosine(output.row(j), s.row(m)));
    sum += best;
  }
  return sum / static_cast<double>(samples.size());
}

inline bool predicted_positive(double score, double threshold, bool positive_is_hallucinated) {
  const bool factual = score > threshold;
  return positive_is_hallucinated ? !factual : factual;
}

inline Confusion confusion_at(std::span<const double> scores, std::span<const std::uint8_t> hallucinated,
                              double threshold, bool positive_is_hallucinated) {
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool actual = positive_is_hallucinated ? hallucinated[i] != 0 : hallucinated[i] == 0;
    const bool pred = predicted_positive(scores[i], threshold, positive_is_hallucinated);
    if (pred && actual) {
      ++c.tp;
    } else if (pred) {
      ++c.fp;
    } else if (actual) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

std::uint64_t mix(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

std::vector<double> max_then_mean_serial(const Matrix& output, std::span<const Matrix> samples) {
  std::vector<double> out(output.rows);
  for (std::size_t j = 0; j < output.rows; ++j) out[j] = triple_score(output, j, samples);
  return out;
}

std::vector<double> max_then_mean_parallel(const Matrix& output, std::span<const Matrix> samples) {
  std::vector<double> out(output.rows);
  const auto rows = static_cast<std::int64_t>(output.rows);
#pragma omp parallel for schedule(static)
  for (std::int64_t j = 0; j < rows; ++j) {
    out[static_cast<std::size_t>(j)] = triple_score(output, static_cast<std::size_t>(j), samples);
  }
  return out;
}

std::array<Confusion, kGridPoints> threshold_sweep_serial(std::span<const double> scores,
                                                          std::span<const std::uint8_t> hallucinated,
                                                          bool positive_is_hallucinated) {
  std::array<Confusion, kGridPoints> out{};
  for (int k = 0; k < kGridPoints; ++k) {
    out[k] = confusion_at(scores, hallucinated, grid_threshold(k), positive_is_hallucinated);
  }
  return out;
}

std::array<Confusion, kGridPoints> threshold_sweep_parallel(std::span<const double> scores,
                                                            std::span<const std::uint8_t> hallucinated,
                                                            bool positive_is_hallucinated) {
  std::array<Confusion, kGridPoints> out{};
#pragma omp parallel for schedule(static)
  for (int k = 0; k < kGridPoints; ++k) {
    out[k] = confusion_at(scores, hallucinated, grid_threshold(k), positive_is_hallucinated);
  }
  return out;
}

std::vector<std::size_t> resample_indices(std::uint64_t seed, std::size_t b, std::size_t n) {
  std::mt19937_64 rng(mix(seed ^ mix(b + 1)));
  std::vector<std::size_t> idx(n);
  // Multiply-shift maps a 64-bit draw onto [0, n) without std:: distributions,
  // whose output is implementation-defined.
  for (auto& i : idx) i = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * n) >> 64);
  return idx;
}

std::vector<double> bootstrap_replicates_serial(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                                const IndexMetric& metric) {
  std::vector<double> out(resamples);
  for (std::size_t b = 0; b < resamples; ++b) out[b] = metric(resample_indices(seed, b, n));
  return out;
}

std::vector<double> bootstrap_replicates_parallel(std::size_t n, std::size_t resamples, std::uint64_t seed,
                                                  const IndexMetric& metric) {
  std::vector<double> out(resamples);
  const auto count = static_cast<std::int64_t>(resamples);
#pragma omp parallel for schedule(static)
  for (std::int64_t b = 0; b < count; ++b) {
    const auto ub = static_cast<std::size_t>(b);
    out[ub] = metric(resample_indices(seed, ub, n));
  }
  return out;
}

}  // namespace hallucheck::kernels
