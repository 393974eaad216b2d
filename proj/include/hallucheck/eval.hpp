#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "hallucheck/errors.hpp"
#include "hallucheck/kernels.hpp"

namespace hallucheck::eval {

enum class Label { accurate, hallucinated };
std::string_view label_name(Label l);
Label parse_label(std::string_view s);  // throws SchemaError

enum class Objective { accuracy, f1 };

struct LabeledScore {
  double score = 0.0;  // detector's estimate that the output is factual
  Label label = Label::accurate;
  std::string example_ref;
};

using Confusion = kernels::Confusion;

/// Predicted factual iff score > threshold. Counts are taken with respect to
/// `positive` (hallucinated by default). Throws PreconditionError when the
/// threshold is outside [0,1].
Confusion classify(std::span<const LabeledScore> scores, double threshold, Label positive = Label::hallucinated);

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

/// Precision, recall and F1 are 0 when their denominators are 0.
Metrics metrics_from(const Confusion& c);
Metrics metrics_at(std::span<const LabeledScore> scores, double threshold, Label positive = Label::hallucinated);

struct ThresholdChoice {
  double threshold = 0.0;
  double value = 0.0;
};

/// Best grid threshold in {0.00, ..., 1.00} for the objective; ties go to the
/// lowest threshold. Throws DegenerateLabels unless both labels occur.
ThresholdChoice threshold_search(std::span<const LabeledScore> scores, Objective objective,
                                 Label positive = Label::hallucinated);

/// Average precision, sum_k (R_k - R_{k-1}) P_k, walking the ranking from most
/// to least likely positive (ascending score when positive is hallucinated).
/// Equal scores form one step. Throws DegenerateLabels.
double auc_pr(std::span<const LabeledScore> scores, Label positive = Label::hallucinated);

struct Interval {
  double mean = 0.0;        // mean of the bootstrap replicates
  double half_width = 0.0;  // (hi - lo) / 2
  double lo = 0.0;          // 2.5th percentile
  double hi = 0.0;          // 97.5th percentile
  std::size_t used = 0;     // replicates with a defined metric value
};

/// Metric over a (resampled) list. Must be thread-safe; may return NaN when the
/// resample leaves the metric undefined, in which case that replicate is skipped.
using Metric = std::function<double(std::span<const LabeledScore>)>;

/// Linear-interpolation percentile of an ascending-sorted sample, p in [0,1].
double percentile_sorted(std::span<const double> sorted, double p);

/// Percentile bootstrap over examples. Deterministic given the seed.
Interval bootstrap_ci(std::span<const LabeledScore> scores, const Metric& metric, std::size_t resamples = 1000,
                      std::uint64_t seed = 42);

struct Comparison {
  double point_difference = 0.0;  // metric(b) - metric(a) on the full data
  Interval difference;            // paired bootstrap of metric(b) - metric(a)
  bool significant = false;       // 95% interval excludes 0
};

/// Paired bootstrap: both lists are resampled with the same example indices
/// after aligning b to a by example_ref. Throws RefMismatch when the example
/// sets differ.
Comparison compare_methods(std::span<const LabeledScore> a, std::span<const LabeledScore> b, const Metric& metric,
                           std::uint64_t seed = 42, std::size_t resamples = 1000);

/// Fisher-Yates with a multiply-shift index draw, reproducible on every platform.
void deterministic_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng);

/// Subsamples the majority class uniformly (seeded) down to the minority
/// count and shuffles the result. Throws DegenerateLabels when a class is absent.
template <typename T, typename LabelOf>
std::vector<T> balance_dataset(const std::vector<T>& items, LabelOf label_of, std::uint64_t seed) {
  std::vector<std::size_t> acc, hal;
  for (std::size_t i = 0; i < items.size(); ++i) {
    (label_of(items[i]) == Label::hallucinated ? hal : acc).push_back(i);
  }
  if (acc.empty() || hal.empty()) throw DegenerateLabels("balance_dataset needs both labels");
  std::mt19937_64 rng(seed);
  auto& major = acc.size() >= hal.size() ? acc : hal;
  const auto& minor = acc.size() >= hal.size() ? hal : acc;
  deterministic_shuffle(major, rng);
  major.resize(minor.size());
  std::vector<std::size_t> picked(minor.begin(), minor.end());
  picked.insert(picked.end(), major.begin(), major.end());
  std::sort(picked.begin(), picked.end());
  deterministic_shuffle(picked, rng);
  std::vector<T> out;
  out.reserve(picked.size());
  for (auto i : picked) out.push_back(items[i]);
  return out;
}

std::vector<LabeledScore> balance_dataset(const std::vector<LabeledScore>& items, std::uint64_t seed);

// Standard metrics as Metric callables (NaN on single-class resamples where
// the metric needs both labels).
Metric accuracy_at(double threshold, Label positive = Label::hallucinated);
Metric f1_at(double threshold, Label positive = Label::hallucinated);
Metric best_threshold_metric(Objective objective, Label positive = Label::hallucinated);
Metric auc_pr_metric(Label positive = Label::hallucinated);

struct EvalOptions {
  Label positive = Label::hallucinated;
  std::size_t resamples = 1000;
  std::uint64_t seed = 42;
};

/// One row of the results table.
struct EvalReport {
  std::string method;
  double threshold_accuracy = 0.0;
  double threshold_f1 = 0.0;
  double accuracy_point = 0.0;
  double f1_point = 0.0;
  double auc_pr_point = 0.0;
  Interval accuracy;
  Interval f1;
  Interval auc_pr;
  Label positive_class = Label::hallucinated;
  std::size_t n = 0;
  std::uint64_t bootstrap_seed = 0;
};

/// Threshold search for accuracy and F1 independently, AUC-PR, and bootstrap
/// CIs of each at its fixed threshold.
EvalReport evaluate_method(std::string method, std::span<const LabeledScore> scores, const EvalOptions& options);

nlohmann::json to_json(const EvalReport& r);
nlohmann::json to_json(const Comparison& c);

/// Table with one row per method: accuracy, F1 and AUC-PR as mean ± CI half-width.
std::string format_table(std::span<const EvalReport> reports);

}  // namespace hallucheck::eval
