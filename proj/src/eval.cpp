#include "hallucheck/eval.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace hallucheck::eval {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct Columns {
  std::vector<double> scores;
  std::vector<std::uint8_t> hallucinated;
};

Columns columns_of(std::span<const LabeledScore> s) {
  Columns c;
  c.scores.reserve(s.size());
  c.hallucinated.reserve(s.size());
  for (const auto& x : s) {
    c.scores.push_back(x.score);
    c.hallucinated.push_back(x.label == Label::hallucinated ? 1 : 0);
  }
  return c;
}

bool both_labels(std::span<const LabeledScore> s) {
  bool acc = false, hal = false;
  for (const auto& x : s) (x.label == Label::hallucinated ? hal : acc) = true;
  return acc && hal;
}

double objective_value(const Confusion& c, Objective o) {
  const Metrics m = metrics_from(c);
  return o == Objective::accuracy ? m.accuracy : m.f1;
}

std::vector<LabeledScore> gather(std::span<const LabeledScore> s, std::span<const std::size_t> idx) {
  std::vector<LabeledScore> out;
  out.reserve(idx.size());
  for (auto i : idx) out.push_back(s[i]);
  return out;
}

Interval summarize(std::vector<double> reps) {
  std::erase_if(reps, [](double x) { return std::isnan(x); });
  if (reps.empty()) throw DegenerateLabels("metric undefined on every bootstrap resample");
  std::sort(reps.begin(), reps.end());
  Interval iv;
  iv.used = reps.size();
  double sum = 0.0;
  for (double x : reps) sum += x;
  iv.mean = sum / static_cast<double>(reps.size());
  iv.lo = percentile_sorted(reps, 0.025);
  iv.hi = percentile_sorted(reps, 0.975);
  iv.half_width = (iv.hi - iv.lo) / 2.0;
  return iv;
}

}  // namespace

std::string_view label_name(Label l) { return l == Label::hallucinated ? "hallucinated" : "accurate"; }

Label parse_label(std::string_view s) {
  if (s == "hallucinated") return Label::hallucinated;
  if (s == "accurate") return Label::accurate;
  throw SchemaError("unknown label '" + std::string(s) + "'");
}

Confusion classify(std::span<const LabeledScore> scores, double threshold, Label positive) {
  if (!(threshold >= 0.0 && threshold <= 1.0)) throw PreconditionError("threshold must be in [0,1]");
  Confusion c;
  for (const auto& s : scores) {
    const bool factual = s.score > threshold;
    const bool pred_pos = positive == Label::hallucinated ? !factual : factual;
    const bool actual_pos = s.label == positive;
    if (pred_pos && actual_pos) {
      ++c.tp;
    } else if (pred_pos) {
      ++c.fp;
    } else if (actual_pos) {
      ++c.fn;
    } else {
      ++c.tn;
    }
  }
  return c;
}

Metrics metrics_from(const Confusion& c) {
  Metrics m;
  const auto n = c.tp + c.fp + c.tn + c.fn;
  if (n > 0) m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(n);
  if (c.tp + c.fp > 0) m.precision = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp);
  if (c.tp + c.fn > 0) m.recall = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  // 2PR/(P+R) in count form; identical counts give identical doubles.
  if (c.tp > 0) m.f1 = static_cast<double>(2 * c.tp) / static_cast<double>(2 * c.tp + c.fp + c.fn);
  return m;
}

Metrics metrics_at(std::span<const LabeledScore> scores, double threshold, Label positive) {
  return metrics_from(classify(scores, threshold, positive));
}

ThresholdChoice threshold_search(std::span<const LabeledScore> scores, Objective objective, Label positive) {
  if (!both_labels(scores)) throw DegenerateLabels("threshold_search needs both labels");
  const auto cols = columns_of(scores);
  const auto sweep = kernels::threshold_sweep_parallel(cols.scores, cols.hallucinated, positive == Label::hallucinated);
  ThresholdChoice best{kernels::grid_threshold(0), objective_value(sweep[0], objective)};
  for (int k = 1; k < kernels::kGridPoints; ++k) {
    const double v = objective_value(sweep[k], objective);
    if (v > best.value) best = {kernels::grid_threshold(k), v};
  }
  return best;
}

double auc_pr(std::span<const LabeledScore> scores, Label positive) {
  if (!both_labels(scores)) throw DegenerateLabels("auc_pr needs both labels");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const bool ascending = positive == Label::hallucinated;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ascending ? scores[a].score < scores[b].score : scores[a].score > scores[b].score;
  });
  std::int64_t total_pos = 0;
  for (const auto& s : scores) total_pos += s.label == positive ? 1 : 0;

  double ap = 0.0, prev_recall = 0.0;
  std::int64_t tp = 0, seen = 0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]].score == scores[order[i]].score) {
      tp += scores[order[j]].label == positive ? 1 : 0;
      ++seen;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(total_pos);
    const double precision = static_cast<double>(tp) / static_cast<double>(seen);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) return kNaN;
  const double h = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

Interval bootstrap_ci(std::span<const LabeledScore> scores, const Metric& metric, std::size_t resamples,
                      std::uint64_t seed) {
  if (scores.empty()) throw PreconditionError("bootstrap_ci needs scores");
  if (resamples == 0) throw PreconditionError("bootstrap_ci needs resamples >= 1");
  auto reps = kernels::bootstrap_replicates_parallel(
      scores.size(), resamples, seed, [&](std::span<const std::size_t> idx) { return metric(gather(scores, idx)); });
  return summarize(std::move(reps));
}

Comparison compare_methods(std::span<const LabeledScore> a, std::span<const LabeledScore> b, const Metric& metric,
                           std::uint64_t seed, std::size_t resamples) {
  if (a.size() != b.size()) throw RefMismatch("compared score lists differ in size");
  std::map<std::string, std::size_t> pos_in_b;
  for (std::size_t i = 0; i < b.size(); ++i) pos_in_b.emplace(b[i].example_ref, i);
  std::vector<LabeledScore> b_aligned;
  b_aligned.reserve(a.size());
  for (const auto& x : a) {
    auto it = pos_in_b.find(x.example_ref);
    if (it == pos_in_b.end()) throw RefMismatch("example '" + x.example_ref + "' missing from second method");
    b_aligned.push_back(b[it->second]);
  }
  if (pos_in_b.size() != a.size()) throw RefMismatch("duplicate example_ref in compared scores");

  Comparison c;
  c.point_difference = metric(b_aligned) - metric(a);
  auto reps = kernels::bootstrap_replicates_parallel(a.size(), resamples, seed, [&](std::span<const std::size_t> idx) {
    return metric(gather(b_aligned, idx)) - metric(gather(a, idx));
  });
  c.difference = summarize(std::move(reps));
  c.significant = c.difference.lo > 0.0 || c.difference.hi < 0.0;
  return c;
}

void deterministic_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>((static_cast<unsigned __int128>(rng()) * i) >> 64);
    std::swap(v[i - 1], v[j]);
  }
}

std::vector<LabeledScore> balance_dataset(const std::vector<LabeledScore>& items, std::uint64_t seed) {
  return balance_dataset(items, [](const LabeledScore& s) { return s.label; }, seed);
}

Metric accuracy_at(double threshold, Label positive) {
  return [=](std::span<const LabeledScore> s) { return metrics_at(s, threshold, positive).accuracy; };
}

Metric f1_at(double threshold, Label positive) {
  return [=](std::span<const LabeledScore> s) { return metrics_at(s, threshold, positive).f1; };
}

Metric best_threshold_metric(Objective objective, Label positive) {
  return [=](std::span<const LabeledScore> s) {
    return both_labels(s) ? threshold_search(s, objective, positive).value : kNaN;
  };
}

Metric auc_pr_metric(Label positive) {
  return [=](std::span<const LabeledScore> s) { return both_labels(s) ? auc_pr(s, positive) : kNaN; };
}

EvalReport evaluate_method(std::string method, std::span<const LabeledScore> scores, const EvalOptions& options) {
  EvalReport r;
  r.method = std::move(method);
  r.positive_class = options.positive;
  r.n = scores.size();
  r.bootstrap_seed = options.seed;
  const auto best_acc = threshold_search(scores, Objective::accuracy, options.positive);
  const auto best_f1 = threshold_search(scores, Objective::f1, options.positive);
  r.threshold_accuracy = best_acc.threshold;
  r.threshold_f1 = best_f1.threshold;
  r.accuracy_point = best_acc.value;
  r.f1_point = best_f1.value;
  r.auc_pr_point = auc_pr(scores, options.positive);
  r.accuracy = bootstrap_ci(scores, accuracy_at(best_acc.threshold, options.positive), options.resamples, options.seed);
  r.f1 = bootstrap_ci(scores, f1_at(best_f1.threshold, options.positive), options.resamples, options.seed);
  r.auc_pr = bootstrap_ci(scores, auc_pr_metric(options.positive), options.resamples, options.seed);
  return r;
}

namespace {

nlohmann::json interval_json(const Interval& iv) {
  return {{"mean", iv.mean}, {"ci_half_width", iv.half_width}, {"lo", iv.lo}, {"hi", iv.hi}, {"replicates", iv.used}};
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
  return {
      {"method", r.method},
      {"threshold_accuracy", r.threshold_accuracy},
      {"threshold_f1", r.threshold_f1},
      {"accuracy_point", r.accuracy_point},
      {"f1_point", r.f1_point},
      {"auc_pr_point", r.auc_pr_point},
      {"accuracy", interval_json(r.accuracy)},
      {"f1", interval_json(r.f1)},
      {"auc_pr", interval_json(r.auc_pr)},
      {"positive_class", label_name(r.positive_class)},
      {"n", r.n},
      {"bootstrap_seed", r.bootstrap_seed},
  };
}

nlohmann::json to_json(const Comparison& c) {
  return {{"point_difference", c.point_difference},
          {"difference", interval_json(c.difference)},
          {"significant", c.significant}};
}

std::string format_table(std::span<const EvalReport> reports) {
  std::string out = fmt::format("{:<22} {:>15} {:>15} {:>15} {:>8} {:>8} {:>6}\n", "Method", "Accuracy", "F1",
                                "AUC-PR", "thr(acc)", "thr(f1)", "n");
  out += std::string(95, '-') + "\n";
  auto cell = [](const Interval& iv) { return fmt::format("{:.3f} ± {:.3f}", iv.mean, iv.half_width); };
  for (const auto& r : reports) {
    out += fmt::format("{:<22} {:>16} {:>16} {:>16} {:>8.2f} {:>8.2f} {:>6}\n", r.method, cell(r.accuracy), cell(r.f1),
                       cell(r.auc_pr), r.threshold_accuracy, r.threshold_f1, r.n);
  }
  if (!reports.empty()) {
    out += fmt::format("positive class: {}; 95% percentile bootstrap, seed {}\n",
                       label_name(reports.front().positive_class), reports.front().bootstrap_seed);
  }
  return out;
}

}  // namespace hallucheck::eval
