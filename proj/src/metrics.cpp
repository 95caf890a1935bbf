#include "leaffm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "leaffm/scoring.hpp"
#include "leaffm/training.hpp"

namespace leaffm {

double auc(std::span<const double> scores, std::span<const uint8_t> labels) {
  if (scores.size() != labels.size()) throw ShapeError("auc: score/label count mismatch");
  const size_t n = scores.size();
  size_t n_pos = 0;
  for (uint8_t y : labels) n_pos += y;
  const size_t n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw MetricError("auc: undefined for single-class input (" + std::to_string(n_pos) +
                      " positives of " + std::to_string(n) + ")");
  }

  std::vector<uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(),
            [&](uint32_t a, uint32_t b) { return scores[a] < scores[b]; });

  // Sum of average ranks (1-based) over positives; ties share their mid-rank.
  double rank_sum_pos = 0.0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) {
      if (labels[order[k]]) rank_sum_pos += avg_rank;
    }
    i = j + 1;
  }
  const double u_stat =
      rank_sum_pos - 0.5 * static_cast<double>(n_pos) * static_cast<double>(n_pos + 1);
  return u_stat / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

std::string to_string(const EvalResult& r) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << "auc=" << r.auc << " logloss=" << r.mean_logloss << " n_pos=" << r.n_pos
      << " n_neg=" << r.n_neg;
  return out.str();
}

EvalResult evaluate(const std::function<double(const Instance&)>& logit_fn,
                    std::span<const Instance> instances) {
  if (instances.empty()) throw ConfigError("evaluate: no instances");
  std::vector<double> scores(instances.size());
  std::vector<uint8_t> labels(instances.size());
  double loss_sum = 0.0;
  for (size_t i = 0; i < instances.size(); ++i) {
    const double logit = logit_fn(instances[i]);
    scores[i] = logit;
    labels[i] = instances[i].label;
    loss_sum += logloss(instances[i].label, stable_sigmoid(logit));
  }
  EvalResult r;
  r.auc = auc(scores, labels);
  r.mean_logloss = loss_sum / static_cast<double>(instances.size());
  for (uint8_t y : labels) r.n_pos += y;
  r.n_neg = instances.size() - r.n_pos;
  return r;
}

EvalResult evaluate(const ParameterSet& ps, std::span<const Instance> instances) {
  ForwardCache ws;
  return evaluate(
      [&](const Instance& inst) { return score_instance(inst, ps, &ws).logit; }, instances);
}

}  // namespace leaffm
