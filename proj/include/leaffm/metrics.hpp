#pragma once

#include <functional>

#include "leaffm/data.hpp"
#include "leaffm/params.hpp"

namespace leaffm {

// Rank-sum AUC in O(n log n); tied scores count one half per pair.
// Throws MetricError when only one class is present.
double auc(std::span<const double> scores, std::span<const uint8_t> labels);

struct EvalResult {
  double auc = 0.0;
  double mean_logloss = 0.0;
  size_t n_pos = 0;
  size_t n_neg = 0;
};

std::string to_string(const EvalResult& r);

EvalResult evaluate(const std::function<double(const Instance&)>& logit_fn,
                    std::span<const Instance> instances);
EvalResult evaluate(const ParameterSet& ps, std::span<const Instance> instances);

}  // namespace leaffm
