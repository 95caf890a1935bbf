#pragma once

#include "leaffm/data.hpp"
#include "leaffm/fgnet.hpp"
#include "leaffm/params.hpp"

namespace leaffm {

struct ScoreBreakdown {
  double bias = 0.0;
  double linear = 0.0;
  double interaction = 0.0;
  double logit = 0.0;        // bias + linear + interaction
  double probability = 0.0;  // sigmoid(logit)
};

// Pairwise dot-product interaction over active vectors a_i = v_i * x_i via
// the sum-of-squares identity: sum_{i<j} <a_i, a_j> = (|sum a|^2 - sum |a|^2) / 2.
double fm_interaction_fast(std::span<const Vec> vectors, std::span<const double> values);

// Literal O(k^2 d) double loop; the testing oracle for the identity above.
double fm_interaction_bruteforce(std::span<const Vec> vectors, std::span<const double> values);

// Per-instance forward state reused across instances: the scaled-vector sum
// and, for leaf variants, per-entry generation and merge caches.
struct EntryCache {
  uint64_t gid = 0;
  uint32_t field = 0;
  double value = 0.0;
  std::vector<FgnetCache> gens;
  Vec merged;        // sum/product variants: F(v)
  Vec product;       // product variant: g ⊙ v
  LayerNormCache ln; // product variant
};

struct ForwardCache {
  Vec sum;  // S = sum of scaled active vectors
  std::vector<EntryCache> entries;
  size_t active = 0;
  double min_abs_preact = 1e300;  // relu stacks: distance to the nearest kink
  double min_ln_var = 1e300;      // product variant: smallest pre-norm variance
};

ScoreBreakdown score_fm(const Instance& inst, const ParameterSet& ps, ForwardCache* cache = nullptr);
ScoreBreakdown score_ffm(const Instance& inst, const ParameterSet& ps);
ScoreBreakdown score_leaf(const Instance& inst, const ParameterSet& ps, ForwardCache* cache = nullptr);

// Dispatch on ps.cfg.variant.
ScoreBreakdown score_instance(const Instance& inst, const ParameterSet& ps,
                              ForwardCache* cache = nullptr);

// Field-aware embedding slot of a feature in `own_field` paired with
// `partner_field` (fields keep f-1 slots, skipping their own).
inline int ffm_slot(uint32_t own_field, uint32_t partner_field) {
  return partner_field < own_field ? static_cast<int>(partner_field)
                                   : static_cast<int>(partner_field) - 1;
}

}  // namespace leaffm
