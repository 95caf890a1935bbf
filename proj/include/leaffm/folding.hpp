#pragma once

#include "leaffm/data.hpp"
#include "leaffm/params.hpp"

namespace leaffm {

// Per-field serving metadata carried by model files: the field kind, its
// bucket count, and the numeric standardization fitted at training time.
struct FieldInfo {
  FieldKind kind = FieldKind::categorical;
  uint32_t vocab = 1;
  double mean = 0.0;
  double stdev = 1.0;
  std::string name;
};

std::vector<FieldInfo> default_field_info(const ModelConfig& cfg);

// Serving artifact: one folded vector s_i and one folded squared-norm q_i per
// feature. Scoring is w0 + sum w_i x_i + (|sum s_i x_i|^2 - sum q_i x_i^2) / 2,
// one pass over active features, no generation stacks involved.
struct FoldedModel {
  uint32_t version = 1;
  Variant variant = Variant::fm;
  int d = 0;
  std::vector<FieldInfo> fields;
  std::vector<uint64_t> offsets;  // field -> first feature id; size f+1
  double w0 = 0.0;
  Vec w;     // m
  Matrix s;  // m x d
  Vec q;     // m

  uint64_t total_features() const { return offsets.empty() ? 0 : offsets.back(); }
};

// Collapses a trained model into the flat artifact. For the sum and product
// variants s_i is the merged vector and q_i = |s_i|^2. The add variant keeps
// the within-feature pair structure with s_i = v_i + sum_j g_ij and
// q_i = |v_i|^2 + sum_j |g_ij|^2, which reproduces the expanded pair sum
// under the sum-of-squares identity. The field-aware variant cannot fold.
FoldedModel fold(const ParameterSet& ps, const std::vector<FieldInfo>& fields = {});

enum class UnknownFeaturePolicy : uint8_t { skip = 0, error = 1 };

double score_folded(const Instance& inst, const FoldedModel& model,
                    UnknownFeaturePolicy policy = UnknownFeaturePolicy::skip,
                    uint64_t* skipped = nullptr);

// Reusable-buffer scorer for tight serving loops.
struct FoldedScorer {
  explicit FoldedScorer(const FoldedModel& model) : model_(&model) {}
  double logit(const Instance& inst);
  UnknownFeaturePolicy policy = UnknownFeaturePolicy::skip;
  uint64_t skipped = 0;

 private:
  const FoldedModel* model_;
  Vec sum_;
};

}  // namespace leaffm
