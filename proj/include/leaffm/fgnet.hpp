#pragma once

#include "leaffm/params.hpp"

namespace leaffm {

// Forward cache of one generation stack: pre-activations and post-activation
// outputs per layer. out.back() is the generated vector. scratch_a/scratch_b
// are reused by the backward pass.
struct FgnetCache {
  uint32_t field = 0;
  uint32_t gen = 0;
  int depth = 0;
  size_t input_len = 0;
  std::vector<Vec> preact;
  std::vector<Vec> out;
  double min_abs_preact = 1e300;  // relu stacks only; kink-proximity monitor
  Vec scratch_a, scratch_b;
};

// Runs the stack for (field, gen) on input (length d), recording the cache.
// Returns a view of the generated vector (owned by the cache).
std::span<const double> fgnet_forward(const ParameterSet& ps, uint32_t field, uint32_t gen,
                                      std::span<const double> input, FgnetCache& cache);
Vec fgnet_forward(const ParameterSet& ps, uint32_t field, uint32_t gen, const Vec& input,
                  FgnetCache* cache = nullptr);

// Exact backward through the stack. Adds the gradient with respect to the
// input into grad_input and weight/bias gradients into dense_grad (laid out
// per ps.layout).
void fgnet_backward(const ParameterSet& ps, FgnetCache& cache, std::span<const double> input,
                    std::span<const double> grad_out, std::span<double> grad_input,
                    Vec& dense_grad);

// Diagnostic counter: number of stack forward evaluations in this process.
// The folded serving path must leave it untouched.
uint64_t fgnet_forward_count();

// ---------------------------------------------------------------------------
// Feature sets and merges
// ---------------------------------------------------------------------------

struct GeneratedFeatureSet {
  Vec origin;
  std::vector<Vec> generated;
  uint32_t field = 0;
  std::vector<FgnetCache> caches;
};

// Runs every generator of the feature's field.
GeneratedFeatureSet generate_features(const ParameterSet& ps, uint32_t field, const Vec& origin);

enum class MergeStrategy : uint8_t { sum = 0, product = 1 };

struct MergeCache {
  MergeStrategy strategy = MergeStrategy::sum;
  Vec product;  // product merge: g ⊙ origin
  LayerNormCache ln;
};

struct MergedFeature {
  Vec vector;
  MergeStrategy strategy = MergeStrategy::sum;
  MergeCache cache;
};

// origin + sum of generated vectors.
MergedFeature merge_sum(const GeneratedFeatureSet& fs);

// layer_norm(g ⊙ origin); requires exactly one generated vector.
MergedFeature merge_product(const GeneratedFeatureSet& fs, const LayerNormParams& ln);

struct MergeGrads {
  Vec origin;
  std::vector<Vec> generated;
  Vec ln_gain, ln_bias;  // product merge only
};

MergeGrads merge_backward(const Vec& grad_merged, const MergedFeature& merged,
                          const GeneratedFeatureSet& fs, const LayerNormParams* ln = nullptr);

}  // namespace leaffm
