#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "leaffm/numerics.hpp"

namespace leaffm {

enum class Variant : uint8_t { fm = 0, ffm = 1, la_fm = 2, ls_fm = 3, lp_fm = 4 };

Variant variant_from_string(const std::string& s);
const char* to_string(Variant v);
const char* to_string(Activation a);
Activation activation_from_string(const std::string& s);

constexpr double kLayerNormEpsilon = 1e-12;

struct ModelConfig {
  Variant variant = Variant::fm;
  int embedding_dim = 10;                // d
  std::vector<uint32_t> per_field_vocab; // one entry per field
  int expansion_ratio = 1;               // r: hidden width is r*d
  int depth = 2;                         // p: layers per generation stack
  int generated_count = 1;               // u: generated features per feature
  Activation activation = Activation::relu;  // add-variant choice
  double lambda = 1e-6;
  double learning_rate = 1e-4;
  int batch_size = 1024;
  int max_epochs = 50;
  int patience = 2;
  uint64_t seed = 1;
  int threads = 1;

  int field_count() const { return static_cast<int>(per_field_vocab.size()); }
  uint64_t total_features() const;
  bool is_leaf() const {
    return variant == Variant::la_fm || variant == Variant::ls_fm || variant == Variant::lp_fm;
  }
  // Generation stacks use relu for the sum variant, no activation for the
  // product variant, and the configured choice for the add variant.
  Activation effective_activation() const;
  int embed_stride() const;  // d, or (f-1)*d for the field-aware variant
  int hidden_width() const { return expansion_ratio * embedding_dim; }
  void validate() const;  // throws ConfigError
};

// Offsets of every generation-stack tensor and layer-norm parameter inside
// the flat dense buffer.
struct DenseLayout {
  struct LayerRef {
    size_t w_off = 0;
    int out = 0, in = 0;
    size_t b_off = 0;
  };
  std::vector<std::vector<std::vector<LayerRef>>> stacks;  // [field][generator][layer]
  struct LnRef {
    size_t gain_off = 0, bias_off = 0;
  };
  std::vector<LnRef> ln;  // [field], product variant only
  size_t total = 0;
};

DenseLayout build_dense_layout(const ModelConfig& cfg);

struct ParameterSet {
  ModelConfig cfg;
  std::vector<uint64_t> offsets;  // field -> first global feature id; size f+1
  double w0 = 0.0;
  Vec w;       // per-feature linear weights, size m
  Matrix V;    // m x embed_stride
  Vec dense;   // generation stacks + layer-norm parameters
  DenseLayout layout;

  uint64_t feature_id(uint32_t field, uint32_t feature) const;
  std::span<const double> embedding(uint64_t gid) const { return V.row_span(static_cast<std::int64_t>(gid)); }
  std::span<double> embedding(uint64_t gid) { return V.row_span(static_cast<std::int64_t>(gid)); }
  std::span<const double> ln_gain(uint32_t field) const;
  std::span<const double> ln_bias(uint32_t field) const;
};

// Allocates and initializes every tensor: embeddings N(0, 0.01), stack
// weights glorot-uniform, biases zero, layer-norm gain one / bias zero.
ParameterSet build_parameters(const ModelConfig& cfg);

struct ParamAudit {
  uint64_t table_count = 0;  // excludes every bias term and the global bias
  uint64_t true_count = 0;   // every trainable scalar
  uint64_t linear_scalars = 0;
  uint64_t embedding_scalars = 0;
  uint64_t stack_weight_scalars = 0;
  uint64_t stack_bias_scalars = 0;
  uint64_t ln_scalars = 0;
};

ParamAudit audit_parameters(const ModelConfig& cfg);
std::string to_string(const ParamAudit& audit, Variant variant);

// lambda * sum of squares over every trainable scalar except the global bias.
double l2_penalty(const ParameterSet& ps, double lambda);

// ---------------------------------------------------------------------------
// Gradients
// ---------------------------------------------------------------------------

// Sparse per-feature gradients are kept in an arena keyed by first touch so
// buffers survive across batches without reallocation.
struct GradientSet {
  double w0 = 0.0;
  Vec dense;

  std::vector<uint64_t> touched;  // feature ids in first-touch order
  Vec w_grad;                     // one scalar per touched feature
  Vec v_grad;                     // stride doubles per touched feature
  uint32_t stride = 0;

  void reset(const ParameterSet& ps);
  double& linear_grad(uint64_t gid);
  std::span<double> embedding_grad(uint64_t gid);
  bool has(uint64_t gid) const { return slot_.count(gid) > 0; }
  double linear_grad_or_zero(uint64_t gid) const;
  double embedding_grad_or_zero(uint64_t gid, uint32_t col) const;
  void add(const GradientSet& other);  // merge (thread partials)

 private:
  std::unordered_map<uint64_t, uint32_t> slot_;
  uint32_t slot_for(uint64_t gid);
};

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamState {
  std::int64_t step = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double m_w0 = 0.0, v_w0 = 0.0;
  Vec m_w, v_w;
  Matrix m_V, v_V;
  Vec m_dense, v_dense;
};

AdamState make_adam_state(const ParameterSet& ps);

// Bias-corrected Adam. Embedding/linear rows are updated lazily: moments of
// untouched rows are left alone. Stack and layer-norm tensors update densely.
void adam_update(ParameterSet& ps, AdamState& state, const GradientSet& grads, double learning_rate);

// ---------------------------------------------------------------------------
// Uniform scalar access (used by the gradient checker and audits)
// ---------------------------------------------------------------------------

enum class TensorClass { global_bias, linear, embedding, stack_weight, stack_bias, ln_gain, ln_bias };
const char* to_string(TensorClass c);

struct ScalarHandle {
  TensorClass cls = TensorClass::global_bias;
  int kind = 0;  // 0 = w0, 1 = w, 2 = V, 3 = dense
  uint64_t index = 0;
};

std::vector<ScalarHandle> enumerate_scalars(const ParameterSet& ps);
double& scalar_at(ParameterSet& ps, const ScalarHandle& h);
double grad_at(const GradientSet& grads, const ParameterSet& ps, const ScalarHandle& h);

}  // namespace leaffm
