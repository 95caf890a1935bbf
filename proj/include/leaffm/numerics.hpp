#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "leaffm/errors.hpp"

namespace leaffm {

using Vec = std::vector<double>;

// Row-major dense matrix.
struct Matrix {
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  Vec data;

  Matrix() = default;
  Matrix(std::int64_t r, std::int64_t c) : rows(r), cols(c), data(static_cast<size_t>(r * c), 0.0) {}

  double* row(std::int64_t i) { return data.data() + i * cols; }
  const double* row(std::int64_t i) const { return data.data() + i * cols; }
  std::span<double> row_span(std::int64_t i) { return {row(i), static_cast<size_t>(cols)}; }
  std::span<const double> row_span(std::int64_t i) const { return {row(i), static_cast<size_t>(cols)}; }
  double& at(std::int64_t i, std::int64_t j) { return data[static_cast<size_t>(i * cols + j)]; }
  double at(std::int64_t i, std::int64_t j) const { return data[static_cast<size_t>(i * cols + j)]; }
  size_t size() const { return data.size(); }
};

// Deterministic RNG with a fixed cross-platform sequence (splitmix64 core).
// Distributions are hand-rolled so the stream does not depend on the
// standard library implementation.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}
  uint64_t next();
  double uniform();                      // [0, 1)
  double uniform(double lo, double hi);  // [lo, hi)
  double normal();                       // standard normal (Box-Muller)
  uint64_t below(uint64_t n);            // [0, n)
 private:
  uint64_t state_;
};

uint64_t mix_seed(uint64_t seed, uint64_t salt);

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

enum class Activation { relu, identity };

inline double apply_activation(double z, Activation a) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : z;
}

// Derivative with respect to the pre-activation; relu's subgradient at 0 is 0.
inline double activation_grad(double z, Activation a) {
  return a == Activation::relu ? (z > 0.0 ? 1.0 : 0.0) : 1.0;
}

Vec activate(const Vec& x, Activation a);
Vec activation_mask(const Vec& x, Activation a);

// ---------------------------------------------------------------------------
// Layer normalization
// ---------------------------------------------------------------------------

struct LayerNormParams {
  Vec gain;
  Vec bias;
  double epsilon = 1e-12;
};

struct LayerNormCache {
  double mean = 0.0;
  double inv_std = 0.0;  // 1 / sqrt(var + epsilon)
  Vec normalized;        // (x - mean) * inv_std
};

// out = gain ⊙ (x - mean) / sqrt(var + epsilon) + bias, with per-sample
// mean and population variance over the vector.
void layer_norm_forward(std::span<const double> x, std::span<const double> gain,
                        std::span<const double> bias, double epsilon,
                        std::span<double> out, LayerNormCache* cache);
Vec layer_norm_forward(const Vec& x, const LayerNormParams& p, LayerNormCache* cache = nullptr);

// Accumulates gradients into grad_x / grad_gain / grad_bias.
void layer_norm_backward_acc(std::span<const double> grad_out, const LayerNormCache& cache,
                             std::span<const double> gain, std::span<double> grad_x,
                             std::span<double> grad_gain, std::span<double> grad_bias);

struct LayerNormGrads {
  Vec input, gain, bias;
};
LayerNormGrads layer_norm_backward(const Vec& grad_out, const LayerNormCache& cache,
                                   const LayerNormParams& p);

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

enum class InitScheme { zeros, glorot_uniform, normal };

void fill_normal(std::span<double> out, double sigma, Rng& rng);
void fill_glorot_uniform(std::span<double> out, int fan_in, int fan_out, Rng& rng);
Matrix init_matrix(std::int64_t rows, std::int64_t cols, InitScheme scheme, uint64_t seed,
                   double sigma = 1.0);
Vec init_vector(size_t n, InitScheme scheme, uint64_t seed, double sigma = 1.0);

// ---------------------------------------------------------------------------
// Small helpers
// ---------------------------------------------------------------------------

void require_finite(std::span<const double> xs, const char* what);
bool all_finite(std::span<const double> xs);
double stable_sigmoid(double z);

inline void add_scaled(std::span<double> dst, std::span<const double> src, double scale) {
  for (size_t i = 0; i < dst.size(); ++i) dst[i] += scale * src[i];
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_norm(std::span<const double> a) { return dot(a, a); }

}  // namespace leaffm
