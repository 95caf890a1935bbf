#include "leaffm/numerics.hpp"

#include <cmath>
#include <string>

namespace leaffm {

uint64_t Rng::next() {
  state_ += 0x9E3779B97F4A7C15ULL;
  uint64_t z = state_;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

double Rng::uniform() {
  // 53 random bits into [0, 1)
  return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

double Rng::uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

double Rng::normal() {
  double u1 = uniform();
  if (u1 <= 0.0) u1 = 0x1.0p-53;
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
}

uint64_t Rng::below(uint64_t n) {
  return static_cast<uint64_t>((static_cast<unsigned __int128>(next()) * n) >> 64);
}

uint64_t mix_seed(uint64_t seed, uint64_t salt) {
  Rng r(seed ^ (0xA0761D6478BD642FULL * (salt + 1)));
  return r.next();
}

Vec activate(const Vec& x, Activation a) {
  Vec out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = apply_activation(x[i], a);
  return out;
}

Vec activation_mask(const Vec& x, Activation a) {
  Vec out(x.size());
  for (size_t i = 0; i < x.size(); ++i) out[i] = activation_grad(x[i], a);
  return out;
}

void layer_norm_forward(std::span<const double> x, std::span<const double> gain,
                        std::span<const double> bias, double epsilon,
                        std::span<double> out, LayerNormCache* cache) {
  const size_t h = x.size();
  if (gain.size() != h || bias.size() != h || out.size() != h) {
    throw ShapeError("layer_norm_forward: input length " + std::to_string(h) +
                     " does not match gain/bias/output length");
  }
  if (h == 0) throw ShapeError("layer_norm_forward: empty input");

  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= static_cast<double>(h);
  double var = 0.0;
  for (double v : x) {
    const double c = v - mean;
    var += c * c;
  }
  var /= static_cast<double>(h);
  const double inv_std = 1.0 / std::sqrt(var + epsilon);

  if (cache != nullptr) {
    cache->mean = mean;
    cache->inv_std = inv_std;
    cache->normalized.resize(h);
  }
  for (size_t i = 0; i < h; ++i) {
    const double n = (x[i] - mean) * inv_std;
    if (cache != nullptr) cache->normalized[i] = n;
    out[i] = gain[i] * n + bias[i];
  }
}

Vec layer_norm_forward(const Vec& x, const LayerNormParams& p, LayerNormCache* cache) {
  Vec out(x.size());
  layer_norm_forward(x, p.gain, p.bias, p.epsilon, out, cache);
  return out;
}

void layer_norm_backward_acc(std::span<const double> grad_out, const LayerNormCache& cache,
                             std::span<const double> gain, std::span<double> grad_x,
                             std::span<double> grad_gain, std::span<double> grad_bias) {
  const size_t h = grad_out.size();
  if (cache.normalized.size() != h) {
    throw ContractError("layer_norm_backward: cache does not match gradient length");
  }
  if (gain.size() != h || grad_x.size() != h || grad_gain.size() != h || grad_bias.size() != h) {
    throw ShapeError("layer_norm_backward: length mismatch");
  }

  // dnorm_i = gain_i * dh_i; dx = inv_std * (dnorm - mean(dnorm) - n * mean(dnorm ⊙ n))
  double sum_dn = 0.0;
  double sum_dn_n = 0.0;
  for (size_t i = 0; i < h; ++i) {
    const double dn = gain[i] * grad_out[i];
    sum_dn += dn;
    sum_dn_n += dn * cache.normalized[i];
  }
  const double inv_h = 1.0 / static_cast<double>(h);
  for (size_t i = 0; i < h; ++i) {
    const double dn = gain[i] * grad_out[i];
    grad_x[i] += cache.inv_std * (dn - sum_dn * inv_h - cache.normalized[i] * sum_dn_n * inv_h);
    grad_gain[i] += grad_out[i] * cache.normalized[i];
    grad_bias[i] += grad_out[i];
  }
}

LayerNormGrads layer_norm_backward(const Vec& grad_out, const LayerNormCache& cache,
                                   const LayerNormParams& p) {
  LayerNormGrads g;
  g.input.assign(grad_out.size(), 0.0);
  g.gain.assign(grad_out.size(), 0.0);
  g.bias.assign(grad_out.size(), 0.0);
  layer_norm_backward_acc(grad_out, cache, p.gain, g.input, g.gain, g.bias);
  return g;
}

void fill_normal(std::span<double> out, double sigma, Rng& rng) {
  for (double& v : out) v = sigma * rng.normal();
}

void fill_glorot_uniform(std::span<double> out, int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : out) v = rng.uniform(-bound, bound);
}

Matrix init_matrix(std::int64_t rows, std::int64_t cols, InitScheme scheme, uint64_t seed,
                   double sigma) {
  if (rows < 0 || cols < 0) throw ShapeError("init_matrix: negative shape");
  Matrix m(rows, cols);
  Rng rng(seed);
  switch (scheme) {
    case InitScheme::zeros:
      break;
    case InitScheme::glorot_uniform:
      fill_glorot_uniform(m.data, static_cast<int>(cols), static_cast<int>(rows), rng);
      break;
    case InitScheme::normal:
      fill_normal(m.data, sigma, rng);
      break;
  }
  return m;
}

Vec init_vector(size_t n, InitScheme scheme, uint64_t seed, double sigma) {
  Vec v(n, 0.0);
  Rng rng(seed);
  switch (scheme) {
    case InitScheme::zeros:
      break;
    case InitScheme::glorot_uniform:
      fill_glorot_uniform(v, static_cast<int>(n), 1, rng);
      break;
    case InitScheme::normal:
      fill_normal(v, sigma, rng);
      break;
  }
  return v;
}

void require_finite(std::span<const double> xs, const char* what) {
  for (double v : xs) {
    if (!std::isfinite(v)) throw NumericError(std::string("non-finite value in ") + what);
  }
}

bool all_finite(std::span<const double> xs) {
  for (double v : xs) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

double stable_sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

}  // namespace leaffm
