#include "leaffm/fgnet.hpp"

#include <atomic>
#include <cmath>
#include <string>

namespace leaffm {

namespace {
std::atomic<uint64_t> g_forward_count{0};
}

uint64_t fgnet_forward_count() { return g_forward_count.load(std::memory_order_relaxed); }

std::span<const double> fgnet_forward(const ParameterSet& ps, uint32_t field, uint32_t gen,
                                      std::span<const double> input, FgnetCache& cache) {
  const ModelConfig& cfg = ps.cfg;
  if (!cfg.is_leaf()) throw ContractError("fgnet_forward: variant has no generation stacks");
  if (field >= ps.layout.stacks.size() || gen >= ps.layout.stacks[field].size()) {
    throw LookupError("fgnet_forward: no stack for field " + std::to_string(field) + " generator " +
                      std::to_string(gen));
  }
  if (input.size() != static_cast<size_t>(cfg.embedding_dim)) {
    throw ShapeError("fgnet_forward: input length " + std::to_string(input.size()) +
                     " != embedding dim " + std::to_string(cfg.embedding_dim));
  }
  g_forward_count.fetch_add(1, std::memory_order_relaxed);

  const Activation act = cfg.effective_activation();
  const auto& stack = ps.layout.stacks[field][gen];
  const int p = static_cast<int>(stack.size());

  cache.field = field;
  cache.gen = gen;
  cache.depth = p;
  cache.input_len = input.size();
  cache.preact.resize(static_cast<size_t>(p));
  cache.out.resize(static_cast<size_t>(p));
  cache.min_abs_preact = 1e300;

  std::span<const double> cur = input;
  for (int l = 0; l < p; ++l) {
    const DenseLayout::LayerRef& ref = stack[static_cast<size_t>(l)];
    Vec& z = cache.preact[static_cast<size_t>(l)];
    Vec& h = cache.out[static_cast<size_t>(l)];
    z.resize(static_cast<size_t>(ref.out));
    h.resize(static_cast<size_t>(ref.out));
    const double* w = ps.dense.data() + ref.w_off;
    const double* b = ps.dense.data() + ref.b_off;
    for (int i = 0; i < ref.out; ++i) {
      const double* wrow = w + static_cast<size_t>(i) * static_cast<size_t>(ref.in);
      double acc = b[i];
      for (int j = 0; j < ref.in; ++j) acc += wrow[j] * cur[static_cast<size_t>(j)];
      z[static_cast<size_t>(i)] = acc;
      if (act == Activation::relu) {
        const double a = std::fabs(acc);
        if (a < cache.min_abs_preact) cache.min_abs_preact = a;
      }
      h[static_cast<size_t>(i)] = apply_activation(acc, act);
    }
    cur = h;
  }
  return cur;
}

Vec fgnet_forward(const ParameterSet& ps, uint32_t field, uint32_t gen, const Vec& input,
                  FgnetCache* cache) {
  FgnetCache local;
  FgnetCache& c = cache != nullptr ? *cache : local;
  const auto out = fgnet_forward(ps, field, gen, std::span<const double>(input), c);
  return Vec(out.begin(), out.end());
}

void fgnet_backward(const ParameterSet& ps, FgnetCache& cache, std::span<const double> input,
                    std::span<const double> grad_out, std::span<double> grad_input,
                    Vec& dense_grad) {
  const ModelConfig& cfg = ps.cfg;
  if (cache.field >= ps.layout.stacks.size() || cache.gen >= ps.layout.stacks[cache.field].size()) {
    throw ContractError("fgnet_backward: cache does not reference a valid stack");
  }
  const auto& stack = ps.layout.stacks[cache.field][cache.gen];
  if (cache.depth != static_cast<int>(stack.size()) ||
      cache.input_len != static_cast<size_t>(cfg.embedding_dim) ||
      cache.preact.size() != stack.size()) {
    throw ContractError("fgnet_backward: cache does not match the stack shape");
  }
  if (grad_out.size() != static_cast<size_t>(cfg.embedding_dim) ||
      grad_input.size() != static_cast<size_t>(cfg.embedding_dim)) {
    throw ShapeError("fgnet_backward: gradient length mismatch");
  }
  if (dense_grad.size() != ps.dense.size()) {
    throw ContractError("fgnet_backward: dense gradient buffer size mismatch");
  }

  const Activation act = cfg.effective_activation();
  const int p = static_cast<int>(stack.size());

  Vec& dz = cache.scratch_a;
  Vec& dh = cache.scratch_b;
  dh.assign(grad_out.begin(), grad_out.end());

  for (int l = p - 1; l >= 0; --l) {
    const DenseLayout::LayerRef& ref = stack[static_cast<size_t>(l)];
    const Vec& z = cache.preact[static_cast<size_t>(l)];
    dz.resize(static_cast<size_t>(ref.out));
    for (int i = 0; i < ref.out; ++i) {
      dz[static_cast<size_t>(i)] = dh[static_cast<size_t>(i)] * activation_grad(z[static_cast<size_t>(i)], act);
    }

    std::span<const double> layer_in =
        l == 0 ? input : std::span<const double>(cache.out[static_cast<size_t>(l - 1)]);
    double* wg = dense_grad.data() + ref.w_off;
    double* bg = dense_grad.data() + ref.b_off;
    const double* w = ps.dense.data() + ref.w_off;
    for (int i = 0; i < ref.out; ++i) {
      const double di = dz[static_cast<size_t>(i)];
      if (di == 0.0) continue;
      double* wgrow = wg + static_cast<size_t>(i) * static_cast<size_t>(ref.in);
      for (int j = 0; j < ref.in; ++j) wgrow[j] += di * layer_in[static_cast<size_t>(j)];
      bg[i] += di;
    }

    if (l == 0) {
      for (int j = 0; j < ref.in; ++j) {
        double acc = 0.0;
        for (int i = 0; i < ref.out; ++i) {
          acc += w[static_cast<size_t>(i) * static_cast<size_t>(ref.in) + static_cast<size_t>(j)] *
                 dz[static_cast<size_t>(i)];
        }
        grad_input[static_cast<size_t>(j)] += acc;
      }
    } else {
      dh.assign(static_cast<size_t>(ref.in), 0.0);
      for (int i = 0; i < ref.out; ++i) {
        const double di = dz[static_cast<size_t>(i)];
        if (di == 0.0) continue;
        const double* wrow = w + static_cast<size_t>(i) * static_cast<size_t>(ref.in);
        for (int j = 0; j < ref.in; ++j) dh[static_cast<size_t>(j)] += wrow[j] * di;
      }
    }
  }
}

// ---------------------------------------------------------------------------

GeneratedFeatureSet generate_features(const ParameterSet& ps, uint32_t field, const Vec& origin) {
  GeneratedFeatureSet fs;
  fs.field = field;
  fs.origin = origin;
  const int u = ps.cfg.generated_count;
  fs.generated.resize(static_cast<size_t>(u));
  fs.caches.resize(static_cast<size_t>(u));
  for (int j = 0; j < u; ++j) {
    const auto g = fgnet_forward(ps, field, static_cast<uint32_t>(j), origin,
                                 fs.caches[static_cast<size_t>(j)]);
    fs.generated[static_cast<size_t>(j)].assign(g.begin(), g.end());
  }
  return fs;
}

MergedFeature merge_sum(const GeneratedFeatureSet& fs) {
  MergedFeature m;
  m.strategy = MergeStrategy::sum;
  m.cache.strategy = MergeStrategy::sum;
  m.vector = fs.origin;
  for (const Vec& g : fs.generated) {
    if (g.size() != m.vector.size()) throw ShapeError("merge_sum: generated vector length mismatch");
    for (size_t i = 0; i < g.size(); ++i) m.vector[i] += g[i];
  }
  return m;
}

MergedFeature merge_product(const GeneratedFeatureSet& fs, const LayerNormParams& ln) {
  if (fs.generated.size() != 1) {
    throw ConfigError("merge_product: requires exactly one generated vector, got " +
                      std::to_string(fs.generated.size()));
  }
  MergedFeature m;
  m.strategy = MergeStrategy::product;
  m.cache.strategy = MergeStrategy::product;
  const Vec& g = fs.generated[0];
  if (g.size() != fs.origin.size()) throw ShapeError("merge_product: vector length mismatch");
  m.cache.product.resize(g.size());
  for (size_t i = 0; i < g.size(); ++i) m.cache.product[i] = g[i] * fs.origin[i];
  m.vector = layer_norm_forward(m.cache.product, ln, &m.cache.ln);
  return m;
}

MergeGrads merge_backward(const Vec& grad_merged, const MergedFeature& merged,
                          const GeneratedFeatureSet& fs, const LayerNormParams* ln) {
  MergeGrads grads;
  if (merged.strategy == MergeStrategy::sum) {
    if (merged.cache.strategy != MergeStrategy::sum) {
      throw ContractError("merge_backward: cache strategy mismatch");
    }
    grads.origin = grad_merged;
    grads.generated.assign(fs.generated.size(), grad_merged);
    return grads;
  }
  if (ln == nullptr) throw ContractError("merge_backward: product merge needs layer-norm params");
  if (merged.cache.product.size() != grad_merged.size()) {
    throw ContractError("merge_backward: cache does not match gradient length");
  }
  LayerNormGrads ln_grads = layer_norm_backward(grad_merged, merged.cache.ln, *ln);
  grads.origin.assign(grad_merged.size(), 0.0);
  grads.generated.assign(1, Vec(grad_merged.size(), 0.0));
  for (size_t i = 0; i < grad_merged.size(); ++i) {
    grads.origin[i] = ln_grads.input[i] * fs.generated[0][i];
    grads.generated[0][i] = ln_grads.input[i] * fs.origin[i];
  }
  grads.ln_gain = std::move(ln_grads.gain);
  grads.ln_bias = std::move(ln_grads.bias);
  return grads;
}

}  // namespace leaffm
