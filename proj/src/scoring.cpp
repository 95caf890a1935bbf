#include "leaffm/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace leaffm {

namespace {

void check_same_length(std::span<const Vec> vectors, std::span<const double> values) {
  if (vectors.size() != values.size()) {
    throw ShapeError("interaction: vector/value count mismatch");
  }
  for (size_t i = 1; i < vectors.size(); ++i) {
    if (vectors[i].size() != vectors[0].size()) {
      throw ShapeError("interaction: active vectors must share one length");
    }
  }
}

ScoreBreakdown finish(double bias, double linear, double interaction) {
  ScoreBreakdown sb;
  sb.bias = bias;
  sb.linear = linear;
  sb.interaction = interaction;
  sb.logit = bias + linear + interaction;
  // Keep the probability in the open interval even for saturating logits.
  sb.probability = std::clamp(stable_sigmoid(sb.logit), std::numeric_limits<double>::min(),
                              1.0 - std::numeric_limits<double>::epsilon() / 2.0);
  return sb;
}

}  // namespace

double fm_interaction_fast(std::span<const Vec> vectors, std::span<const double> values) {
  check_same_length(vectors, values);
  if (vectors.empty()) return 0.0;
  const size_t d = vectors[0].size();
  Vec sum(d, 0.0);
  double sum_sq = 0.0;
  for (size_t i = 0; i < vectors.size(); ++i) {
    const double x = values[i];
    for (size_t c = 0; c < d; ++c) {
      const double a = vectors[i][c] * x;
      sum[c] += a;
      sum_sq += a * a;
    }
  }
  return 0.5 * (squared_norm(sum) - sum_sq);
}

double fm_interaction_bruteforce(std::span<const Vec> vectors, std::span<const double> values) {
  check_same_length(vectors, values);
  double total = 0.0;
  for (size_t i = 0; i < vectors.size(); ++i) {
    for (size_t j = i + 1; j < vectors.size(); ++j) {
      total += dot(vectors[i], vectors[j]) * values[i] * values[j];
    }
  }
  return total;
}

ScoreBreakdown score_fm(const Instance& inst, const ParameterSet& ps, ForwardCache* cache) {
  const size_t d = static_cast<size_t>(ps.cfg.embedding_dim);
  Vec local_sum;
  Vec& sum = cache != nullptr ? cache->sum : local_sum;
  sum.assign(d, 0.0);
  double linear = 0.0;
  double sum_sq = 0.0;
  for (const Entry& e : inst.entries) {
    const uint64_t gid = ps.feature_id(e.field, e.feature);
    linear += ps.w[gid] * e.value;
    const double* v = ps.V.row(static_cast<std::int64_t>(gid));
    for (size_t c = 0; c < d; ++c) {
      const double a = v[c] * e.value;
      sum[c] += a;
      sum_sq += a * a;
    }
  }
  if (cache != nullptr) cache->active = 0;
  return finish(ps.w0, linear, 0.5 * (squared_norm(sum) - sum_sq));
}

ScoreBreakdown score_ffm(const Instance& inst, const ParameterSet& ps) {
  if (ps.cfg.variant != Variant::ffm) {
    throw ConfigError("score_ffm: parameters are not field-aware");
  }
  const size_t d = static_cast<size_t>(ps.cfg.embedding_dim);
  double linear = 0.0;
  for (const Entry& e : inst.entries) {
    linear += ps.w[ps.feature_id(e.field, e.feature)] * e.value;
  }
  double interaction = 0.0;
  for (size_t i = 0; i < inst.entries.size(); ++i) {
    const Entry& a = inst.entries[i];
    const uint64_t ga = ps.feature_id(a.field, a.feature);
    const double* ra = ps.V.row(static_cast<std::int64_t>(ga));
    for (size_t j = i + 1; j < inst.entries.size(); ++j) {
      const Entry& b = inst.entries[j];
      if (a.field == b.field) continue;  // no slot for a feature's own field
      const uint64_t gb = ps.feature_id(b.field, b.feature);
      const double* rb = ps.V.row(static_cast<std::int64_t>(gb));
      const double* va = ra + static_cast<size_t>(ffm_slot(a.field, b.field)) * d;
      const double* vb = rb + static_cast<size_t>(ffm_slot(b.field, a.field)) * d;
      double dp = 0.0;
      for (size_t c = 0; c < d; ++c) dp += va[c] * vb[c];
      interaction += dp * a.value * b.value;
    }
  }
  return finish(ps.w0, linear, interaction);
}

ScoreBreakdown score_leaf(const Instance& inst, const ParameterSet& ps, ForwardCache* cache) {
  const ModelConfig& cfg = ps.cfg;
  if (!cfg.is_leaf()) throw ConfigError("score_leaf: variant has no generation stacks");
  const size_t d = static_cast<size_t>(cfg.embedding_dim);
  const size_t u = static_cast<size_t>(cfg.generated_count);

  ForwardCache local;
  ForwardCache& ws = cache != nullptr ? *cache : local;
  ws.sum.assign(d, 0.0);
  if (ws.entries.size() < inst.entries.size()) ws.entries.resize(inst.entries.size());
  ws.active = inst.entries.size();
  ws.min_abs_preact = 1e300;
  ws.min_ln_var = 1e300;

  double linear = 0.0;
  double sum_sq = 0.0;
  for (size_t idx = 0; idx < inst.entries.size(); ++idx) {
    const Entry& e = inst.entries[idx];
    const uint64_t gid = ps.feature_id(e.field, e.feature);
    linear += ps.w[gid] * e.value;

    EntryCache& ec = ws.entries[idx];
    ec.gid = gid;
    ec.field = e.field;
    ec.value = e.value;
    if (ec.gens.size() != u) ec.gens.resize(u);
    const std::span<const double> v = ps.embedding(gid);
    for (size_t j = 0; j < u; ++j) {
      fgnet_forward(ps, e.field, static_cast<uint32_t>(j), v, ec.gens[j]);
      if (ec.gens[j].min_abs_preact < ws.min_abs_preact) {
        ws.min_abs_preact = ec.gens[j].min_abs_preact;
      }
    }

    switch (cfg.variant) {
      case Variant::la_fm: {
        // Every generated vector is an independent feature with value x.
        for (size_t c = 0; c < d; ++c) {
          const double a = v[c] * e.value;
          ws.sum[c] += a;
          sum_sq += a * a;
        }
        for (size_t j = 0; j < u; ++j) {
          const Vec& g = ec.gens[j].out.back();
          for (size_t c = 0; c < d; ++c) {
            const double a = g[c] * e.value;
            ws.sum[c] += a;
            sum_sq += a * a;
          }
        }
        break;
      }
      case Variant::ls_fm: {
        ec.merged.assign(v.begin(), v.end());
        for (size_t j = 0; j < u; ++j) {
          const Vec& g = ec.gens[j].out.back();
          for (size_t c = 0; c < d; ++c) ec.merged[c] += g[c];
        }
        for (size_t c = 0; c < d; ++c) {
          const double a = ec.merged[c] * e.value;
          ws.sum[c] += a;
          sum_sq += a * a;
        }
        break;
      }
      case Variant::lp_fm: {
        const Vec& g = ec.gens[0].out.back();
        ec.product.resize(d);
        for (size_t c = 0; c < d; ++c) ec.product[c] = g[c] * v[c];
        ec.merged.resize(d);
        layer_norm_forward(ec.product, ps.ln_gain(e.field), ps.ln_bias(e.field),
                           kLayerNormEpsilon, ec.merged, &ec.ln);
        const double var = 1.0 / (ec.ln.inv_std * ec.ln.inv_std) - kLayerNormEpsilon;
        if (var < ws.min_ln_var) ws.min_ln_var = var;
        for (size_t c = 0; c < d; ++c) {
          const double a = ec.merged[c] * e.value;
          ws.sum[c] += a;
          sum_sq += a * a;
        }
        break;
      }
      default:
        break;
    }
  }
  return finish(ps.w0, linear, 0.5 * (squared_norm(ws.sum) - sum_sq));
}

ScoreBreakdown score_instance(const Instance& inst, const ParameterSet& ps, ForwardCache* cache) {
  switch (ps.cfg.variant) {
    case Variant::fm: return score_fm(inst, ps, cache);
    case Variant::ffm: return score_ffm(inst, ps);
    default: return score_leaf(inst, ps, cache);
  }
}

}  // namespace leaffm
