#include "leaffm/folding.hpp"

#include <cmath>
#include <string>

#include "leaffm/fgnet.hpp"

namespace leaffm {

std::vector<FieldInfo> default_field_info(const ModelConfig& cfg) {
  std::vector<FieldInfo> fields(cfg.per_field_vocab.size());
  for (size_t f = 0; f < fields.size(); ++f) {
    fields[f].vocab = cfg.per_field_vocab[f];
    fields[f].kind = cfg.per_field_vocab[f] == 1 ? FieldKind::numerical : FieldKind::categorical;
    fields[f].name = "f" + std::to_string(f);
  }
  return fields;
}

FoldedModel fold(const ParameterSet& ps, const std::vector<FieldInfo>& fields) {
  const ModelConfig& cfg = ps.cfg;
  if (cfg.variant == Variant::ffm) {
    throw ConfigError("fold: the field-aware variant has no flat per-feature form");
  }
  if (!std::isfinite(ps.w0) || !all_finite(ps.w) || !all_finite(ps.V.data) ||
      !all_finite(ps.dense)) {
    throw NumericError("fold: parameters contain non-finite values");
  }

  FoldedModel out;
  out.variant = cfg.variant;
  out.d = cfg.embedding_dim;
  out.fields = fields.empty() ? default_field_info(cfg) : fields;
  if (out.fields.size() != cfg.per_field_vocab.size()) {
    throw ConfigError("fold: field info count does not match the configuration");
  }
  out.offsets = ps.offsets;
  out.w0 = ps.w0;
  out.w = ps.w;
  const uint64_t m = cfg.total_features();
  out.s = Matrix(static_cast<std::int64_t>(m), cfg.embedding_dim);
  out.q.assign(m, 0.0);

  const size_t d = static_cast<size_t>(cfg.embedding_dim);
  const size_t u = cfg.is_leaf() ? static_cast<size_t>(cfg.generated_count) : 0;
  FgnetCache cache;
  Vec product(d);
  LayerNormCache ln_cache;

  for (uint32_t field = 0; field < cfg.per_field_vocab.size(); ++field) {
    for (uint32_t feat = 0; feat < cfg.per_field_vocab[field]; ++feat) {
      const uint64_t gid = ps.offsets[field] + feat;
      const std::span<const double> v = ps.embedding(gid);
      double* s = out.s.row(static_cast<std::int64_t>(gid));
      double& q = out.q[gid];
      switch (cfg.variant) {
        case Variant::fm: {
          for (size_t c = 0; c < d; ++c) s[c] = v[c];
          q = squared_norm(v);
          break;
        }
        case Variant::la_fm: {
          for (size_t c = 0; c < d; ++c) s[c] = v[c];
          q = squared_norm(v);
          for (size_t j = 0; j < u; ++j) {
            const auto g = fgnet_forward(ps, field, static_cast<uint32_t>(j), v, cache);
            for (size_t c = 0; c < d; ++c) s[c] += g[c];
            q += squared_norm(g);
          }
          break;
        }
        case Variant::ls_fm: {
          for (size_t c = 0; c < d; ++c) s[c] = v[c];
          for (size_t j = 0; j < u; ++j) {
            const auto g = fgnet_forward(ps, field, static_cast<uint32_t>(j), v, cache);
            for (size_t c = 0; c < d; ++c) s[c] += g[c];
          }
          q = squared_norm({s, d});
          break;
        }
        case Variant::lp_fm: {
          const auto g = fgnet_forward(ps, field, 0, v, cache);
          for (size_t c = 0; c < d; ++c) product[c] = g[c] * v[c];
          layer_norm_forward(product, ps.ln_gain(field), ps.ln_bias(field), kLayerNormEpsilon,
                             {s, d}, &ln_cache);
          q = squared_norm({s, d});
          break;
        }
        case Variant::ffm:
          break;
      }
    }
  }
  return out;
}

double FoldedScorer::logit(const Instance& inst) {
  const FoldedModel& m = *model_;
  const size_t d = static_cast<size_t>(m.d);
  sum_.assign(d, 0.0);
  double linear = 0.0;
  double sum_q = 0.0;
  for (const Entry& e : inst.entries) {
    if (e.field >= m.fields.size() || e.feature >= m.fields[e.field].vocab) {
      if (policy == UnknownFeaturePolicy::error) {
        throw LookupError("score_folded: unknown feature (" + std::to_string(e.field) + "," +
                          std::to_string(e.feature) + ")");
      }
      ++skipped;
      continue;
    }
    const uint64_t gid = m.offsets[e.field] + e.feature;
    linear += m.w[gid] * e.value;
    const double* s = m.s.row(static_cast<std::int64_t>(gid));
    for (size_t c = 0; c < d; ++c) sum_[c] += s[c] * e.value;
    sum_q += m.q[gid] * e.value * e.value;
  }
  return m.w0 + linear + 0.5 * (squared_norm(sum_) - sum_q);
}

double score_folded(const Instance& inst, const FoldedModel& model, UnknownFeaturePolicy policy,
                    uint64_t* skipped) {
  FoldedScorer scorer(model);
  scorer.policy = policy;
  const double logit = scorer.logit(inst);
  if (skipped != nullptr) *skipped += scorer.skipped;
  return logit;
}

}  // namespace leaffm
