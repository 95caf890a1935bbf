#include "leaffm/params.hpp"

#include <cmath>
#include <sstream>

namespace leaffm {

Variant variant_from_string(const std::string& s) {
  if (s == "fm") return Variant::fm;
  if (s == "ffm") return Variant::ffm;
  if (s == "la_fm" || s == "la-fm") return Variant::la_fm;
  if (s == "ls_fm" || s == "ls-fm") return Variant::ls_fm;
  if (s == "lp_fm" || s == "lp-fm") return Variant::lp_fm;
  throw ConfigError("unknown variant \"" + s + "\" (expected fm|ffm|la_fm|ls_fm|lp_fm)");
}

const char* to_string(Variant v) {
  switch (v) {
    case Variant::fm: return "fm";
    case Variant::ffm: return "ffm";
    case Variant::la_fm: return "la_fm";
    case Variant::ls_fm: return "ls_fm";
    case Variant::lp_fm: return "lp_fm";
  }
  return "?";
}

const char* to_string(Activation a) { return a == Activation::relu ? "relu" : "identity"; }

Activation activation_from_string(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "identity") return Activation::identity;
  throw ConfigError("unknown activation \"" + s + "\" (expected relu|identity)");
}

uint64_t ModelConfig::total_features() const {
  uint64_t m = 0;
  for (uint32_t v : per_field_vocab) m += v;
  return m;
}

Activation ModelConfig::effective_activation() const {
  switch (variant) {
    case Variant::ls_fm: return Activation::relu;
    case Variant::lp_fm: return Activation::identity;
    default: return activation;
  }
}

int ModelConfig::embed_stride() const {
  if (variant == Variant::ffm) return (field_count() - 1) * embedding_dim;
  return embedding_dim;
}

void ModelConfig::validate() const {
  if (per_field_vocab.empty()) throw ConfigError("config: no fields");
  for (uint32_t v : per_field_vocab) {
    if (v < 1) throw ConfigError("config: per-field vocabulary must be >= 1");
  }
  if (embedding_dim < 1) throw ConfigError("config: embedding dim must be >= 1");
  if (variant == Variant::ffm && field_count() < 2) {
    throw ConfigError("config: field-aware variant needs at least 2 fields");
  }
  if (is_leaf()) {
    if (expansion_ratio < 1) throw ConfigError("config: expansion ratio must be >= 1");
    if (depth < 2) throw ConfigError("config: stack depth must be >= 2");
    if (generated_count < 0) throw ConfigError("config: generated feature count must be >= 0");
    if (variant == Variant::lp_fm && generated_count != 1) {
      throw ConfigError("config: product variant requires exactly one generated feature");
    }
  }
  if (lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
  if (learning_rate <= 0.0) throw ConfigError("config: learning rate must be > 0");
  if (batch_size < 1) throw ConfigError("config: batch size must be >= 1");
  if (max_epochs < 1) throw ConfigError("config: epochs must be >= 1");
  if (patience < 1) throw ConfigError("config: patience must be >= 1");
  if (threads < 1) throw ConfigError("config: threads must be >= 1");
}

DenseLayout build_dense_layout(const ModelConfig& cfg) {
  DenseLayout layout;
  if (!cfg.is_leaf()) return layout;
  const int d = cfg.embedding_dim;
  const int rd = cfg.hidden_width();
  const int f = cfg.field_count();
  size_t off = 0;
  layout.stacks.resize(static_cast<size_t>(f));
  for (int field = 0; field < f; ++field) {
    layout.stacks[static_cast<size_t>(field)].resize(static_cast<size_t>(cfg.generated_count));
    for (int gen = 0; gen < cfg.generated_count; ++gen) {
      auto& stack = layout.stacks[static_cast<size_t>(field)][static_cast<size_t>(gen)];
      stack.resize(static_cast<size_t>(cfg.depth));
      for (int l = 0; l < cfg.depth; ++l) {
        DenseLayout::LayerRef& ref = stack[static_cast<size_t>(l)];
        ref.in = l == 0 ? d : rd;
        ref.out = l == cfg.depth - 1 ? d : rd;
        ref.w_off = off;
        off += static_cast<size_t>(ref.in) * static_cast<size_t>(ref.out);
        ref.b_off = off;
        off += static_cast<size_t>(ref.out);
      }
    }
  }
  if (cfg.variant == Variant::lp_fm) {
    layout.ln.resize(static_cast<size_t>(f));
    for (int field = 0; field < f; ++field) {
      layout.ln[static_cast<size_t>(field)].gain_off = off;
      off += static_cast<size_t>(d);
      layout.ln[static_cast<size_t>(field)].bias_off = off;
      off += static_cast<size_t>(d);
    }
  }
  layout.total = off;
  return layout;
}

uint64_t ParameterSet::feature_id(uint32_t field, uint32_t feature) const {
  if (field >= cfg.per_field_vocab.size()) {
    throw LookupError("feature lookup: field " + std::to_string(field) + " out of range");
  }
  if (feature >= cfg.per_field_vocab[field]) {
    throw LookupError("feature lookup: feature " + std::to_string(feature) + " out of range for field " +
                      std::to_string(field));
  }
  return offsets[field] + feature;
}

std::span<const double> ParameterSet::ln_gain(uint32_t field) const {
  return {dense.data() + layout.ln[field].gain_off, static_cast<size_t>(cfg.embedding_dim)};
}

std::span<const double> ParameterSet::ln_bias(uint32_t field) const {
  return {dense.data() + layout.ln[field].bias_off, static_cast<size_t>(cfg.embedding_dim)};
}

ParameterSet build_parameters(const ModelConfig& cfg) {
  cfg.validate();
  ParameterSet ps;
  ps.cfg = cfg;
  ps.offsets.reserve(cfg.per_field_vocab.size() + 1);
  uint64_t total = 0;
  for (uint32_t v : cfg.per_field_vocab) {
    ps.offsets.push_back(total);
    total += v;
  }
  ps.offsets.push_back(total);

  Rng rng(mix_seed(cfg.seed, 0x1417));
  ps.w.assign(total, 0.0);
  ps.V = Matrix(static_cast<std::int64_t>(total), cfg.embed_stride());
  fill_normal(ps.V.data, 0.01, rng);

  ps.layout = build_dense_layout(cfg);
  ps.dense.assign(ps.layout.total, 0.0);
  for (const auto& field_stacks : ps.layout.stacks) {
    for (const auto& stack : field_stacks) {
      for (const DenseLayout::LayerRef& ref : stack) {
        std::span<double> w(ps.dense.data() + ref.w_off,
                            static_cast<size_t>(ref.in) * static_cast<size_t>(ref.out));
        fill_glorot_uniform(w, ref.in, ref.out, rng);
        // biases stay zero
      }
    }
  }
  for (const DenseLayout::LnRef& ref : ps.layout.ln) {
    for (int i = 0; i < cfg.embedding_dim; ++i) ps.dense[ref.gain_off + static_cast<size_t>(i)] = 1.0;
  }
  return ps;
}

ParamAudit audit_parameters(const ModelConfig& cfg) {
  cfg.validate();
  ParamAudit a;
  const uint64_t m = cfg.total_features();
  const uint64_t d = static_cast<uint64_t>(cfg.embedding_dim);
  const uint64_t f = static_cast<uint64_t>(cfg.field_count());
  a.linear_scalars = m;
  a.embedding_scalars = m * static_cast<uint64_t>(cfg.embed_stride());
  if (cfg.is_leaf()) {
    const uint64_t rd = static_cast<uint64_t>(cfg.hidden_width());
    const uint64_t p = static_cast<uint64_t>(cfg.depth);
    const uint64_t u = static_cast<uint64_t>(cfg.generated_count);
    const uint64_t weights_per_stack = rd * d + (p - 2) * rd * rd + d * rd;
    const uint64_t biases_per_stack = (p - 1) * rd + d;
    a.stack_weight_scalars = f * u * weights_per_stack;
    a.stack_bias_scalars = f * u * biases_per_stack;
    if (cfg.variant == Variant::lp_fm) a.ln_scalars = f * 2 * d;
  }
  a.table_count = a.linear_scalars + a.embedding_scalars + a.stack_weight_scalars;
  a.true_count = 1 + a.linear_scalars + a.embedding_scalars + a.stack_weight_scalars +
                 a.stack_bias_scalars + a.ln_scalars;
  return a;
}

std::string to_string(const ParamAudit& a, Variant variant) {
  std::ostringstream out;
  out << "variant=" << to_string(variant) << " table_count=" << a.table_count
      << " true_count=" << a.true_count << " linear=" << a.linear_scalars
      << " embedding=" << a.embedding_scalars << " stack_weights=" << a.stack_weight_scalars
      << " stack_biases=" << a.stack_bias_scalars << " layer_norm=" << a.ln_scalars;
  return out.str();
}

double l2_penalty(const ParameterSet& ps, double lambda) {
  if (lambda == 0.0) return 0.0;
  double sum = 0.0;
  for (double v : ps.w) sum += v * v;
  for (double v : ps.V.data) sum += v * v;
  for (double v : ps.dense) sum += v * v;
  return lambda * sum;
}

// ---------------------------------------------------------------------------

void GradientSet::reset(const ParameterSet& ps) {
  w0 = 0.0;
  dense.assign(ps.dense.size(), 0.0);
  touched.clear();
  slot_.clear();
  stride = static_cast<uint32_t>(ps.V.cols);
  w_grad.clear();
  v_grad.clear();
}

uint32_t GradientSet::slot_for(uint64_t gid) {
  const auto it = slot_.find(gid);
  if (it != slot_.end()) return it->second;
  const uint32_t s = static_cast<uint32_t>(touched.size());
  slot_.emplace(gid, s);
  touched.push_back(gid);
  w_grad.push_back(0.0);
  v_grad.resize(v_grad.size() + stride, 0.0);
  return s;
}

double& GradientSet::linear_grad(uint64_t gid) { return w_grad[slot_for(gid)]; }

std::span<double> GradientSet::embedding_grad(uint64_t gid) {
  const uint32_t s = slot_for(gid);
  return {v_grad.data() + static_cast<size_t>(s) * stride, stride};
}

double GradientSet::linear_grad_or_zero(uint64_t gid) const {
  const auto it = slot_.find(gid);
  return it == slot_.end() ? 0.0 : w_grad[it->second];
}

double GradientSet::embedding_grad_or_zero(uint64_t gid, uint32_t col) const {
  const auto it = slot_.find(gid);
  return it == slot_.end() ? 0.0 : v_grad[static_cast<size_t>(it->second) * stride + col];
}

void GradientSet::add(const GradientSet& other) {
  w0 += other.w0;
  if (dense.size() != other.dense.size()) throw ContractError("gradient merge: dense size mismatch");
  for (size_t i = 0; i < dense.size(); ++i) dense[i] += other.dense[i];
  for (size_t s = 0; s < other.touched.size(); ++s) {
    const uint64_t gid = other.touched[s];
    linear_grad(gid) += other.w_grad[s];
    std::span<double> dst = embedding_grad(gid);
    const double* src = other.v_grad.data() + s * other.stride;
    for (uint32_t c = 0; c < stride; ++c) dst[c] += src[c];
  }
}

// ---------------------------------------------------------------------------

AdamState make_adam_state(const ParameterSet& ps) {
  AdamState st;
  st.m_w.assign(ps.w.size(), 0.0);
  st.v_w.assign(ps.w.size(), 0.0);
  st.m_V = Matrix(ps.V.rows, ps.V.cols);
  st.v_V = Matrix(ps.V.rows, ps.V.cols);
  st.m_dense.assign(ps.dense.size(), 0.0);
  st.v_dense.assign(ps.dense.size(), 0.0);
  return st;
}

void adam_update(ParameterSet& ps, AdamState& st, const GradientSet& g, double learning_rate) {
  if (st.m_w.size() != ps.w.size() || st.m_dense.size() != ps.dense.size() ||
      st.m_V.size() != ps.V.size()) {
    throw ContractError("adam_update: state shape does not mirror parameters");
  }
  if (g.dense.size() != ps.dense.size()) {
    throw ContractError("adam_update: gradient dense size mismatch");
  }
  if (g.stride != static_cast<uint32_t>(ps.V.cols)) {
    throw ContractError("adam_update: gradient stride mismatch");
  }
  st.step += 1;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  const auto step_scalar = [&](double& theta, double& m, double& v, double grad) {
    m = st.beta1 * m + (1.0 - st.beta1) * grad;
    v = st.beta2 * v + (1.0 - st.beta2) * grad * grad;
    theta -= learning_rate * (m / bc1) / (std::sqrt(v / bc2) + st.epsilon);
  };

  step_scalar(ps.w0, st.m_w0, st.v_w0, g.w0);
  for (size_t s = 0; s < g.touched.size(); ++s) {
    const uint64_t gid = g.touched[s];
    step_scalar(ps.w[gid], st.m_w[gid], st.v_w[gid], g.w_grad[s]);
    double* row = ps.V.row(static_cast<std::int64_t>(gid));
    double* mrow = st.m_V.row(static_cast<std::int64_t>(gid));
    double* vrow = st.v_V.row(static_cast<std::int64_t>(gid));
    const double* grow = g.v_grad.data() + s * g.stride;
    for (uint32_t c = 0; c < g.stride; ++c) step_scalar(row[c], mrow[c], vrow[c], grow[c]);
  }
  for (size_t i = 0; i < ps.dense.size(); ++i) {
    step_scalar(ps.dense[i], st.m_dense[i], st.v_dense[i], g.dense[i]);
  }
}

// ---------------------------------------------------------------------------

const char* to_string(TensorClass c) {
  switch (c) {
    case TensorClass::global_bias: return "global_bias";
    case TensorClass::linear: return "linear";
    case TensorClass::embedding: return "embedding";
    case TensorClass::stack_weight: return "stack_weight";
    case TensorClass::stack_bias: return "stack_bias";
    case TensorClass::ln_gain: return "ln_gain";
    case TensorClass::ln_bias: return "ln_bias";
  }
  return "?";
}

std::vector<ScalarHandle> enumerate_scalars(const ParameterSet& ps) {
  std::vector<ScalarHandle> out;
  out.push_back({TensorClass::global_bias, 0, 0});
  for (uint64_t i = 0; i < ps.w.size(); ++i) out.push_back({TensorClass::linear, 1, i});
  for (uint64_t i = 0; i < ps.V.size(); ++i) out.push_back({TensorClass::embedding, 2, i});

  std::vector<TensorClass> dense_class(ps.dense.size(), TensorClass::stack_weight);
  for (const auto& field_stacks : ps.layout.stacks) {
    for (const auto& stack : field_stacks) {
      for (const DenseLayout::LayerRef& ref : stack) {
        const size_t nw = static_cast<size_t>(ref.in) * static_cast<size_t>(ref.out);
        for (size_t i = 0; i < nw; ++i) dense_class[ref.w_off + i] = TensorClass::stack_weight;
        for (size_t i = 0; i < static_cast<size_t>(ref.out); ++i) {
          dense_class[ref.b_off + i] = TensorClass::stack_bias;
        }
      }
    }
  }
  for (const DenseLayout::LnRef& ref : ps.layout.ln) {
    for (size_t i = 0; i < static_cast<size_t>(ps.cfg.embedding_dim); ++i) {
      dense_class[ref.gain_off + i] = TensorClass::ln_gain;
      dense_class[ref.bias_off + i] = TensorClass::ln_bias;
    }
  }
  for (uint64_t i = 0; i < ps.dense.size(); ++i) out.push_back({dense_class[i], 3, i});
  return out;
}

double& scalar_at(ParameterSet& ps, const ScalarHandle& h) {
  switch (h.kind) {
    case 0: return ps.w0;
    case 1: return ps.w[h.index];
    case 2: return ps.V.data[h.index];
    default: return ps.dense[h.index];
  }
}

double grad_at(const GradientSet& g, const ParameterSet& ps, const ScalarHandle& h) {
  switch (h.kind) {
    case 0: return g.w0;
    case 1: return g.linear_grad_or_zero(h.index);
    case 2: {
      const uint64_t row = h.index / static_cast<uint64_t>(ps.V.cols);
      const uint32_t col = static_cast<uint32_t>(h.index % static_cast<uint64_t>(ps.V.cols));
      return g.embedding_grad_or_zero(row, col);
    }
    default: return g.dense.empty() ? 0.0 : g.dense[h.index];
  }
}

}  // namespace leaffm
