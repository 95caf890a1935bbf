#include "leaffm/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>
#include <thread>

namespace leaffm {

double logloss(uint8_t label, double p) {
  const double clamped = std::clamp(p, 1e-12, 1.0 - 1e-12);
  return label ? -std::log(clamped) : -std::log1p(-clamped);
}

namespace {

struct BackScratch {
  Vec d_gen;
  Vec d_merged;
  Vec d_prod;
};

void instance_backward(const Instance& inst, const ParameterSet& ps, ForwardCache& ws,
                       double dlogit, GradientSet& g, BackScratch& s) {
  const ModelConfig& cfg = ps.cfg;
  const size_t d = static_cast<size_t>(cfg.embedding_dim);
  g.w0 += dlogit;

  switch (cfg.variant) {
    case Variant::fm: {
      for (const Entry& e : inst.entries) {
        const uint64_t gid = ps.feature_id(e.field, e.feature);
        g.linear_grad(gid) += dlogit * e.value;
        const std::span<const double> v = ps.embedding(gid);
        const std::span<double> vg = g.embedding_grad(gid);
        for (size_t c = 0; c < d; ++c) {
          vg[c] += dlogit * e.value * (ws.sum[c] - v[c] * e.value);
        }
      }
      return;
    }
    case Variant::ffm: {
      for (const Entry& e : inst.entries) {
        const uint64_t gid = ps.feature_id(e.field, e.feature);
        g.linear_grad(gid) += dlogit * e.value;
        g.embedding_grad(gid);  // reserve the slot
      }
      for (size_t i = 0; i < inst.entries.size(); ++i) {
        const Entry& a = inst.entries[i];
        const uint64_t ga = ps.feature_id(a.field, a.feature);
        for (size_t j = i + 1; j < inst.entries.size(); ++j) {
          const Entry& b = inst.entries[j];
          if (a.field == b.field) continue;
          const uint64_t gb = ps.feature_id(b.field, b.feature);
          const double coef = dlogit * a.value * b.value;
          const size_t off_a = static_cast<size_t>(ffm_slot(a.field, b.field)) * d;
          const size_t off_b = static_cast<size_t>(ffm_slot(b.field, a.field)) * d;
          const double* va = ps.V.row(static_cast<std::int64_t>(ga)) + off_a;
          const double* vb = ps.V.row(static_cast<std::int64_t>(gb)) + off_b;
          const std::span<double> gga = g.embedding_grad(ga);
          const std::span<double> ggb = g.embedding_grad(gb);
          for (size_t c = 0; c < d; ++c) {
            gga[off_a + c] += coef * vb[c];
            ggb[off_b + c] += coef * va[c];
          }
        }
      }
      return;
    }
    default:
      break;
  }

  // Leaf variants walk the cached per-entry state.
  const size_t u = static_cast<size_t>(cfg.generated_count);
  for (size_t idx = 0; idx < inst.entries.size(); ++idx) {
    EntryCache& ec = ws.entries[idx];
    const double x = ec.value;
    g.linear_grad(ec.gid) += dlogit * x;
    const std::span<const double> v = ps.embedding(ec.gid);
    const std::span<double> vg = g.embedding_grad(ec.gid);

    switch (cfg.variant) {
      case Variant::la_fm: {
        for (size_t c = 0; c < d; ++c) vg[c] += dlogit * x * (ws.sum[c] - v[c] * x);
        s.d_gen.resize(d);
        for (size_t j = 0; j < u; ++j) {
          const Vec& gvec = ec.gens[j].out.back();
          for (size_t c = 0; c < d; ++c) s.d_gen[c] = dlogit * x * (ws.sum[c] - gvec[c] * x);
          fgnet_backward(ps, ec.gens[j], v, s.d_gen, vg, g.dense);
        }
        break;
      }
      case Variant::ls_fm: {
        s.d_merged.resize(d);
        for (size_t c = 0; c < d; ++c) {
          s.d_merged[c] = dlogit * x * (ws.sum[c] - ec.merged[c] * x);
          vg[c] += s.d_merged[c];
        }
        for (size_t j = 0; j < u; ++j) {
          fgnet_backward(ps, ec.gens[j], v, s.d_merged, vg, g.dense);
        }
        break;
      }
      case Variant::lp_fm: {
        s.d_merged.resize(d);
        for (size_t c = 0; c < d; ++c) s.d_merged[c] = dlogit * x * (ws.sum[c] - ec.merged[c] * x);
        s.d_prod.assign(d, 0.0);
        const DenseLayout::LnRef& ref = ps.layout.ln[ec.field];
        layer_norm_backward_acc(s.d_merged, ec.ln, ps.ln_gain(ec.field), s.d_prod,
                                {g.dense.data() + ref.gain_off, d},
                                {g.dense.data() + ref.bias_off, d});
        const Vec& gvec = ec.gens[0].out.back();
        s.d_gen.resize(d);
        for (size_t c = 0; c < d; ++c) {
          vg[c] += s.d_prod[c] * gvec[c];
          s.d_gen[c] = s.d_prod[c] * v[c];
        }
        fgnet_backward(ps, ec.gens[0], v, s.d_gen, vg, g.dense);
        break;
      }
      default:
        break;
    }
  }
}

void add_l2_contribution(const ParameterSet& ps, GradientSet& g) {
  const double lambda = ps.cfg.lambda;
  if (lambda == 0.0) return;
  for (size_t s = 0; s < g.touched.size(); ++s) {
    const uint64_t gid = g.touched[s];
    g.w_grad[s] += 2.0 * lambda * ps.w[gid];
    const double* row = ps.V.row(static_cast<std::int64_t>(gid));
    double* grow = g.v_grad.data() + s * g.stride;
    for (uint32_t c = 0; c < g.stride; ++c) grow[c] += 2.0 * lambda * row[c];
  }
  for (size_t i = 0; i < ps.dense.size(); ++i) g.dense[i] += 2.0 * lambda * ps.dense[i];
}

template <typename GetInstance>
void backward_range(size_t begin, size_t end, GetInstance get, const ParameterSet& ps,
                    GradientSet& g, std::vector<double>& predictions,
                    std::vector<uint8_t>& labels, double& loss_sum, size_t batch_size) {
  ForwardCache ws;
  BackScratch scratch;
  for (size_t i = begin; i < end; ++i) {
    const Instance& inst = get(i);
    const ScoreBreakdown sb = score_instance(inst, ps, &ws);
    if (!std::isfinite(sb.logit)) {
      throw NumericError("backward_batch: non-finite logit at batch instance " + std::to_string(i));
    }
    predictions[i] = sb.probability;
    labels[i] = inst.label;
    loss_sum += logloss(inst.label, sb.probability);
    const double dlogit = (sb.probability - static_cast<double>(inst.label)) /
                          static_cast<double>(batch_size);
    instance_backward(inst, ps, ws, dlogit, g, scratch);
  }
}

template <typename GetInstance>
LossReport backward_batch_impl(size_t n, GetInstance get, const ParameterSet& ps, GradientSet& g) {
  if (n == 0) throw ConfigError("backward_batch: empty batch");
  g.reset(ps);
  LossReport report;
  report.count = n;
  report.predictions.assign(n, 0.0);
  report.labels.assign(n, 0);

  const int threads = std::min<int>(ps.cfg.threads, static_cast<int>(n));
  double loss_sum = 0.0;
  if (threads <= 1) {
    backward_range(0, n, get, ps, g, report.predictions, report.labels, loss_sum, n);
  } else {
    std::vector<GradientSet> partials(static_cast<size_t>(threads));
    std::vector<double> partial_loss(static_cast<size_t>(threads), 0.0);
    std::vector<std::exception_ptr> errors(static_cast<size_t>(threads));
    std::vector<std::thread> pool;
    const size_t chunk = (n + static_cast<size_t>(threads) - 1) / static_cast<size_t>(threads);
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t]() {
        try {
          const size_t begin = static_cast<size_t>(t) * chunk;
          const size_t end = std::min(n, begin + chunk);
          partials[static_cast<size_t>(t)].reset(ps);
          if (begin < end) {
            backward_range(begin, end, get, ps, partials[static_cast<size_t>(t)],
                           report.predictions, report.labels,
                           partial_loss[static_cast<size_t>(t)], n);
          }
        } catch (...) {
          errors[static_cast<size_t>(t)] = std::current_exception();
        }
      });
    }
    for (std::thread& th : pool) th.join();
    for (const std::exception_ptr& e : errors) {
      if (e) std::rethrow_exception(e);
    }
    for (int t = 0; t < threads; ++t) {
      g.add(partials[static_cast<size_t>(t)]);
      loss_sum += partial_loss[static_cast<size_t>(t)];
    }
  }

  add_l2_contribution(ps, g);
  report.mean_logloss = loss_sum / static_cast<double>(n);
  report.penalty = l2_penalty(ps, ps.cfg.lambda);
  report.objective = report.mean_logloss + report.penalty;
  return report;
}

}  // namespace

LossReport batch_loss(std::span<const Instance> batch, const ParameterSet& ps, ForwardCache* ws) {
  if (batch.empty()) throw ConfigError("batch_loss: empty batch");
  ForwardCache local;
  ForwardCache& cache = ws != nullptr ? *ws : local;
  LossReport report;
  report.count = batch.size();
  report.predictions.reserve(batch.size());
  report.labels.reserve(batch.size());
  double loss_sum = 0.0;
  for (const Instance& inst : batch) {
    const ScoreBreakdown sb = score_instance(inst, ps, &cache);
    report.predictions.push_back(sb.probability);
    report.labels.push_back(inst.label);
    loss_sum += logloss(inst.label, sb.probability);
  }
  report.mean_logloss = loss_sum / static_cast<double>(batch.size());
  report.penalty = l2_penalty(ps, ps.cfg.lambda);
  report.objective = report.mean_logloss + report.penalty;
  return report;
}

LossReport backward_batch(std::span<const Instance> batch, const ParameterSet& ps,
                          GradientSet& grads) {
  return backward_batch_impl(
      batch.size(), [&](size_t i) -> const Instance& { return batch[i]; }, ps, grads);
}

// ---------------------------------------------------------------------------

namespace {

void check_instances(std::span<const Instance> instances, const ModelConfig& cfg,
                     const char* split_name) {
  for (size_t i = 0; i < instances.size(); ++i) {
    for (const Entry& e : instances[i].entries) {
      if (e.field >= cfg.per_field_vocab.size() || e.feature >= cfg.per_field_vocab[e.field]) {
        throw LookupError(std::string(split_name) + " instance " + std::to_string(i) +
                          ": entry (" + std::to_string(e.field) + "," + std::to_string(e.feature) +
                          ") outside the configured feature space");
      }
      if (!std::isfinite(e.value)) {
        throw NumericError(std::string(split_name) + " instance " + std::to_string(i) +
                           ": non-finite value");
      }
    }
  }
}

}  // namespace

TrainResult train(const ModelConfig& cfg, const DatasetSplit& split, std::ostream* log) {
  cfg.validate();
  if (split.train.empty() || split.validation.empty()) {
    throw ConfigError("train: train and validation splits must be nonempty");
  }
  check_instances(split.train, cfg, "train");
  check_instances(split.validation, cfg, "validation");
  check_instances(split.test, cfg, "test");

  ParameterSet ps = build_parameters(cfg);
  AdamState adam = make_adam_state(ps);
  GradientSet grads;

  TrainResult result;
  result.run.best_val_auc = -1.0;
  int epochs_since_best = 0;

  for (int epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto batches = make_batches(split.train.size(), static_cast<size_t>(cfg.batch_size),
                                      mix_seed(cfg.seed, static_cast<uint64_t>(epoch)));
    double loss_sum = 0.0;
    for (const std::vector<uint32_t>& batch : batches) {
      const LossReport report = backward_batch_impl(
          batch.size(), [&](size_t i) -> const Instance& { return split.train[batch[i]]; }, ps,
          grads);
      loss_sum += report.mean_logloss * static_cast<double>(batch.size());
      adam_update(ps, adam, grads, cfg.learning_rate);
    }
    const double train_logloss = loss_sum / static_cast<double>(split.train.size());
    const double objective = train_logloss + l2_penalty(ps, cfg.lambda);
    if (!std::isfinite(objective)) {
      throw NumericError("train: objective diverged (non-finite) at epoch " +
                         std::to_string(epoch));
    }

    const EvalResult val = evaluate(ps, split.validation);
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.run.epochs.push_back({epoch, objective, val.auc, val.mean_logloss, seconds});
    if (log != nullptr) {
      std::ostringstream line;
      line.precision(6);
      line << std::fixed << "epoch=" << epoch << " objective=" << objective
           << " val_auc=" << val.auc << " val_logloss=" << val.mean_logloss
           << " seconds=" << seconds;
      (*log) << line.str() << '\n';
    }

    if (val.auc > result.run.best_val_auc) {
      result.run.best_val_auc = val.auc;
      result.run.best_epoch = epoch;
      result.params = ps;
      epochs_since_best = 0;
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= cfg.patience) {
        result.run.early_stopped = true;
        break;
      }
    }
  }
  return result;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

namespace {

std::vector<Instance> coverage_batch(const ModelConfig& cfg, Rng& rng) {
  uint32_t max_vocab = 1;
  for (uint32_t v : cfg.per_field_vocab) max_vocab = std::max(max_vocab, v);
  const size_t n = std::max<size_t>(max_vocab, 4);
  std::vector<Instance> batch;
  batch.reserve(n);
  for (size_t t = 0; t < n; ++t) {
    Instance inst;
    inst.label = static_cast<uint8_t>(rng.below(2));
    for (uint32_t f = 0; f < cfg.per_field_vocab.size(); ++f) {
      Entry e;
      e.field = f;
      const uint32_t vocab = cfg.per_field_vocab[f];
      e.feature = static_cast<uint32_t>(t % vocab);
      if (vocab == 1) {
        const double mag = rng.uniform(0.3, 1.2);
        e.value = rng.below(2) ? mag : -mag;
      } else {
        e.value = 1.0;
      }
      inst.entries.push_back(e);
    }
    batch.push_back(std::move(inst));
  }
  return batch;
}

// Deep stacks amplify weight products, so the sampling magnitude shrinks
// with depth and with every rejected attempt to keep logits unsaturated and
// finite-difference curvature moderate.
void randomize_parameters(ParameterSet& ps, Rng& rng, int attempt) {
  const double depth_scale = ps.cfg.is_leaf() ? 1.0 / (1.0 + 0.3 * (ps.cfg.depth - 2)) : 1.0;
  const double scale = 0.6 * depth_scale * std::pow(0.85, attempt);
  for (const ScalarHandle& h : enumerate_scalars(ps)) {
    scalar_at(ps, h) = rng.uniform(-scale, scale);
  }
}

// A case is usable when no relu pre-activation sits near its kink, the
// product-variant variance is healthy, and no logit saturates the sigmoid.
bool case_is_smooth(std::span<const Instance> batch, const ParameterSet& ps) {
  ForwardCache ws;
  for (const Instance& inst : batch) {
    const ScoreBreakdown sb = score_instance(inst, ps, &ws);
    if (!std::isfinite(sb.logit) || std::fabs(sb.logit) > 12.0) return false;
    if (ps.cfg.is_leaf() && ps.cfg.effective_activation() == Activation::relu &&
        ws.min_abs_preact < 1e-3) {
      return false;
    }
    if (ps.cfg.variant == Variant::lp_fm && ws.min_ln_var < 1e-4) return false;
  }
  return true;
}

}  // namespace

GradCheckResult gradient_check(const ModelConfig& cfg, int n_cases, double tolerance,
                               uint64_t seed) {
  ModelConfig check_cfg = cfg;
  check_cfg.threads = 1;
  check_cfg.validate();

  GradCheckResult result;
  result.cfg = check_cfg;
  result.tolerance = tolerance;
  std::vector<std::pair<TensorClass, double>> per_class;
  const auto class_slot = [&](TensorClass c) -> double& {
    for (auto& [cls, err] : per_class) {
      if (cls == c) return err;
    }
    per_class.emplace_back(c, 0.0);
    return per_class.back().second;
  };

  constexpr double kStep = 1e-6;
  // Central differences at this step resolve gradients only down to roughly
  // this absolute level in double precision; differences below it are
  // measurement noise of the oracle, not analytic error.
  constexpr double kFdNoiseFloor = 5e-8;
  GradientSet grads;
  for (int case_i = 0; case_i < n_cases; ++case_i) {
    ParameterSet ps = build_parameters(check_cfg);
    std::vector<Instance> batch;
    bool smooth = false;
    for (int attempt = 0; attempt < 25 && !smooth; ++attempt) {
      Rng rng(mix_seed(seed, static_cast<uint64_t>(case_i) * 131 + static_cast<uint64_t>(attempt)));
      randomize_parameters(ps, rng, attempt);
      batch = coverage_batch(check_cfg, rng);
      smooth = case_is_smooth(batch, ps);
    }

    const LossReport analytic_report = backward_batch(batch, ps, grads);
    (void)analytic_report;

    ForwardCache ws;
    const std::vector<ScalarHandle> handles = enumerate_scalars(ps);
    for (const ScalarHandle& h : handles) {
      double& theta = scalar_at(ps, h);
      const double saved = theta;
      theta = saved + kStep;
      const double up = batch_loss(batch, ps, &ws).objective;
      theta = saved - kStep;
      const double down = batch_loss(batch, ps, &ws).objective;
      theta = saved;
      const double fd = (up - down) / (2.0 * kStep);
      const double analytic = grad_at(grads, ps, h);
      const double excess = std::max(0.0, std::fabs(analytic - fd) - kFdNoiseFloor);
      const double rel = excess / std::max({std::fabs(analytic), std::fabs(fd), 1e-3});
      double& slot = class_slot(h.cls);
      if (rel > slot) slot = rel;
      if (rel > result.worst) result.worst = rel;
    }
  }
  result.per_class = std::move(per_class);
  result.pass = result.worst < tolerance;
  return result;
}

std::vector<GradCheckJob> gradient_check_grid() {
  std::vector<GradCheckJob> jobs;
  ModelConfig base;
  base.per_field_vocab = {1, 4, 3};
  base.embedding_dim = 3;
  base.lambda = 1e-3;

  const auto named = [&](const ModelConfig& cfg, double tol, const std::string& name) {
    jobs.push_back({cfg, tol, name});
  };

  {
    ModelConfig cfg = base;
    cfg.variant = Variant::fm;
    named(cfg, 1e-6, "fm");
    cfg.variant = Variant::ffm;
    named(cfg, 1e-6, "ffm");
  }
  for (int p : {2, 3, 5}) {
    for (int r : {1, 2}) {
      const std::string suffix =
          " p=" + std::to_string(p) + " r=" + std::to_string(r);
      for (int u : {1, 3}) {
        ModelConfig cfg = base;
        cfg.depth = p;
        cfg.expansion_ratio = r;
        cfg.generated_count = u;
        cfg.variant = Variant::la_fm;
        cfg.activation = Activation::relu;
        named(cfg, 1e-4, "la_fm/relu" + suffix + " u=" + std::to_string(u));
        cfg.activation = Activation::identity;
        named(cfg, 1e-6, "la_fm/identity" + suffix + " u=" + std::to_string(u));
        cfg.variant = Variant::ls_fm;
        named(cfg, 1e-4, "ls_fm" + suffix + " u=" + std::to_string(u));
      }
      ModelConfig cfg = base;
      cfg.depth = p;
      cfg.expansion_ratio = r;
      cfg.generated_count = 1;
      cfg.variant = Variant::lp_fm;
      named(cfg, 1e-4, "lp_fm" + suffix);
    }
  }
  return jobs;
}

std::string gradcheck_report_line(const GradCheckResult& r, const std::string& name) {
  std::ostringstream out;
  out << (r.pass ? "pass" : "FAIL") << "  " << name << "  worst=" << r.worst
      << " tol=" << r.tolerance << " ";
  for (const auto& [cls, err] : r.per_class) {
    out << ' ' << to_string(cls) << '=' << err;
  }
  return out.str();
}

}  // namespace leaffm
