// Acceptance suite: one pass/fail line per criterion. Run with no arguments
// for the full suite, or pass criterion numbers to run a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <functional>
#include <string>
#include <vector>

#include "leaffm/data.hpp"
#include "leaffm/metrics.hpp"
#include "leaffm/model_io.hpp"
#include "leaffm/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace leaffm;
using leaffm::test::random_instance;
using leaffm::test::randomize_all;

namespace {

struct Criterion {
  int id;
  const char* name;
  std::function<bool(std::string&)> run;
};

double now_seconds() {
  return std::chrono::duration<double>(std::chrono::steady_clock::now().time_since_epoch()).count();
}

ModelConfig tiny_config(Variant v, int d = 4, int r = 2, int p = 2, int u = 2) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.per_field_vocab = {1, 4, 3};
  cfg.embedding_dim = d;
  cfg.expansion_ratio = r;
  cfg.depth = p;
  cfg.generated_count = v == Variant::lp_fm ? 1 : u;
  cfg.lambda = 1e-3;
  return cfg;
}

// ---- criterion 1: gradient correctness over the full grid ----

bool c1_gradients(std::string& detail) {
  const double t0 = now_seconds();
  double worst_ratio = 0.0;  // observed / tolerance
  int failed = 0;
  int jobs = 0;
  for (const GradCheckJob& job : gradient_check_grid()) {
    const GradCheckResult r = gradient_check(job.cfg, 2, job.tolerance, 811 + jobs);
    worst_ratio = std::max(worst_ratio, r.worst / job.tolerance);
    if (!r.pass) {
      ++failed;
      std::printf("    failing: %s\n", gradcheck_report_line(r, job.name).c_str());
    }
    ++jobs;
  }
  const double elapsed = now_seconds() - t0;
  char buf[160];
  std::snprintf(buf, sizeof(buf), "%d configs, worst error at %.2g of tolerance, %.1fs", jobs,
                worst_ratio, elapsed);
  detail = buf;
  return failed == 0 && elapsed < 120.0;
}

// ---- criterion 2: interaction identity and per-variant scoring oracles ----

bool c2_oracles(std::string& detail) {
  Rng rng(2024);
  double worst_inter = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const size_t k = 1 + rng.below(20);
    const size_t d = 1 + rng.below(8);
    std::vector<Vec> vectors(k, Vec(d));
    Vec values(k);
    for (size_t i = 0; i < k; ++i) {
      for (double& x : vectors[i]) x = rng.uniform(-1.0, 1.0);
      values[i] = rng.uniform(-2.0, 2.0);
    }
    worst_inter = std::max(worst_inter, std::fabs(fm_interaction_fast(vectors, values) -
                                                  fm_interaction_bruteforce(vectors, values)));
  }

  double worst_score = 0.0;
  for (Variant v : {Variant::la_fm, Variant::ls_fm, Variant::lp_fm}) {
    ModelConfig cfg = tiny_config(v);
    ParameterSet ps = build_parameters(cfg);
    randomize_all(ps, rng);
    for (int rep = 0; rep < 100; ++rep) {
      const Instance inst = random_instance(cfg, rng);
      worst_score = std::max(worst_score, std::fabs(score_leaf(inst, ps).logit -
                                                    leaffm::test::naive_leaf_logit(inst, ps)));
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf), "interaction |delta|<=%.2e, scoring |delta|<=%.2e", worst_inter,
                worst_score);
  detail = buf;
  return worst_inter < 1e-10 && worst_score < 1e-10;
}

// ---- criterion 3: degenerate leaf variants equal the plain model ----

bool c3_reductions(std::string& detail) {
  ModelConfig base;
  base.per_field_vocab = {1, 6, 5, 4};
  base.embedding_dim = 4;
  ModelConfig la = base;
  la.variant = Variant::la_fm;
  la.generated_count = 0;
  ModelConfig ls = base;
  ls.variant = Variant::ls_fm;
  ls.generated_count = 2;

  ParameterSet fm_ps = build_parameters(base);
  ParameterSet la_ps = build_parameters(la);
  ParameterSet ls_ps = build_parameters(ls);
  Rng rng(33);
  randomize_all(fm_ps, rng);
  la_ps.w0 = ls_ps.w0 = fm_ps.w0;
  la_ps.w = ls_ps.w = fm_ps.w;
  la_ps.V = ls_ps.V = fm_ps.V;
  for (const auto& stacks : ls_ps.layout.stacks) {
    for (const auto& stack : stacks) {
      const DenseLayout::LayerRef& last = stack.back();
      for (size_t i = 0; i < static_cast<size_t>(last.out); ++i) {
        ls_ps.dense[last.b_off + i] = -100.0;  // relu clamps the output to zero
      }
    }
  }

  double worst = 0.0;
  for (int rep = 0; rep < 1000; ++rep) {
    const Instance inst = random_instance(base, rng);
    const double fm_logit = score_fm(inst, fm_ps).logit;
    worst = std::max(worst, std::fabs(score_leaf(inst, la_ps).logit - fm_logit));
    worst = std::max(worst, std::fabs(score_leaf(inst, ls_ps).logit - fm_logit));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "|delta| <= %.2e over 1000 instances", worst);
  detail = buf;
  return worst < 1e-12;
}

// ---- criterion 4: folding reproduces the full model without the stacks ----

bool c4_folding(std::string& detail) {
  Rng rng(4);
  double worst = 0.0;
  for (Variant v : {Variant::fm, Variant::la_fm, Variant::ls_fm, Variant::lp_fm}) {
    ModelConfig cfg;
    cfg.variant = v;
    cfg.per_field_vocab = {1, 1, 9, 7, 5};
    cfg.embedding_dim = 4;
    cfg.expansion_ratio = 2;
    cfg.depth = 3;
    cfg.generated_count = v == Variant::lp_fm || v == Variant::fm ? 1 : 2;
    ParameterSet ps = build_parameters(cfg);
    randomize_all(ps, rng);
    const FoldedModel folded = fold(ps);

    std::vector<Instance> instances;
    std::vector<double> full_logits;
    for (int rep = 0; rep < 200; ++rep) {
      instances.push_back(random_instance(cfg, rng));
      full_logits.push_back(score_instance(instances.back(), ps).logit);
    }
    // Folded serving must not evaluate any generation stack, and must not
    // depend on the original stack tensors at all.
    std::fill(ps.dense.begin(), ps.dense.end(), 0.0);
    const uint64_t stack_calls = fgnet_forward_count();
    FoldedScorer scorer(folded);
    for (size_t i = 0; i < instances.size(); ++i) {
      worst = std::max(worst, std::fabs(scorer.logit(instances[i]) - full_logits[i]));
    }
    if (fgnet_forward_count() != stack_calls) {
      detail = "folded scoring evaluated a generation stack";
      return false;
    }
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "|delta| <= %.2e over 4 variants x 200 instances", worst);
  detail = buf;
  return worst < 1e-9;
}

// ---- criterion 5: parameter-count audit against the complexity formulas ----

bool c5_param_counts(std::string& detail) {
  Rng rng(5);
  int checked = 0;
  for (int rep = 0; rep < 20; ++rep) {
    ModelConfig cfg;
    const int f = 2 + static_cast<int>(rng.below(5));
    uint64_t m = 0;
    for (int i = 0; i < f; ++i) {
      const uint32_t vocab = 1 + static_cast<uint32_t>(rng.below(20));
      cfg.per_field_vocab.push_back(vocab);
      m += vocab;
    }
    const uint64_t d = 1 + rng.below(8);
    const uint64_t r = 1 + rng.below(4);
    cfg.embedding_dim = static_cast<int>(d);
    cfg.expansion_ratio = static_cast<int>(r);
    cfg.depth = 2;
    cfg.generated_count = 1;

    cfg.variant = Variant::fm;
    if (audit_parameters(cfg).table_count != m + m * d) {
      detail = "plain-model count mismatch";
      return false;
    }
    cfg.variant = Variant::ffm;
    if (audit_parameters(cfg).table_count != m + m * static_cast<uint64_t>(f - 1) * d) {
      detail = "field-aware count mismatch";
      return false;
    }
    for (Variant v : {Variant::la_fm, Variant::ls_fm, Variant::lp_fm}) {
      cfg.variant = v;
      if (audit_parameters(cfg).table_count !=
          m + m * d + static_cast<uint64_t>(f) * 2 * (r * d * d)) {
        detail = "leaf count mismatch";
        return false;
      }
    }
    ++checked;
  }
  detail = std::to_string(checked) + " randomized configs, all three formulas exact";
  return true;
}

// ---- criterion 6: rank-sum AUC equals the quadratic pairwise oracle ----

bool c6_auc(std::string& detail) {
  Rng rng(6);
  double worst = 0.0;
  for (int rep = 0; rep < 100; ++rep) {
    const size_t n = 500;
    std::vector<double> scores(n);
    std::vector<uint8_t> labels(n);
    for (size_t i = 0; i < n; ++i) {
      scores[i] = static_cast<double>(rng.below(60)) / 16.0;  // tie-heavy grid
      labels[i] = static_cast<uint8_t>(rng.below(2));
    }
    bool two_class = false;
    for (size_t i = 1; i < n; ++i) two_class |= labels[i] != labels[0];
    if (!two_class) labels[0] = labels[0] ? 0 : 1;
    worst = std::max(worst, std::fabs(auc(scores, labels) -
                                      leaffm::test::auc_pairwise(scores, labels)));
  }
  char buf[96];
  std::snprintf(buf, sizeof(buf), "max |delta| = %.3g over 100 tie-heavy sets", worst);
  detail = buf;
  return worst == 0.0;
}

// ---- criteria 7 and 8: desk-scale learning ordering on the synthetic task ----

SynthSpec learning_benchmark_spec() {
  SynthSpec spec;
  spec.count = 50000;
  spec.cardinalities = {1, 1, 400, 400, 400, 400, 400, 400, 400, 400};
  spec.squared_fields = {0, 1};
  spec.teacher_dim = 8;
  spec.teacher_seed = 424242;
  spec.noise = 0.15;
  spec.centroid_scale = 2.6;
  spec.feature_spread = 0.4;
  spec.numeric_scale = 0.5;
  spec.linear_scale = 0.2;
  spec.quadratic_scale = 0.6;
  spec.zipf_exponent = 1.15;
  return spec;
}

ModelConfig learning_benchmark_config(const SynthSpec& spec, Variant v, int u, uint64_t seed) {
  ModelConfig cfg;
  cfg.variant = v;
  cfg.per_field_vocab = spec.cardinalities;
  cfg.embedding_dim = 10;
  cfg.expansion_ratio = 2;
  cfg.depth = 2;
  cfg.generated_count = u;
  cfg.lambda = 1e-5;
  cfg.learning_rate = 0.003;
  cfg.batch_size = 256;
  cfg.max_epochs = 16;
  cfg.patience = 3;
  cfg.seed = seed;
  return cfg;
}

struct LearningResult {
  double fm = 0, la_u1 = 0, la_u3 = 0, ls = 0;
  double max_run_seconds = 0;
  bool ran = false;
};
LearningResult g_learning;

void run_learning_benchmark() {
  if (g_learning.ran) return;
  const SynthSpec spec = learning_benchmark_spec();
  std::vector<double> fm, la1, la3, ls;
  for (int s = 1; s <= 5; ++s) {
    const SynthResult synth = synth_generate(spec, 1000 + static_cast<uint64_t>(s));
    const DatasetSplit split = split_dataset(synth.instances, 2000 + static_cast<uint64_t>(s));
    const auto one = [&](Variant v, int u) {
      const ModelConfig cfg = learning_benchmark_config(spec, v, u, static_cast<uint64_t>(s));
      const double t0 = now_seconds();
      const TrainResult r = train(cfg, split);
      g_learning.max_run_seconds = std::max(g_learning.max_run_seconds, now_seconds() - t0);
      return r.run.best_val_auc;
    };
    fm.push_back(one(Variant::fm, 0));
    la1.push_back(one(Variant::la_fm, 1));
    la3.push_back(one(Variant::la_fm, 3));
    ls.push_back(one(Variant::ls_fm, 1));
    std::printf("    seed %d: fm=%.4f la_u1=%.4f la_u3=%.4f ls=%.4f\n", s, fm.back(), la1.back(),
                la3.back(), ls.back());
    std::fflush(stdout);
  }
  const auto median = [](std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
  };
  g_learning.fm = median(fm);
  g_learning.la_u1 = median(la1);
  g_learning.la_u3 = median(la3);
  g_learning.ls = median(ls);
  g_learning.ran = true;
}

bool c7_learning_ordering(std::string& detail) {
  run_learning_benchmark();
  char buf[200];
  std::snprintf(buf, sizeof(buf),
                "medians: fm=%.4f la=%.4f (+%.4f) ls=%.4f (+%.4f), max run %.0fs",
                g_learning.fm, g_learning.la_u1, g_learning.la_u1 - g_learning.fm, g_learning.ls,
                g_learning.ls - g_learning.fm, g_learning.max_run_seconds);
  detail = buf;
  return g_learning.la_u1 - g_learning.fm >= 0.005 && g_learning.ls - g_learning.fm >= 0.005 &&
         g_learning.max_run_seconds < 180.0;
}

bool c8_generated_count_direction(std::string& detail) {
  run_learning_benchmark();
  char buf[120];
  std::snprintf(buf, sizeof(buf), "median la_u3=%.4f vs la_u1=%.4f (band -0.002)",
                g_learning.la_u3, g_learning.la_u1);
  detail = buf;
  return g_learning.la_u3 >= g_learning.la_u1 - 0.002;
}

// ---- criterion 9: bit-exact determinism and file round trips ----

bool c9_determinism(std::string& detail) {
  SynthSpec spec;
  spec.count = 4000;
  spec.cardinalities = {1, 1, 40, 40, 30};
  spec.squared_fields = {0};
  spec.noise = 0.2;
  const SynthResult synth = synth_generate(spec, 17);
  const DatasetSplit split = split_dataset(synth.instances, 18);

  ModelConfig cfg;
  cfg.variant = Variant::ls_fm;
  cfg.per_field_vocab = spec.cardinalities;
  cfg.embedding_dim = 5;
  cfg.generated_count = 1;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 128;
  cfg.max_epochs = 4;
  cfg.patience = 10;
  cfg.seed = 999;
  cfg.threads = 1;

  const TrainResult a = train(cfg, split);
  const TrainResult b = train(cfg, split);
  if (a.run.epochs.size() != b.run.epochs.size()) {
    detail = "epoch counts differ";
    return false;
  }
  for (size_t i = 0; i < a.run.epochs.size(); ++i) {
    if (a.run.epochs[i].train_objective != b.run.epochs[i].train_objective ||
        a.run.epochs[i].val_auc != b.run.epochs[i].val_auc) {
      detail = "per-epoch records differ at epoch " + std::to_string(i + 1);
      return false;
    }
  }

  const FoldedModel folded = fold(a.params);
  const std::string path = "/tmp/leaffm_acceptance_model.bin";
  write_folded_model(folded, path);
  const FoldedModel back = read_folded_model(path);
  std::remove(path.c_str());
  const bool bit_exact = back.w0 == folded.w0 && back.w == folded.w &&
                         back.s.data == folded.s.data && back.q == folded.q;
  detail = std::to_string(a.run.epochs.size()) +
           " epochs reproduced bit-exactly; file round trip " +
           (bit_exact ? "bit-exact" : "DIFFERS");
  return bit_exact;
}

// ---- criterion 10: folded serving throughput ----

bool c10_throughput(std::string& detail) {
  // 39-field instances (13 numerical + 26 categorical), d=10, briefly trained.
  SynthSpec spec;
  spec.count = 6000;
  spec.cardinalities.assign(13, 1);
  spec.cardinalities.insert(spec.cardinalities.end(), 26, 1000);
  spec.squared_fields = {0, 1};
  spec.noise = 0.3;
  const SynthResult synth = synth_generate(spec, 77);
  const DatasetSplit split = split_dataset(synth.instances, 78);

  ModelConfig cfg;
  cfg.variant = Variant::la_fm;
  cfg.per_field_vocab = spec.cardinalities;
  cfg.embedding_dim = 10;
  cfg.generated_count = 1;
  cfg.learning_rate = 0.01;
  cfg.batch_size = 512;
  cfg.max_epochs = 2;
  cfg.patience = 5;
  const TrainResult trained = train(cfg, split);
  const FoldedModel folded = fold(trained.params);

  FoldedScorer scorer(folded);
  double checksum = 0.0;
  size_t scored = 0;
  const double t0 = now_seconds();
  double elapsed = 0.0;
  while (elapsed < 1.0) {
    for (const Instance& inst : split.test) {
      checksum += scorer.logit(inst);
    }
    scored += split.test.size();
    elapsed = now_seconds() - t0;
  }
  const double rate = static_cast<double>(scored) / elapsed;
  char buf[120];
  std::snprintf(buf, sizeof(buf), "%.0f instances/s on 39-field rows (checksum %.3f)", rate,
                checksum / static_cast<double>(scored));
  detail = buf;
  return rate >= 100000.0;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient-correctness", c1_gradients},
      {2, "interaction-and-scoring-oracles", c2_oracles},
      {3, "reduction-identities", c3_reductions},
      {4, "fold-equivalence", c4_folding},
      {5, "parameter-count-audit", c5_param_counts},
      {6, "auc-rank-sum-vs-pairwise", c6_auc},
      {7, "learning-ordering-vs-plain-model", c7_learning_ordering},
      {8, "generated-count-non-degradation", c8_generated_count_direction},
      {9, "determinism-and-round-trip", c9_determinism},
      {10, "serving-throughput", c10_throughput},
  };

  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));

  int failures = 0;
  for (const Criterion& c : criteria) {
    if (!selected.empty() &&
        std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    std::string detail;
    bool pass = false;
    const double t0 = now_seconds();
    try {
      pass = c.run(detail);
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    const double secs = now_seconds() - t0;
    std::printf("[%s] %2d %s: %s (%.1fs)\n", pass ? "PASS" : "FAIL", c.id, c.name, detail.c_str(),
                secs);
    std::fflush(stdout);
    if (!pass) ++failures;
  }
  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
