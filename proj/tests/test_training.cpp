#include <cmath>
#include <sstream>

#include "doctest.h"
#include "leaffm/training.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace leaffm;
using leaffm::test::random_instance;
using leaffm::test::randomize_all;

TEST_CASE("logloss values") {
  CHECK(logloss(1, 0.5) == doctest::Approx(0.6931471805599453).epsilon(1e-12));
  CHECK(logloss(1, 0.9) == doctest::Approx(0.10536051565782628).epsilon(1e-12));
  CHECK(logloss(0, 1e-15) == doctest::Approx(0.0).epsilon(1e-11));
  CHECK(std::isfinite(logloss(1, 0.0)));
  CHECK(std::isfinite(logloss(0, 1.0)));
}

TEST_CASE("backward_batch: perfect predictions leave only the penalty") {
  ModelConfig cfg;
  cfg.per_field_vocab = {2, 2};
  cfg.embedding_dim = 2;
  cfg.lambda = 1e-3;
  ParameterSet ps = build_parameters(cfg);
  // Saturate with a huge bias so p ~ 1 for label-1 instances.
  ps.w0 = 60.0;
  std::vector<Instance> batch;
  Instance inst;
  inst.label = 1;
  inst.entries = {{0, 0, 1.0}, {1, 1, 1.0}};
  batch.push_back(inst);

  GradientSet g;
  const LossReport report = backward_batch(batch, ps, g);
  CHECK(report.mean_logloss < 1e-9);
  CHECK(report.objective == doctest::Approx(report.penalty).epsilon(1e-6));
  CHECK(std::fabs(g.w0) < 1e-9);
}

TEST_CASE("backward_batch: single active feature has zero interaction gradient") {
  ModelConfig cfg;
  cfg.per_field_vocab = {3, 3};
  cfg.embedding_dim = 2;
  cfg.lambda = 0.0;
  ParameterSet ps = build_parameters(cfg);
  std::vector<Instance> batch;
  Instance inst;
  inst.label = 0;
  inst.entries = {{0, 1, 1.0}};
  batch.push_back(inst);

  GradientSet g;
  backward_batch(batch, ps, g);
  const ScoreBreakdown sb = score_fm(inst, ps);
  CHECK(g.w0 == doctest::Approx(sb.probability - 0.0).epsilon(1e-12));
  // Only pair terms touch embeddings; with one active feature the embedding
  // gradient must vanish (self pairs are excluded).
  const uint64_t gid = ps.feature_id(0, 1);
  for (uint32_t c = 0; c < 2; ++c) CHECK(std::fabs(g.embedding_grad_or_zero(gid, c)) < 1e-15);
}

TEST_CASE("gradient check passes for small models of every variant") {
  // This is the oracle test for the whole hand-derived backward pass:
  // central finite differences of the batch objective over every scalar.
  ModelConfig base;
  base.per_field_vocab = {1, 4, 3};
  base.embedding_dim = 3;
  base.lambda = 1e-3;

  ModelConfig fm = base;
  fm.variant = Variant::fm;
  CHECK(gradient_check(fm, 2, 1e-6, 101).pass);

  ModelConfig ffm = base;
  ffm.variant = Variant::ffm;
  CHECK(gradient_check(ffm, 2, 1e-6, 102).pass);

  ModelConfig la = base;
  la.variant = Variant::la_fm;
  la.expansion_ratio = 2;
  la.generated_count = 2;
  CHECK(gradient_check(la, 2, 1e-4, 103).pass);

  ModelConfig la_id = la;
  la_id.activation = Activation::identity;
  CHECK(gradient_check(la_id, 2, 1e-6, 104).pass);

  ModelConfig ls = base;
  ls.variant = Variant::ls_fm;
  ls.depth = 3;
  CHECK(gradient_check(ls, 2, 1e-4, 105).pass);

  ModelConfig lp = base;
  lp.variant = Variant::lp_fm;
  lp.generated_count = 1;
  CHECK(gradient_check(lp, 2, 1e-4, 106).pass);
}

TEST_CASE("two-thread backward matches single-thread gradients") {
  ModelConfig cfg;
  cfg.variant = Variant::ls_fm;
  cfg.per_field_vocab = {1, 6, 5};
  cfg.embedding_dim = 3;
  cfg.generated_count = 2;
  cfg.lambda = 1e-4;
  ParameterSet ps = build_parameters(cfg);
  Rng rng(55);
  randomize_all(ps, rng);
  std::vector<Instance> batch;
  for (int i = 0; i < 64; ++i) batch.push_back(random_instance(cfg, rng));

  GradientSet serial;
  backward_batch(batch, ps, serial);

  ParameterSet ps2 = ps;
  ps2.cfg.threads = 2;
  GradientSet parallel;
  const LossReport r2 = backward_batch(batch, ps2, parallel);
  CHECK(r2.count == batch.size());

  CHECK(std::fabs(serial.w0 - parallel.w0) < 1e-12);
  for (size_t i = 0; i < serial.dense.size(); ++i) {
    CHECK(std::fabs(serial.dense[i] - parallel.dense[i]) < 1e-12);
  }
  for (const uint64_t gid : serial.touched) {
    CHECK(std::fabs(serial.linear_grad_or_zero(gid) - parallel.linear_grad_or_zero(gid)) < 1e-12);
    for (uint32_t c = 0; c < 3; ++c) {
      CHECK(std::fabs(serial.embedding_grad_or_zero(gid, c) -
                      parallel.embedding_grad_or_zero(gid, c)) < 1e-12);
    }
  }
}

TEST_CASE("full-batch gradient descent on the convex reduction decreases monotonically") {
  // Embeddings frozen at zero and lambda = 0: the model is logistic
  // regression in (w0, w); plain gradient steps must monotonically reduce
  // the objective at a small learning rate.
  ModelConfig cfg;
  cfg.per_field_vocab = {1, 4};
  cfg.embedding_dim = 2;
  cfg.lambda = 0.0;
  ParameterSet ps = build_parameters(cfg);
  for (double& v : ps.V.data) v = 0.0;

  Rng rng(77);
  std::vector<Instance> data;
  for (int i = 0; i < 40; ++i) {
    Instance inst = random_instance(cfg, rng);
    inst.label = inst.entries[0].value > 0 ? 1 : 0;
    data.push_back(inst);
  }

  GradientSet g;
  double prev = batch_loss(data, ps).objective;
  for (int step = 0; step < 50; ++step) {
    backward_batch(data, ps, g);
    ps.w0 -= 1e-3 * g.w0;
    for (size_t s = 0; s < g.touched.size(); ++s) {
      ps.w[g.touched[s]] -= 1e-3 * g.w_grad[s];
    }
    const double cur = batch_loss(data, ps).objective;
    CHECK(cur <= prev + 1e-12);
    prev = cur;
  }
}

TEST_CASE("train: learnability, determinism, best-checkpoint bookkeeping") {
  SynthSpec spec;
  spec.count = 1200;
  spec.cardinalities = {1, 1, 12, 12};
  spec.squared_fields = {};
  spec.linear_scale = 1.0;
  spec.noise = 0.1;
  const SynthResult synth = synth_generate(spec, 3);
  const DatasetSplit split = split_dataset(synth.instances, 5);

  ModelConfig cfg;
  cfg.per_field_vocab = {1, 1, 12, 12};
  cfg.embedding_dim = 4;
  cfg.learning_rate = 0.05;
  cfg.batch_size = 128;
  cfg.max_epochs = 5;
  cfg.patience = 5;
  cfg.seed = 9;

  std::ostringstream log;
  const TrainResult a = train(cfg, split, &log);
  REQUIRE(!a.run.epochs.empty());
  CHECK(a.run.epochs.back().train_objective < a.run.epochs.front().train_objective);
  CHECK(a.run.best_val_auc > 0.5);

  // One log line per epoch.
  size_t lines = 0;
  std::string line;
  std::istringstream log_in(log.str());
  while (std::getline(log_in, line)) ++lines;
  CHECK(lines == a.run.epochs.size());

  // Best checkpoint tracks the max of the per-epoch validation AUC.
  double max_auc = 0.0;
  for (const EpochRecord& e : a.run.epochs) max_auc = std::max(max_auc, e.val_auc);
  CHECK(a.run.best_val_auc == max_auc);
  CHECK(evaluate(a.params, split.validation).auc == doctest::Approx(max_auc).epsilon(1e-12));

  const TrainResult b = train(cfg, split);
  REQUIRE(a.run.epochs.size() == b.run.epochs.size());
  for (size_t i = 0; i < a.run.epochs.size(); ++i) {
    CHECK(a.run.epochs[i].train_objective == b.run.epochs[i].train_objective);
    CHECK(a.run.epochs[i].val_auc == b.run.epochs[i].val_auc);
  }
}

TEST_CASE("train: early stopping triggers on flat validation AUC") {
  Rng rng(31);
  ModelConfig cfg;
  cfg.per_field_vocab = {1, 6};
  cfg.embedding_dim = 2;
  cfg.learning_rate = 1e-6;  // effectively frozen: AUC cannot improve
  cfg.batch_size = 64;
  cfg.max_epochs = 30;
  cfg.patience = 2;

  std::vector<Instance> data;
  for (int i = 0; i < 300; ++i) data.push_back(random_instance(cfg, rng));
  const DatasetSplit split = split_dataset(data, 2);
  const TrainResult r = train(cfg, split);
  CHECK(r.run.early_stopped);
  CHECK(r.run.epochs.size() < 30);
}

TEST_CASE("backward_batch flags a non-finite logit with the instance index") {
  ModelConfig cfg;
  cfg.per_field_vocab = {1, 2};
  cfg.embedding_dim = 2;
  ParameterSet ps = build_parameters(cfg);
  ps.w[0] = 1e308;
  std::vector<Instance> batch(3);
  for (auto& inst : batch) inst.entries = {{0, 0, 1.0}, {1, 1, 1.0}};
  batch[2].entries[0].value = 1e10;  // w * x overflows on this one
  GradientSet g;
  CHECK_THROWS_WITH_AS(backward_batch(batch, ps, g), doctest::Contains("instance 2"),
                       NumericError);
}

TEST_CASE("train rejects out-of-range instances") {
  ModelConfig cfg;
  cfg.per_field_vocab = {2, 2};
  DatasetSplit split;
  Instance bad;
  bad.entries = {{0, 7, 1.0}};
  for (int i = 0; i < 10; ++i) split.train.push_back(bad);
  split.validation.push_back(bad);
  CHECK_THROWS_AS(train(cfg, split), LookupError);
}

TEST_CASE("gradient check grid covers every variant and the report formats") {
  const auto jobs = gradient_check_grid();
  bool has[5] = {false, false, false, false, false};
  for (const GradCheckJob& j : jobs) has[static_cast<size_t>(j.cfg.variant)] = true;
  for (bool h : has) CHECK(h);
  const GradCheckResult r = gradient_check(jobs.front().cfg, 1, jobs.front().tolerance, 7);
  const std::string line = gradcheck_report_line(r, jobs.front().name);
  CHECK(line.find("worst=") != std::string::npos);
}
