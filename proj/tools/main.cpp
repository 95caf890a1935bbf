// Command-line front end: data prep, training, evaluation, folding, stream
// scoring, gradient checking, synthetic data and hyper-parameter sweeps.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include "CLI11.hpp"
#include "leaffm/data.hpp"
#include "leaffm/metrics.hpp"
#include "leaffm/model_io.hpp"
#include "leaffm/runconfig.hpp"
#include "leaffm/training.hpp"

namespace {

using namespace leaffm;

struct LoadedData {
  DatasetSplit split;
  std::vector<FieldInfo> fields;
};

std::vector<FieldInfo> fields_from_schema(const std::vector<FieldSchema>& schema,
                                          const HashSpec& hs, const NumericStats& stats) {
  std::vector<FieldInfo> fields(schema.size());
  for (size_t f = 0; f < schema.size(); ++f) {
    fields[f].kind = schema[f].kind;
    fields[f].vocab = hs.per_field_buckets[f];
    fields[f].mean = stats.mean[f];
    fields[f].stdev = stats.stdev[f];
    fields[f].name = schema[f].name;
  }
  return fields;
}

LoadedData load_training_data(const RunConfig& rc) {
  LoadedData out;
  if (rc.train_data.empty()) throw ConfigError("no train_data configured");

  if (rc.data_format == "synth") {
    std::ifstream in(rc.train_data);
    if (!in) throw IoError("cannot open " + rc.train_data);
    std::stringstream buf;
    buf << in.rdbuf();
    const SynthSpec spec = parse_synth_spec(buf.str());
    SynthResult synth = synth_generate(spec, rc.model.seed);
    out.split = split_dataset(std::move(synth.instances), rc.model.seed);
    for (uint32_t card : spec.cardinalities) {
      FieldInfo info;
      info.vocab = card;
      info.kind = card == 1 ? FieldKind::numerical : FieldKind::categorical;
      info.name = "f" + std::to_string(out.fields.size());
      out.fields.push_back(info);
    }
    return out;
  }

  if (rc.data_format == "sparse") {
    std::vector<Instance> instances = read_sparse_file(rc.train_data);
    uint32_t max_field = 0;
    for (const Instance& inst : instances) {
      for (const Entry& e : inst.entries) max_field = std::max(max_field, e.field);
    }
    std::vector<uint32_t> vocab(max_field + 1, 1);
    for (const Instance& inst : instances) {
      for (const Entry& e : inst.entries) vocab[e.field] = std::max(vocab[e.field], e.feature + 1);
    }
    for (size_t f = 0; f < vocab.size(); ++f) {
      FieldInfo info;
      info.vocab = vocab[f];
      info.kind = vocab[f] == 1 ? FieldKind::numerical : FieldKind::categorical;
      info.name = "f" + std::to_string(f);
      out.fields.push_back(info);
    }
    out.split = split_dataset(std::move(instances), rc.model.seed);
    return out;
  }

  std::vector<std::string> lines = read_lines(rc.train_data);
  if (rc.data_format == "criteo") {
    const auto schema = criteo_schema();
    const auto hs = criteo_hash_spec(rc.cat_buckets);
    const std::vector<uint8_t> assignment = split_assignment(lines.size(), rc.model.seed);
    std::vector<std::string> train_lines;
    for (size_t i = 0; i < lines.size(); ++i) {
      if (assignment[i] == 0) train_lines.push_back(lines[i]);
    }
    const NumericStats stats = fit_criteo_stats(train_lines, schema);
    out.split.seed = rc.model.seed;
    for (size_t i = 0; i < lines.size(); ++i) {
      Instance inst;
      try {
        inst = parse_criteo_tsv(lines[i], schema, hs, &stats);
      } catch (const ParseError& e) {
        throw ParseError(rc.train_data + " line " + std::to_string(i + 1) + ": " + e.what());
      }
      if (assignment[i] == 1) out.split.validation.push_back(std::move(inst));
      else if (assignment[i] == 2) out.split.test.push_back(std::move(inst));
      else out.split.train.push_back(std::move(inst));
    }
    out.fields = fields_from_schema(schema, hs, stats);
    return out;
  }

  if (rc.data_format == "csv") {
    if (rc.schema_file.empty()) throw ConfigError("csv data needs a schema file");
    if (lines.empty()) throw ParseError(rc.train_data + ": empty file");
    std::ifstream sin(rc.schema_file);
    if (!sin) throw IoError("cannot open schema file " + rc.schema_file);
    std::stringstream sbuf;
    sbuf << sin.rdbuf();
    const CsvSchema schema = resolve_csv_schema(sbuf.str(), split_csv_line(lines[0]));
    HashSpec hs;
    for (const FieldSchema& f : schema.fields) {
      hs.per_field_buckets.push_back(f.kind == FieldKind::numerical ? 1 : rc.cat_buckets);
    }
    std::vector<std::string> data_lines(lines.begin() + 1, lines.end());
    const std::vector<uint8_t> assignment = split_assignment(data_lines.size(), rc.model.seed);
    std::vector<std::string> train_lines;
    for (size_t i = 0; i < data_lines.size(); ++i) {
      if (assignment[i] == 0) train_lines.push_back(data_lines[i]);
    }
    const NumericStats stats = fit_csv_stats(train_lines, schema);
    out.split.seed = rc.model.seed;
    for (size_t i = 0; i < data_lines.size(); ++i) {
      Instance inst;
      try {
        inst = parse_csv_with_schema(data_lines[i], schema, hs, &stats);
      } catch (const ParseError& e) {
        throw ParseError(rc.train_data + " line " + std::to_string(i + 2) + ": " + e.what());
      }
      if (assignment[i] == 1) out.split.validation.push_back(std::move(inst));
      else if (assignment[i] == 2) out.split.test.push_back(std::move(inst));
      else out.split.train.push_back(std::move(inst));
    }
    out.fields = fields_from_schema(schema.fields, hs, stats);
    return out;
  }
  throw ConfigError("unknown data_format \"" + rc.data_format + "\"");
}

// Parses evaluation/scoring input with the schema and standardization stored
// in the model file.
std::vector<Instance> load_eval_instances(const std::string& path, const std::string& format,
                                          const std::vector<FieldInfo>& fields,
                                          const std::string& schema_file) {
  if (format == "sparse") return read_sparse_file(path);
  const std::vector<std::string> lines = read_lines(path);
  NumericStats stats;
  HashSpec hs;
  for (const FieldInfo& f : fields) {
    stats.mean.push_back(f.mean);
    stats.stdev.push_back(f.stdev);
    hs.per_field_buckets.push_back(f.vocab);
  }
  std::vector<Instance> out;
  if (format == "criteo") {
    const auto schema = criteo_schema();
    if (fields.size() != schema.size()) {
      throw ConfigError("model was not trained on criteo-shaped data (" +
                        std::to_string(fields.size()) + " fields)");
    }
    for (size_t i = 0; i < lines.size(); ++i) {
      out.push_back(parse_criteo_tsv(lines[i], schema, hs, &stats));
    }
    return out;
  }
  if (format == "csv") {
    if (schema_file.empty()) throw ConfigError("csv data needs a schema file");
    if (lines.empty()) throw ParseError(path + ": empty file");
    std::ifstream sin(schema_file);
    if (!sin) throw IoError("cannot open schema file " + schema_file);
    std::stringstream sbuf;
    sbuf << sin.rdbuf();
    const CsvSchema schema = resolve_csv_schema(sbuf.str(), split_csv_line(lines[0]));
    for (size_t i = 1; i < lines.size(); ++i) {
      out.push_back(parse_csv_with_schema(lines[i], schema, hs, &stats));
    }
    return out;
  }
  throw ConfigError("unknown data format \"" + format + "\"");
}

std::string file_magic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  char magic[4] = {0, 0, 0, 0};
  in.read(magic, 4);
  return std::string(magic, 4);
}

// ---------------------------------------------------------------------------

struct Overrides {
  std::vector<std::pair<std::string, std::string>> kv;
};

void add_override(CLI::App* cmd, Overrides& ov, const std::string& flag, const std::string& key,
                  const std::string& desc) {
  cmd->add_option_function<std::string>(
      flag, [&ov, key](const std::string& v) { ov.kv.emplace_back(key, v); }, desc);
}

void add_model_flags(CLI::App* cmd, Overrides& ov) {
  add_override(cmd, ov, "--variant", "variant", "fm|ffm|la_fm|ls_fm|lp_fm");
  add_override(cmd, ov, "--d", "d", "embedding size");
  add_override(cmd, ov, "--r", "r", "expansion ratio");
  add_override(cmd, ov, "--p", "p", "generation stack depth");
  add_override(cmd, ov, "--u", "u", "generated features per feature");
  add_override(cmd, ov, "--activation", "activation", "relu|identity (add variant)");
  add_override(cmd, ov, "--lambda", "lambda", "L2 weight");
  add_override(cmd, ov, "--lr", "learning_rate", "learning rate");
  add_override(cmd, ov, "--batch-size", "batch_size", "mini-batch size");
  add_override(cmd, ov, "--epochs", "epochs", "max epochs");
  add_override(cmd, ov, "--patience", "patience", "early-stop patience");
  add_override(cmd, ov, "--seed", "seed", "run seed");
  add_override(cmd, ov, "--threads", "threads", "intra-batch threads");
  add_override(cmd, ov, "--format", "data_format", "criteo|csv|sparse|synth");
  add_override(cmd, ov, "--data", "train_data", "training data path");
  add_override(cmd, ov, "--schema", "schema", "csv schema file");
  add_override(cmd, ov, "--cat-buckets", "cat_buckets", "hash buckets per categorical field");
  add_override(cmd, ov, "--out", "out_dir", "output directory");
}

RunConfig resolve_config(const std::string& config_path, const Overrides& ov) {
  RunConfig rc = config_path.empty() ? RunConfig{} : RunConfig::from_file(config_path);
  for (const auto& [key, value] : ov.kv) rc.apply(key, value);
  rc.finalize();
  return rc;
}

TrainResult run_training(RunConfig& rc, const LoadedData& data, std::ostream& log) {
  rc.model.per_field_vocab.clear();
  for (const FieldInfo& f : data.fields) rc.model.per_field_vocab.push_back(f.vocab);
  rc.model.validate();
  std::cout << to_string(audit_parameters(rc.model), rc.model.variant) << "\n";
  return train(rc.model, data.split, &log);
}

int cmd_train(const std::string& config_path, const Overrides& ov) {
  RunConfig rc = resolve_config(config_path, ov);
  const LoadedData data = load_training_data(rc);

  std::filesystem::create_directories(rc.out_dir);
  std::ofstream log(rc.out_dir + "/train.log");

  const TrainResult result = run_training(rc, data, log);
  for (const EpochRecord& e : result.run.epochs) {
    std::cout << "epoch=" << e.epoch << " objective=" << e.train_objective
              << " val_auc=" << e.val_auc << " val_logloss=" << e.val_logloss
              << " seconds=" << e.seconds << "\n";
  }
  {
    std::ofstream cfg(rc.out_dir + "/config.resolved");
    cfg << rc.serialize();
  }
  std::cout << "best_epoch=" << result.run.best_epoch << " best_val_auc=" << result.run.best_val_auc
            << (result.run.early_stopped ? " (early stop)" : "") << "\n";

  Checkpoint ckpt{result.params, data.fields};
  const std::string ckpt_path = rc.out_dir + "/checkpoint.bin";
  write_checkpoint(ckpt, ckpt_path);
  std::cout << "checkpoint: " << ckpt_path << "\n";
  if (rc.model.variant != Variant::ffm) {
    const std::string folded_path = rc.out_dir + "/model.bin";
    write_folded_model(fold(result.params, data.fields), folded_path);
    std::cout << "folded model: " << folded_path << "\n";
  }
  if (!data.split.test.empty()) {
    std::cout << "test " << to_string(evaluate(result.params, data.split.test)) << "\n";
  }
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path,
                 const std::string& format, const std::string& schema_file) {
  const std::string magic = file_magic(model_path);
  if (magic == "LFFM") {
    const FoldedModel model = read_folded_model(model_path);
    const std::vector<Instance> instances =
        load_eval_instances(data_path, format, model.fields, schema_file);
    FoldedScorer scorer(model);
    const EvalResult r =
        evaluate([&](const Instance& inst) { return scorer.logit(inst); }, instances);
    std::cout << to_string(r) << "\n";
  } else {
    const Checkpoint ckpt = read_checkpoint(model_path);
    const std::vector<Instance> instances =
        load_eval_instances(data_path, format, ckpt.fields, schema_file);
    std::cout << to_string(evaluate(ckpt.params, instances)) << "\n";
  }
  return 0;
}

int cmd_export(const std::string& ckpt_path, const std::string& out_path, bool text) {
  const Checkpoint ckpt = read_checkpoint(ckpt_path);
  const FoldedModel folded = fold(ckpt.params, ckpt.fields);
  write_folded_model(folded, out_path);
  std::cout << "wrote " << out_path << " (" << folded.total_features()
            << " features, d=" << folded.d << ")\n";
  if (text) write_folded_text(folded, std::cout);
  return 0;
}

int cmd_score(const std::string& model_path, const std::string& format,
              const std::string& policy_name, const std::string& schema_file) {
  const FoldedModel model = read_folded_model(model_path);
  FoldedScorer scorer(model);
  scorer.policy =
      policy_name == "error" ? UnknownFeaturePolicy::error : UnknownFeaturePolicy::skip;

  NumericStats stats;
  HashSpec hs;
  for (const FieldInfo& f : model.fields) {
    stats.mean.push_back(f.mean);
    stats.stdev.push_back(f.stdev);
    hs.per_field_buckets.push_back(f.vocab);
  }
  const auto criteo = criteo_schema();
  std::unique_ptr<CsvSchema> csv;
  if (format == "csv") {
    if (schema_file.empty()) throw ConfigError("csv scoring needs a schema file");
    std::ifstream sin(schema_file);
    if (!sin) throw IoError("cannot open schema file " + schema_file);
    std::stringstream sbuf;
    sbuf << sin.rdbuf();
    std::string header;
    if (!std::getline(std::cin, header)) return 0;  // header line comes first
    csv = std::make_unique<CsvSchema>(resolve_csv_schema(sbuf.str(), split_csv_line(header)));
  }

  const auto t0 = std::chrono::steady_clock::now();
  uint64_t count = 0;
  std::string line;
  std::cout.precision(9);
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    Instance inst;
    if (format == "sparse") inst = parse_sparse(line);
    else if (format == "criteo") inst = parse_criteo_tsv(line, criteo, hs, &stats);
    else if (format == "csv") inst = parse_csv_with_schema(line, *csv, hs, &stats);
    else throw ConfigError("unknown score format \"" + format + "\"");
    const double logit = scorer.logit(inst);
    std::cout << stable_sigmoid(logit) << '\t' << logit << '\n';
    ++count;
  }
  const double seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cerr << "scored " << count << " instances in " << seconds << "s ("
            << (seconds > 0 ? static_cast<double>(count) / seconds : 0.0)
            << "/s), skipped features: " << scorer.skipped << "\n";
  return 0;
}

int cmd_gradcheck(int cases, uint64_t seed) {
  int failures = 0;
  double worst = 0.0;
  for (const GradCheckJob& job : gradient_check_grid()) {
    const GradCheckResult r = gradient_check(job.cfg, cases, job.tolerance, seed);
    std::cout << gradcheck_report_line(r, job.name) << "\n";
    worst = std::max(worst, r.worst);
    if (!r.pass) ++failures;
  }
  std::cout << (failures == 0 ? "all gradients verified" : "gradient check FAILED")
            << " (worst relative error " << worst << ")\n";
  return failures == 0 ? 0 : 1;
}

int cmd_synth(const std::string& spec_path, const std::string& out_path, uint64_t seed) {
  std::ifstream in(spec_path);
  if (!in) throw IoError("cannot open " + spec_path);
  std::stringstream buf;
  buf << in.rdbuf();
  const SynthSpec spec = parse_synth_spec(buf.str());
  const SynthResult r = synth_generate(spec, seed);
  write_sparse_file(out_path, r.instances);
  size_t positives = 0;
  for (const Instance& inst : r.instances) positives += inst.label;
  std::cout << "wrote " << r.instances.size() << " instances to " << out_path << " (" << positives
            << " positive)\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const Overrides& ov, const std::string& axis,
              const std::vector<std::string>& grid) {
  if (axis != "u" && axis != "r" && axis != "p" && axis != "d") {
    throw ConfigError("sweep axis must be one of u|r|p|d, got \"" + axis + "\"");
  }
  if (grid.empty()) throw ConfigError("sweep needs a grid of values");
  RunConfig rc = resolve_config(config_path, ov);
  const LoadedData data = load_training_data(rc);
  std::filesystem::create_directories(rc.out_dir);
  std::ofstream table_file(rc.out_dir + "/sweep.tsv");

  const std::string header = axis + "\tbest_val_auc\ttest_auc\ttest_logloss\tepochs";
  std::cout << header << "\n";
  table_file << header << "\n";
  for (const std::string& value : grid) {
    RunConfig point = rc;
    point.apply(axis, value);
    std::ostringstream null_log;
    const TrainResult result = run_training(point, data, null_log);
    const EvalResult test = evaluate(result.params, data.split.test);
    std::ostringstream row;
    row.precision(6);
    row << std::fixed << value << "\t" << result.run.best_val_auc << "\t" << test.auc << "\t"
        << test.mean_logloss << "\t" << result.run.epochs.size();
    std::cout << row.str() << "\n";
    table_file << row.str() << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"factorization-machine CTR engine with learned feature generation"};
  app.require_subcommand(1);

  std::string config_path;
  Overrides train_ov;
  CLI::App* train_cmd = app.add_subcommand("train", "train a model and fold it for serving");
  train_cmd->add_option("--config", config_path, "key=value config file");
  add_model_flags(train_cmd, train_ov);

  std::string eval_model, eval_data, eval_format = "sparse", eval_schema;
  CLI::App* eval_cmd = app.add_subcommand("evaluate", "report AUC/logloss on a dataset");
  eval_cmd->add_option("--model", eval_model, "checkpoint or folded model file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset path")->required();
  eval_cmd->add_option("--format", eval_format, "criteo|csv|sparse");
  eval_cmd->add_option("--schema", eval_schema, "csv schema file");

  std::string export_ckpt, export_out = "model.bin";
  bool export_text = false;
  CLI::App* export_cmd = app.add_subcommand("export", "fold a checkpoint into a serving model");
  export_cmd->add_option("--checkpoint", export_ckpt, "checkpoint file")->required();
  export_cmd->add_option("--out", export_out, "folded model output path");
  export_cmd->add_flag("--text", export_text, "also dump a readable form to stdout");

  std::string score_model, score_format = "sparse", score_policy = "skip", score_schema;
  CLI::App* score_cmd =
      app.add_subcommand("score", "stream-score stdin, one probability<TAB>logit per line");
  score_cmd->add_option("--model", score_model, "folded model file")->required();
  score_cmd->add_option("--format", score_format, "criteo|csv|sparse");
  score_cmd->add_option("--policy", score_policy, "unknown features: skip|error");
  score_cmd->add_option("--schema", score_schema, "csv schema file");

  int gc_cases = 2;
  uint64_t gc_seed = 20240501;
  CLI::App* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient verification");
  gc_cmd->add_option("--cases", gc_cases, "random cases per configuration");
  gc_cmd->add_option("--seed", gc_seed, "case seed");

  std::string synth_spec, synth_out = "synth.tsv";
  uint64_t synth_seed = 1;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic dataset");
  synth_cmd->add_option("--spec", synth_spec, "synthetic spec file")->required();
  synth_cmd->add_option("--out", synth_out, "output sparse file");
  synth_cmd->add_option("--seed", synth_seed, "sampling seed");

  std::string sweep_config, sweep_axis;
  std::vector<std::string> sweep_grid;
  Overrides sweep_ov;
  CLI::App* sweep_cmd = app.add_subcommand("sweep", "train across one hyper-parameter grid");
  sweep_cmd->add_option("--config", sweep_config, "key=value config file");
  sweep_cmd->add_option("--axis", sweep_axis, "u|r|p|d")->required();
  sweep_cmd->add_option("--grid", sweep_grid, "values to sweep")->required()->delimiter(',');
  add_model_flags(sweep_cmd, sweep_ov);

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) return cmd_train(config_path, train_ov);
    if (eval_cmd->parsed()) return cmd_evaluate(eval_model, eval_data, eval_format, eval_schema);
    if (export_cmd->parsed()) return cmd_export(export_ckpt, export_out, export_text);
    if (score_cmd->parsed())
      return cmd_score(score_model, score_format, score_policy, score_schema);
    if (gc_cmd->parsed()) return cmd_gradcheck(gc_cases, gc_seed);
    if (synth_cmd->parsed()) return cmd_synth(synth_spec, synth_out, synth_seed);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_config, sweep_ov, sweep_axis, sweep_grid);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
