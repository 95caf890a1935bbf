#include "leaffm/runconfig.hpp"

#include <fstream>
#include <sstream>

namespace leaffm {

namespace {

std::string trim(const std::string& s) {
  const size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return {};
  const size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

}  // namespace

void RunConfig::apply(const std::string& key, const std::string& value) {
  try {
    if (key == "variant") {
      model.variant = variant_from_string(value);
    } else if (key == "d" || key == "embedding_dim") {
      model.embedding_dim = std::stoi(value);
      d_explicit = true;
    } else if (key == "r" || key == "expansion_ratio") {
      model.expansion_ratio = std::stoi(value);
    } else if (key == "p" || key == "depth") {
      model.depth = std::stoi(value);
    } else if (key == "u" || key == "generated") {
      model.generated_count = std::stoi(value);
    } else if (key == "activation") {
      model.activation = activation_from_string(value);
    } else if (key == "lambda") {
      model.lambda = std::stod(value);
    } else if (key == "learning_rate" || key == "lr") {
      model.learning_rate = std::stod(value);
    } else if (key == "batch_size") {
      model.batch_size = std::stoi(value);
    } else if (key == "epochs") {
      model.max_epochs = std::stoi(value);
    } else if (key == "patience") {
      model.patience = std::stoi(value);
    } else if (key == "seed") {
      model.seed = std::stoull(value);
    } else if (key == "threads") {
      model.threads = std::stoi(value);
    } else if (key == "data_format") {
      if (value != "criteo" && value != "csv" && value != "sparse" && value != "synth") {
        throw ConfigError("config: data_format must be criteo|csv|sparse|synth, got \"" + value +
                          "\"");
      }
      data_format = value;
    } else if (key == "train_data") {
      train_data = value;
    } else if (key == "schema") {
      schema_file = value;
    } else if (key == "cat_buckets") {
      cat_buckets = static_cast<uint32_t>(std::stoul(value));
    } else if (key == "out_dir") {
      out_dir = value;
    } else {
      throw ConfigError("config: unknown key \"" + key + "\"");
    }
  } catch (const std::invalid_argument&) {
    throw ConfigError("config: bad value \"" + value + "\" for key \"" + key + "\"");
  } catch (const std::out_of_range&) {
    throw ConfigError("config: value out of range for key \"" + key + "\"");
  }
}

void RunConfig::finalize() {
  if (!d_explicit) {
    model.embedding_dim = model.variant == Variant::ffm ? 8 : 10;
  }
}

std::string RunConfig::serialize() const {
  std::ostringstream out;
  out << "variant = " << to_string(model.variant) << "\n";
  out << "d = " << model.embedding_dim << "\n";
  out << "r = " << model.expansion_ratio << "\n";
  out << "p = " << model.depth << "\n";
  out << "u = " << model.generated_count << "\n";
  out << "activation = " << to_string(model.activation) << "\n";
  out << "lambda = " << model.lambda << "\n";
  out << "learning_rate = " << model.learning_rate << "\n";
  out << "batch_size = " << model.batch_size << "\n";
  out << "epochs = " << model.max_epochs << "\n";
  out << "patience = " << model.patience << "\n";
  out << "seed = " << model.seed << "\n";
  out << "threads = " << model.threads << "\n";
  out << "data_format = " << data_format << "\n";
  out << "train_data = " << train_data << "\n";
  if (!schema_file.empty()) out << "schema = " << schema_file << "\n";
  out << "cat_buckets = " << cat_buckets << "\n";
  out << "out_dir = " << out_dir << "\n";
  return out.str();
}

RunConfig RunConfig::from_text(const std::string& text) {
  RunConfig rc;
  std::istringstream in(text);
  std::string raw;
  size_t lineno = 0;
  while (std::getline(in, raw)) {
    ++lineno;
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    if (trim(raw).empty()) continue;
    const size_t eq = raw.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    rc.apply(trim(raw.substr(0, eq)), trim(raw.substr(eq + 1)));
  }
  return rc;
}

RunConfig RunConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return from_text(buf.str());
}

}  // namespace leaffm
