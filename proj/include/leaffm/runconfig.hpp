#pragma once

#include <string>

#include "leaffm/params.hpp"

namespace leaffm {

// Flat key=value run configuration. Unknown keys are errors; command-line
// flags override file keys; the resolved form is written into the run's
// output directory for reproducibility.
struct RunConfig {
  ModelConfig model;
  bool d_explicit = false;  // embedding dim defaults by variant when unset

  std::string data_format = "sparse";  // criteo | csv | sparse | synth
  std::string train_data;
  std::string schema_file;
  uint32_t cat_buckets = 100000;
  std::string out_dir = "leaffm_run";

  void apply(const std::string& key, const std::string& value);
  void finalize();  // resolves the variant-dependent embedding dim default
  std::string serialize() const;

  static RunConfig from_file(const std::string& path);
  static RunConfig from_text(const std::string& text);
};

}  // namespace leaffm
