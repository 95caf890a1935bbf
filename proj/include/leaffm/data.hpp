#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "leaffm/numerics.hpp"

namespace leaffm {

enum class FieldKind : uint8_t { categorical = 0, numerical = 1 };

struct FieldSchema {
  uint32_t field_index = 0;
  FieldKind kind = FieldKind::categorical;
  std::string name;
};

struct Entry {
  uint32_t field = 0;
  uint32_t feature = 0;  // index within the field's vocabulary
  double value = 0.0;
};

struct Instance {
  uint8_t label = 0;
  std::vector<Entry> entries;
};

bool operator==(const Entry& a, const Entry& b);
bool operator==(const Instance& a, const Instance& b);

// Per-field bucket counts. Numerical fields use a single slot (bucket 1);
// categorical fields reserve bucket 0 for missing tokens.
struct HashSpec {
  std::vector<uint32_t> per_field_buckets;
};

// Per-field standardization of numerical values, fitted on the training
// split. Identity (mean 0, stdev 1) leaves the signed log1p value as is.
struct NumericStats {
  Vec mean;
  Vec stdev;
  static NumericStats identity(size_t field_count);
};

// FNV-1a 64 over the UTF-8 bytes of "<field_index>:<token>", reduced into
// [1, buckets). Empty token maps to the reserved missing bucket 0.
uint32_t hash_feature(uint32_t field_index, std::string_view token, uint32_t buckets);
uint64_t fnv1a64(std::string_view bytes);

double signed_log1p(double x);

// ---------------------------------------------------------------------------
// Text parsers
// ---------------------------------------------------------------------------

// Criteo layout: label, 13 integer columns, 26 categorical tokens, tab
// separated. Fields 0..12 are numerical, 13..38 categorical.
std::vector<FieldSchema> criteo_schema();
HashSpec criteo_hash_spec(uint32_t categorical_buckets);

Instance parse_criteo_tsv(std::string_view line, const std::vector<FieldSchema>& schema,
                          const HashSpec& hash_spec, const NumericStats* stats = nullptr);

// Generic CSV with a text schema mapping column names to field kinds.
// Schema file lines: "<column name> = categorical | numerical | ignore | label".
struct CsvSchema {
  std::vector<FieldSchema> fields;
  std::vector<int> column_to_field;  // per CSV column; -1 = ignored column
  int label_column = -1;
};

std::vector<std::string> split_csv_line(std::string_view line);
CsvSchema resolve_csv_schema(const std::string& schema_text,
                             const std::vector<std::string>& header);
Instance parse_csv_with_schema(std::string_view line, const CsvSchema& schema,
                               const HashSpec& hash_spec, const NumericStats* stats = nullptr);

// Fit per-field mean/stdev of present numerical values (after signed log1p).
NumericStats fit_criteo_stats(const std::vector<std::string>& lines,
                              const std::vector<FieldSchema>& schema);
NumericStats fit_csv_stats(const std::vector<std::string>& lines, const CsvSchema& schema);

// Native sparse format: "label<TAB>field:feature:value ...". Values are taken
// verbatim (no transform).
std::string format_sparse(const Instance& inst);
Instance parse_sparse(std::string_view line);
std::vector<Instance> read_sparse_file(const std::string& path);
void write_sparse_file(const std::string& path, const std::vector<Instance>& instances);

std::vector<std::string> read_lines(const std::string& path);

// ---------------------------------------------------------------------------
// Split / batches
// ---------------------------------------------------------------------------

struct DatasetSplit {
  std::vector<Instance> train;
  std::vector<Instance> validation;
  std::vector<Instance> test;
  uint64_t seed = 0;
};

// Per-index split assignment (0 = train, 1 = validation, 2 = test) in 8:1:1
// proportions, deterministic under seed. Requires n >= 10.
std::vector<uint8_t> split_assignment(size_t n, uint64_t seed);

// 8:1:1 shuffled split, deterministic under seed. Requires >= 10 instances.
DatasetSplit split_dataset(std::vector<Instance> instances, uint64_t seed);

// Shuffled index batches covering [0, n) exactly once; the last batch may be
// short. Deterministic under seed.
std::vector<std::vector<uint32_t>> make_batches(size_t n, size_t batch_size, uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic data with a known ground-truth model
// ---------------------------------------------------------------------------

// The teacher is a factorization machine over transformed feature values:
// numerical fields listed in squared_fields enter the teacher as x^2 - 1
// while the observed instance carries the raw x. Categorical teacher
// embeddings are a strong per-field centroid plus a per-feature deviation,
// and tokens are sampled with a Zipf-like skew so a tail of rare features
// exists.
struct SynthSpec {
  size_t count = 10000;
  std::vector<uint32_t> cardinalities;    // per field; 1 => numerical field
  std::vector<uint32_t> squared_fields;   // numerical fields squared inside the teacher
  int teacher_dim = 8;
  uint64_t teacher_seed = 1;
  double noise = 0.0;             // stdev of Gaussian noise added to the logit
  double centroid_scale = 1.0;    // categorical field centroid magnitude
  double feature_spread = 0.5;    // per-feature deviation around the centroid
  double numeric_scale = 1.0;     // teacher embedding scale for numerical fields
  double linear_scale = 0.3;
  double interaction_scale = 1.0;
  double quadratic_scale = 1.0;   // linear-term weight scale on squared fields
  double logit_bias = 0.0;
  double zipf_exponent = 1.1;     // 0 = uniform token sampling

  void validate() const;
};

struct TeacherModel {
  int dim = 0;
  double bias = 0.0;
  double interaction_scale = 1.0;
  std::vector<uint32_t> cardinalities;
  std::vector<uint8_t> squared;  // per field
  std::vector<uint64_t> offsets; // per field, into linear/embed
  Vec linear;
  Matrix embed;
};

struct SynthResult {
  std::vector<Instance> instances;
  TeacherModel teacher;
};

SynthResult synth_generate(const SynthSpec& spec, uint64_t seed);

// Teacher logit for an instance; transformed=false scores with raw values
// everywhere (the "linear feature" reference for the same teacher).
double teacher_score(const TeacherModel& teacher, const Instance& inst, bool transformed);

SynthSpec parse_synth_spec(const std::string& text);

}  // namespace leaffm
