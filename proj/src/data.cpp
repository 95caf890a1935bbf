#include "leaffm/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace leaffm {

bool operator==(const Entry& a, const Entry& b) {
  return a.field == b.field && a.feature == b.feature && a.value == b.value;
}

bool operator==(const Instance& a, const Instance& b) {
  return a.label == b.label && a.entries == b.entries;
}

NumericStats NumericStats::identity(size_t field_count) {
  NumericStats s;
  s.mean.assign(field_count, 0.0);
  s.stdev.assign(field_count, 1.0);
  return s;
}

uint64_t fnv1a64(std::string_view bytes) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

uint32_t hash_feature(uint32_t field_index, std::string_view token, uint32_t buckets) {
  if (buckets < 2) throw ConfigError("hash_feature: bucket count must be at least 2");
  if (token.empty()) return 0;
  char key[32];
  auto [end, ec] = std::to_chars(key, key + sizeof(key) - 1, field_index);
  *end++ = ':';
  std::string full(key, end);
  full.append(token);
  return 1u + static_cast<uint32_t>(fnv1a64(full) % (buckets - 1));
}

double signed_log1p(double x) { return std::copysign(std::log1p(std::fabs(x)), x); }

namespace {

uint8_t parse_label(std::string_view tok, std::string_view what) {
  if (tok == "0") return 0;
  if (tok == "1") return 1;
  throw ParseError(std::string(what) + ": label must be 0 or 1, got \"" + std::string(tok) + "\"");
}

double standardized_log1p(double raw, uint32_t field, const NumericStats* stats) {
  double v = signed_log1p(raw);
  if (stats != nullptr) {
    const double sd = stats->stdev[field] > 0.0 ? stats->stdev[field] : 1.0;
    v = (v - stats->mean[field]) / sd;
  }
  return v;
}

double parse_numeric_token(std::string_view tok, size_t column) {
  double raw = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), raw);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    throw ParseError("column " + std::to_string(column) + ": bad numeric value \"" +
                     std::string(tok) + "\"");
  }
  return raw;
}

}  // namespace

std::vector<FieldSchema> criteo_schema() {
  std::vector<FieldSchema> schema;
  schema.reserve(39);
  for (uint32_t i = 0; i < 13; ++i) {
    schema.push_back({i, FieldKind::numerical, "I" + std::to_string(i + 1)});
  }
  for (uint32_t i = 0; i < 26; ++i) {
    schema.push_back({13 + i, FieldKind::categorical, "C" + std::to_string(i + 1)});
  }
  return schema;
}

HashSpec criteo_hash_spec(uint32_t categorical_buckets) {
  HashSpec spec;
  spec.per_field_buckets.assign(13, 1);
  spec.per_field_buckets.insert(spec.per_field_buckets.end(), 26, categorical_buckets);
  return spec;
}

Instance parse_criteo_tsv(std::string_view line, const std::vector<FieldSchema>& schema,
                          const HashSpec& hash_spec, const NumericStats* stats) {
  if (schema.size() != 39 || hash_spec.per_field_buckets.size() != 39) {
    throw ConfigError("parse_criteo_tsv: schema must describe 39 fields");
  }
  Instance inst;
  inst.entries.reserve(39);
  size_t col = 0;
  size_t pos = 0;
  while (true) {
    const size_t tab = line.find('\t', pos);
    const std::string_view tok =
        line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos);
    if (col == 0) {
      inst.label = parse_label(tok, "column 0");
    } else if (col <= 39) {
      const uint32_t field = static_cast<uint32_t>(col - 1);
      if (schema[field].kind == FieldKind::numerical) {
        double value = 0.0;  // missing numerics stay at 0 after the transform
        if (!tok.empty()) value = standardized_log1p(parse_numeric_token(tok, col), field, stats);
        inst.entries.push_back({field, 0, value});
      } else {
        const uint32_t feature = hash_feature(field, tok, hash_spec.per_field_buckets[field]);
        inst.entries.push_back({field, feature, 1.0});
      }
    } else {
      throw ParseError("column " + std::to_string(col) + ": expected 40 columns, found more");
    }
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
    ++col;
  }
  if (col != 39) {
    throw ParseError("column " + std::to_string(col) + ": expected 40 columns, found " +
                     std::to_string(col + 1));
  }
  return inst;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  size_t i = 0;
  while (i < line.size()) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
    ++i;
  }
  out.push_back(std::move(cur));
  return out;
}

CsvSchema resolve_csv_schema(const std::string& schema_text,
                             const std::vector<std::string>& header) {
  // Parse "name = kind" lines; '#' starts a comment.
  struct Decl {
    std::string name;
    std::string kind;
  };
  std::vector<Decl> decls;
  std::istringstream in(schema_text);
  std::string raw;
  while (std::getline(in, raw)) {
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    const size_t eq = raw.find('=');
    if (eq == std::string::npos) {
      if (raw.find_first_not_of(" \t\r") != std::string::npos) {
        throw ParseError("schema file: expected \"column = kind\", got \"" + raw + "\"");
      }
      continue;
    }
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    decls.push_back({trim(raw.substr(0, eq)), trim(raw.substr(eq + 1))});
  }

  CsvSchema schema;
  schema.column_to_field.assign(header.size(), -1);
  for (const Decl& d : decls) {
    const auto it = std::find(header.begin(), header.end(), d.name);
    if (it == header.end()) {
      throw ParseError("schema file: column \"" + d.name + "\" not present in CSV header");
    }
    const int col = static_cast<int>(it - header.begin());
    if (d.kind == "label") {
      if (schema.label_column >= 0) throw ParseError("schema file: duplicate label column");
      schema.label_column = col;
    } else if (d.kind == "ignore") {
      // leave unmapped
    } else if (d.kind == "categorical" || d.kind == "numerical") {
      FieldSchema f;
      f.field_index = static_cast<uint32_t>(schema.fields.size());
      f.kind = d.kind == "categorical" ? FieldKind::categorical : FieldKind::numerical;
      f.name = d.name;
      schema.column_to_field[col] = static_cast<int>(f.field_index);
      schema.fields.push_back(std::move(f));
    } else {
      throw ParseError("schema file: unknown kind \"" + d.kind + "\" for column \"" + d.name +
                       "\"");
    }
  }
  if (schema.label_column < 0) throw ParseError("schema file: no label column declared");
  for (size_t c = 0; c < header.size(); ++c) {
    if (static_cast<int>(c) != schema.label_column && schema.column_to_field[c] == -1) {
      bool declared_ignore = false;
      for (const Decl& d : decls) {
        if (d.name == header[c]) declared_ignore = true;
      }
      if (!declared_ignore) {
        throw ParseError("schema file: CSV column \"" + header[c] + "\" is not declared");
      }
    }
  }
  return schema;
}

Instance parse_csv_with_schema(std::string_view line, const CsvSchema& schema,
                               const HashSpec& hash_spec, const NumericStats* stats) {
  const std::vector<std::string> cols = split_csv_line(line);
  if (cols.size() != schema.column_to_field.size()) {
    throw ParseError("column " + std::to_string(cols.size()) + ": expected " +
                     std::to_string(schema.column_to_field.size()) + " columns, got " +
                     std::to_string(cols.size()));
  }
  Instance inst;
  inst.label = parse_label(cols[static_cast<size_t>(schema.label_column)],
                           "column " + std::to_string(schema.label_column));
  inst.entries.reserve(schema.fields.size());
  // Emit entries in field order so identical rows produce identical instances.
  std::vector<const std::string*> field_tok(schema.fields.size(), nullptr);
  for (size_t c = 0; c < cols.size(); ++c) {
    const int f = schema.column_to_field[c];
    if (f >= 0) field_tok[static_cast<size_t>(f)] = &cols[c];
  }
  for (size_t f = 0; f < schema.fields.size(); ++f) {
    const std::string& tok = *field_tok[f];
    const uint32_t field = static_cast<uint32_t>(f);
    if (schema.fields[f].kind == FieldKind::numerical) {
      double value = 0.0;
      if (!tok.empty()) value = standardized_log1p(parse_numeric_token(tok, f), field, stats);
      inst.entries.push_back({field, 0, value});
    } else {
      inst.entries.push_back({field, hash_feature(field, tok, hash_spec.per_field_buckets[field]), 1.0});
    }
  }
  return inst;
}

namespace {

struct RunningStats {
  double sum = 0.0, sum_sq = 0.0;
  size_t n = 0;
  void add(double v) {
    sum += v;
    sum_sq += v * v;
    ++n;
  }
  double mean() const { return n > 0 ? sum / static_cast<double>(n) : 0.0; }
  double stdev() const {
    if (n == 0) return 1.0;
    const double m = mean();
    const double var = std::max(0.0, sum_sq / static_cast<double>(n) - m * m);
    const double sd = std::sqrt(var);
    return sd > 1e-12 ? sd : 1.0;
  }
};

NumericStats finalize_stats(const std::vector<RunningStats>& acc) {
  NumericStats stats;
  stats.mean.reserve(acc.size());
  stats.stdev.reserve(acc.size());
  for (const RunningStats& r : acc) {
    stats.mean.push_back(r.mean());
    stats.stdev.push_back(r.stdev());
  }
  return stats;
}

}  // namespace

NumericStats fit_criteo_stats(const std::vector<std::string>& lines,
                              const std::vector<FieldSchema>& schema) {
  std::vector<RunningStats> acc(schema.size());
  for (const std::string& line : lines) {
    size_t pos = 0;
    size_t col = 0;
    while (col <= 13) {
      const size_t tab = line.find('\t', pos);
      if (col >= 1) {
        const std::string_view tok(line.data() + pos,
                                   (tab == std::string::npos ? line.size() : tab) - pos);
        if (!tok.empty()) {
          acc[col - 1].add(signed_log1p(parse_numeric_token(tok, col)));
        }
      }
      if (tab == std::string::npos) break;
      pos = tab + 1;
      ++col;
    }
  }
  return finalize_stats(acc);
}

NumericStats fit_csv_stats(const std::vector<std::string>& lines, const CsvSchema& schema) {
  std::vector<RunningStats> acc(schema.fields.size());
  for (const std::string& line : lines) {
    const std::vector<std::string> cols = split_csv_line(line);
    for (size_t c = 0; c < cols.size() && c < schema.column_to_field.size(); ++c) {
      const int f = schema.column_to_field[c];
      if (f < 0 || schema.fields[static_cast<size_t>(f)].kind != FieldKind::numerical) continue;
      if (!cols[c].empty()) {
        acc[static_cast<size_t>(f)].add(signed_log1p(parse_numeric_token(cols[c], c)));
      }
    }
  }
  return finalize_stats(acc);
}

std::string format_sparse(const Instance& inst) {
  std::ostringstream out;
  out << static_cast<int>(inst.label);
  char buf[64];
  for (const Entry& e : inst.entries) {
    const int n = std::snprintf(buf, sizeof(buf), "\t%u:%u:%.17g", e.field, e.feature, e.value);
    out.write(buf, n);
  }
  return out.str();
}

Instance parse_sparse(std::string_view line) {
  Instance inst;
  size_t pos = 0;
  size_t col = 0;
  while (pos <= line.size()) {
    const size_t tab = line.find('\t', pos);
    const std::string_view tok =
        line.substr(pos, tab == std::string_view::npos ? std::string_view::npos : tab - pos);
    if (col == 0) {
      inst.label = parse_label(tok, "column 0");
    } else if (!tok.empty()) {
      Entry e;
      const size_t c1 = tok.find(':');
      const size_t c2 = c1 == std::string_view::npos ? std::string_view::npos : tok.find(':', c1 + 1);
      if (c2 == std::string_view::npos) {
        throw ParseError("column " + std::to_string(col) + ": expected field:feature:value, got \"" +
                         std::string(tok) + "\"");
      }
      const auto parse_u32 = [&](std::string_view s) {
        uint32_t v = 0;
        const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
        if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
          throw ParseError("column " + std::to_string(col) + ": bad index in \"" + std::string(tok) +
                           "\"");
        }
        return v;
      };
      e.field = parse_u32(tok.substr(0, c1));
      e.feature = parse_u32(tok.substr(c1 + 1, c2 - c1 - 1));
      e.value = parse_numeric_token(tok.substr(c2 + 1), col);
      inst.entries.push_back(e);
    }
    if (tab == std::string_view::npos) break;
    pos = tab + 1;
    ++col;
  }
  return inst;
}

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(std::move(line));
  }
  return lines;
}

std::vector<Instance> read_sparse_file(const std::string& path) {
  std::vector<Instance> out;
  size_t lineno = 0;
  for (const std::string& line : read_lines(path)) {
    ++lineno;
    try {
      out.push_back(parse_sparse(line));
    } catch (const ParseError& e) {
      throw ParseError(path + " line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_sparse_file(const std::string& path, const std::vector<Instance>& instances) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open " + path + " for writing");
  for (const Instance& inst : instances) out << format_sparse(inst) << '\n';
}

// ---------------------------------------------------------------------------

namespace {

void shuffle_indices(std::vector<uint32_t>& idx, Rng& rng) {
  for (size_t i = idx.size(); i > 1; --i) {
    const size_t j = rng.below(i);
    std::swap(idx[i - 1], idx[j]);
  }
}

}  // namespace

std::vector<uint8_t> split_assignment(size_t n, uint64_t seed) {
  if (n < 10) {
    throw ConfigError("split_dataset: need at least 10 instances, got " + std::to_string(n));
  }
  std::vector<uint32_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<uint32_t>(i);
  Rng rng(mix_seed(seed, 0x5711));
  shuffle_indices(idx, rng);

  const size_t n_val = static_cast<size_t>(std::llround(static_cast<double>(n) * 0.1));
  const size_t n_test = static_cast<size_t>(std::llround(static_cast<double>(n) * 0.1));
  std::vector<uint8_t> assignment(n, 0);
  for (size_t i = 0; i < n_val; ++i) assignment[idx[i]] = 1;
  for (size_t i = n_val; i < n_val + n_test; ++i) assignment[idx[i]] = 2;
  return assignment;
}

DatasetSplit split_dataset(std::vector<Instance> instances, uint64_t seed) {
  const std::vector<uint8_t> assignment = split_assignment(instances.size(), seed);
  DatasetSplit split;
  split.seed = seed;
  for (size_t i = 0; i < instances.size(); ++i) {
    Instance& inst = instances[i];
    switch (assignment[i]) {
      case 1: split.validation.push_back(std::move(inst)); break;
      case 2: split.test.push_back(std::move(inst)); break;
      default: split.train.push_back(std::move(inst)); break;
    }
  }
  return split;
}

std::vector<std::vector<uint32_t>> make_batches(size_t n, size_t batch_size, uint64_t seed) {
  if (batch_size < 1) throw ConfigError("make_batches: batch_size must be >= 1");
  std::vector<uint32_t> idx(n);
  for (size_t i = 0; i < n; ++i) idx[i] = static_cast<uint32_t>(i);
  Rng rng(mix_seed(seed, 0xBA7C4));
  shuffle_indices(idx, rng);
  std::vector<std::vector<uint32_t>> batches;
  batches.reserve((n + batch_size - 1) / batch_size);
  for (size_t start = 0; start < n; start += batch_size) {
    const size_t end = std::min(n, start + batch_size);
    batches.emplace_back(idx.begin() + static_cast<std::ptrdiff_t>(start),
                         idx.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

// ---------------------------------------------------------------------------

void SynthSpec::validate() const {
  if (cardinalities.empty()) throw ConfigError("synth spec: no fields");
  for (uint32_t c : cardinalities) {
    if (c < 1) throw ConfigError("synth spec: cardinality must be >= 1");
  }
  for (uint32_t f : squared_fields) {
    if (f >= cardinalities.size()) throw ConfigError("synth spec: squared field out of range");
    if (cardinalities[f] != 1) {
      throw ConfigError("synth spec: squared field " + std::to_string(f) + " is not numerical");
    }
  }
  if (teacher_dim < 1) throw ConfigError("synth spec: teacher_dim must be >= 1");
  if (count < 1) throw ConfigError("synth spec: count must be >= 1");
}

namespace {

TeacherModel build_teacher(const SynthSpec& spec) {
  TeacherModel t;
  t.dim = spec.teacher_dim;
  t.bias = spec.logit_bias;
  t.interaction_scale = spec.interaction_scale;
  t.cardinalities = spec.cardinalities;
  t.squared.assign(spec.cardinalities.size(), 0);
  for (uint32_t f : spec.squared_fields) t.squared[f] = 1;

  uint64_t total = 0;
  t.offsets.reserve(spec.cardinalities.size() + 1);
  for (uint32_t c : spec.cardinalities) {
    t.offsets.push_back(total);
    total += c;
  }
  t.offsets.push_back(total);

  Rng rng(mix_seed(spec.teacher_seed, 0x7EAC));
  t.linear.assign(total, 0.0);
  t.embed = Matrix(static_cast<std::int64_t>(total), t.dim);
  const double inv_sqrt_dim = 1.0 / std::sqrt(static_cast<double>(t.dim));
  for (size_t f = 0; f < spec.cardinalities.size(); ++f) {
    const bool numeric = spec.cardinalities[f] == 1;
    Vec centroid(static_cast<size_t>(t.dim));
    for (double& v : centroid) v = spec.centroid_scale * inv_sqrt_dim * rng.normal();
    for (uint32_t j = 0; j < spec.cardinalities[f]; ++j) {
      const uint64_t row = t.offsets[f] + j;
      double* e = t.embed.row(static_cast<std::int64_t>(row));
      for (int k = 0; k < t.dim; ++k) {
        const double dev = spec.feature_spread * inv_sqrt_dim * rng.normal();
        e[k] = numeric ? spec.numeric_scale * inv_sqrt_dim * rng.normal() : centroid[k] + dev;
      }
      double lin = spec.linear_scale * rng.normal();
      if (numeric && t.squared[f]) lin = spec.quadratic_scale * (rng.uniform() < 0.5 ? -1.0 : 1.0);
      t.linear[row] = lin;
    }
  }
  return t;
}

// Zipf-like cumulative weights per field, shared across instances.
std::vector<Vec> build_sampling_cdfs(const SynthSpec& spec) {
  std::vector<Vec> cdfs(spec.cardinalities.size());
  for (size_t f = 0; f < spec.cardinalities.size(); ++f) {
    const uint32_t card = spec.cardinalities[f];
    if (card <= 1) continue;
    Vec cdf(card);
    double total = 0.0;
    for (uint32_t j = 0; j < card; ++j) {
      total += spec.zipf_exponent > 0.0
                   ? 1.0 / std::pow(static_cast<double>(j + 1), spec.zipf_exponent)
                   : 1.0;
      cdf[j] = total;
    }
    for (double& v : cdf) v /= total;
    cdfs[f] = std::move(cdf);
  }
  return cdfs;
}

}  // namespace

double teacher_score(const TeacherModel& t, const Instance& inst, bool transformed) {
  double logit = t.bias;
  double interaction = 0.0;
  for (size_t i = 0; i < inst.entries.size(); ++i) {
    const Entry& a = inst.entries[i];
    const uint64_t ra = t.offsets[a.field] + a.feature;
    const double za = (transformed && t.squared[a.field]) ? a.value * a.value - 1.0 : a.value;
    logit += t.linear[ra] * za;
    for (size_t j = i + 1; j < inst.entries.size(); ++j) {
      const Entry& b = inst.entries[j];
      const uint64_t rb = t.offsets[b.field] + b.feature;
      const double zb = (transformed && t.squared[b.field]) ? b.value * b.value - 1.0 : b.value;
      interaction += za * zb *
                     dot(t.embed.row_span(static_cast<std::int64_t>(ra)),
                         t.embed.row_span(static_cast<std::int64_t>(rb)));
    }
  }
  return logit + t.interaction_scale * interaction;
}

SynthResult synth_generate(const SynthSpec& spec, uint64_t seed) {
  spec.validate();
  SynthResult result;
  result.teacher = build_teacher(spec);
  const std::vector<Vec> cdfs = build_sampling_cdfs(spec);

  Rng rng(mix_seed(seed, 0xDA7A));
  result.instances.reserve(spec.count);
  const size_t f_count = spec.cardinalities.size();
  for (size_t i = 0; i < spec.count; ++i) {
    Instance inst;
    inst.entries.reserve(f_count);
    for (size_t f = 0; f < f_count; ++f) {
      Entry e;
      e.field = static_cast<uint32_t>(f);
      if (spec.cardinalities[f] == 1) {
        e.feature = 0;
        e.value = rng.normal();
      } else {
        const double u = rng.uniform();
        const Vec& cdf = cdfs[f];
        e.feature = static_cast<uint32_t>(
            std::upper_bound(cdf.begin(), cdf.end(), u) - cdf.begin());
        if (e.feature >= spec.cardinalities[f]) e.feature = spec.cardinalities[f] - 1;
        e.value = 1.0;
      }
      inst.entries.push_back(e);
    }
    double logit = teacher_score(result.teacher, inst, /*transformed=*/true);
    if (spec.noise > 0.0) logit += spec.noise * rng.normal();
    const double p = stable_sigmoid(logit);
    inst.label = rng.uniform() < p ? 1 : 0;
    result.instances.push_back(std::move(inst));
  }
  return result;
}

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec spec;
  std::istringstream in(text);
  std::string raw;
  bool have_cards = false;
  while (std::getline(in, raw)) {
    const size_t hash = raw.find('#');
    if (hash != std::string::npos) raw.resize(hash);
    const size_t eq = raw.find('=');
    if (eq == std::string::npos) continue;
    auto trim = [](std::string s) {
      const size_t a = s.find_first_not_of(" \t\r");
      if (a == std::string::npos) return std::string();
      const size_t b = s.find_last_not_of(" \t\r");
      return s.substr(a, b - a + 1);
    };
    const std::string key = trim(raw.substr(0, eq));
    const std::string value = trim(raw.substr(eq + 1));
    auto parse_list = [&](const std::string& v) {
      std::vector<uint32_t> out;
      std::istringstream items(v);
      std::string item;
      while (std::getline(items, item, ',')) {
        out.push_back(static_cast<uint32_t>(std::stoul(trim(item))));
      }
      return out;
    };
    if (key == "count") {
      spec.count = std::stoull(value);
    } else if (key == "cardinalities") {
      spec.cardinalities = parse_list(value);
      have_cards = true;
    } else if (key == "squared_fields") {
      spec.squared_fields = parse_list(value);
    } else if (key == "teacher_dim") {
      spec.teacher_dim = std::stoi(value);
    } else if (key == "teacher_seed") {
      spec.teacher_seed = std::stoull(value);
    } else if (key == "noise") {
      spec.noise = std::stod(value);
    } else if (key == "centroid_scale") {
      spec.centroid_scale = std::stod(value);
    } else if (key == "feature_spread") {
      spec.feature_spread = std::stod(value);
    } else if (key == "numeric_scale") {
      spec.numeric_scale = std::stod(value);
    } else if (key == "linear_scale") {
      spec.linear_scale = std::stod(value);
    } else if (key == "interaction_scale") {
      spec.interaction_scale = std::stod(value);
    } else if (key == "quadratic_scale") {
      spec.quadratic_scale = std::stod(value);
    } else if (key == "logit_bias") {
      spec.logit_bias = std::stod(value);
    } else if (key == "zipf_exponent") {
      spec.zipf_exponent = std::stod(value);
    } else {
      throw ConfigError("synth spec: unknown key \"" + key + "\"");
    }
  }
  if (!have_cards) throw ConfigError("synth spec: missing cardinalities");
  spec.validate();
  return spec;
}

}  // namespace leaffm
