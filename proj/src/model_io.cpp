#include "leaffm/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <ostream>

namespace leaffm {

uint32_t crc32(const unsigned char* data, size_t len) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1u) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t crc = 0xFFFFFFFFu;
  for (size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xFFu] ^ (crc >> 8);
  return crc ^ 0xFFFFFFFFu;
}

namespace {

struct ByteWriter {
  std::string buf;
  void u8(uint8_t v) { buf.push_back(static_cast<char>(v)); }
  void u32(uint32_t v) {
    for (int i = 0; i < 4; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void u64(uint64_t v) {
    for (int i = 0; i < 8; ++i) buf.push_back(static_cast<char>((v >> (8 * i)) & 0xFFu));
  }
  void f64(double v) { u64(std::bit_cast<uint64_t>(v)); }
  void vec(const Vec& v) {
    u64(v.size());
    for (double x : v) f64(x);
  }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    buf.append(s);
  }
};

struct ByteReader {
  const unsigned char* p;
  const unsigned char* end;
  uint8_t u8() {
    need(1);
    return *p++;
  }
  uint32_t u32() {
    need(4);
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<uint32_t>(*p++) << (8 * i);
    return v;
  }
  uint64_t u64() {
    need(8);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<uint64_t>(*p++) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  Vec vec() {
    const uint64_t n = u64();
    need(n * 8);
    Vec v(n);
    for (uint64_t i = 0; i < n; ++i) v[i] = f64();
    return v;
  }
  std::string str() {
    const uint32_t n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(p), n);
    p += n;
    return s;
  }
  void need(uint64_t n) const {
    if (static_cast<uint64_t>(end - p) < n) throw IoError("model file: truncated payload");
  }
};

void write_file_with_crc(const std::string& path, std::string payload) {
  const uint32_t crc = crc32(reinterpret_cast<const unsigned char*>(payload.data()), payload.size());
  for (int i = 0; i < 4; ++i) payload.push_back(static_cast<char>((crc >> (8 * i)) & 0xFFu));
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path + " for writing");
  out.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!out) throw IoError("short write to " + path);
}

std::string read_file_checked(const std::string& path, const char* magic) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (data.size() < 9) throw IoError(path + ": file too short to be a model");
  uint32_t stored = 0;
  for (int i = 0; i < 4; ++i) {
    stored |= static_cast<uint32_t>(static_cast<unsigned char>(data[data.size() - 4 + static_cast<size_t>(i)]))
              << (8 * i);
  }
  data.resize(data.size() - 4);
  const uint32_t computed =
      crc32(reinterpret_cast<const unsigned char*>(data.data()), data.size());
  if (stored != computed) throw IoError(path + ": checksum mismatch (corrupt or truncated file)");
  if (std::memcmp(data.data(), magic, 4) != 0) throw IoError(path + ": bad magic");
  return data;
}

void write_fields(ByteWriter& w, const std::vector<FieldInfo>& fields) {
  w.u32(static_cast<uint32_t>(fields.size()));
  for (const FieldInfo& f : fields) {
    w.u8(static_cast<uint8_t>(f.kind));
    w.u32(f.vocab);
    w.f64(f.mean);
    w.f64(f.stdev);
    w.str(f.name);
  }
}

std::vector<FieldInfo> read_fields(ByteReader& r) {
  const uint32_t n = r.u32();
  std::vector<FieldInfo> fields(n);
  for (FieldInfo& f : fields) {
    f.kind = static_cast<FieldKind>(r.u8());
    f.vocab = r.u32();
    f.mean = r.f64();
    f.stdev = r.f64();
    f.name = r.str();
  }
  return fields;
}

std::vector<uint64_t> offsets_from_fields(const std::vector<FieldInfo>& fields) {
  std::vector<uint64_t> offsets;
  offsets.reserve(fields.size() + 1);
  uint64_t total = 0;
  for (const FieldInfo& f : fields) {
    offsets.push_back(total);
    total += f.vocab;
  }
  offsets.push_back(total);
  return offsets;
}

constexpr char kFoldedMagic[] = "LFFM";
constexpr char kCheckpointMagic[] = "LFCK";
constexpr uint8_t kFormatVersion = 1;

}  // namespace

void write_folded_model(const FoldedModel& model, const std::string& path) {
  ByteWriter w;
  w.buf.append(kFoldedMagic, 4);
  w.u8(kFormatVersion);
  w.u8(static_cast<uint8_t>(model.variant));
  w.u32(static_cast<uint32_t>(model.d));
  write_fields(w, model.fields);
  w.f64(model.w0);
  w.vec(model.w);
  w.vec(model.s.data);
  w.vec(model.q);
  write_file_with_crc(path, std::move(w.buf));
}

FoldedModel read_folded_model(const std::string& path) {
  const std::string data = read_file_checked(path, kFoldedMagic);
  ByteReader r{reinterpret_cast<const unsigned char*>(data.data()) + 4,
               reinterpret_cast<const unsigned char*>(data.data()) + data.size()};
  FoldedModel m;
  m.version = r.u8();
  if (m.version != kFormatVersion) {
    throw IoError(path + ": unsupported model file version " + std::to_string(m.version));
  }
  m.variant = static_cast<Variant>(r.u8());
  m.d = static_cast<int>(r.u32());
  m.fields = read_fields(r);
  m.offsets = offsets_from_fields(m.fields);
  m.w0 = r.f64();
  m.w = r.vec();
  Vec s_data = r.vec();
  m.q = r.vec();
  const uint64_t total = m.offsets.back();
  if (m.w.size() != total || m.q.size() != total ||
      s_data.size() != total * static_cast<uint64_t>(m.d)) {
    throw IoError(path + ": tensor sizes disagree with the declared dimensions");
  }
  m.s = Matrix(static_cast<std::int64_t>(total), m.d);
  m.s.data = std::move(s_data);
  return m;
}

void write_checkpoint(const Checkpoint& ckpt, const std::string& path) {
  const ModelConfig& cfg = ckpt.params.cfg;
  ByteWriter w;
  w.buf.append(kCheckpointMagic, 4);
  w.u8(kFormatVersion);
  w.u8(static_cast<uint8_t>(cfg.variant));
  w.u32(static_cast<uint32_t>(cfg.embedding_dim));
  w.u32(static_cast<uint32_t>(cfg.per_field_vocab.size()));
  for (uint32_t v : cfg.per_field_vocab) w.u32(v);
  w.u32(static_cast<uint32_t>(cfg.expansion_ratio));
  w.u32(static_cast<uint32_t>(cfg.depth));
  w.u32(static_cast<uint32_t>(cfg.generated_count));
  w.u8(cfg.activation == Activation::relu ? 0 : 1);
  w.f64(cfg.lambda);
  w.f64(cfg.learning_rate);
  w.u32(static_cast<uint32_t>(cfg.batch_size));
  w.u32(static_cast<uint32_t>(cfg.max_epochs));
  w.u32(static_cast<uint32_t>(cfg.patience));
  w.u64(cfg.seed);
  write_fields(w, ckpt.fields);
  w.f64(ckpt.params.w0);
  w.vec(ckpt.params.w);
  w.vec(ckpt.params.V.data);
  w.vec(ckpt.params.dense);
  write_file_with_crc(path, std::move(w.buf));
}

Checkpoint read_checkpoint(const std::string& path) {
  const std::string data = read_file_checked(path, kCheckpointMagic);
  ByteReader r{reinterpret_cast<const unsigned char*>(data.data()) + 4,
               reinterpret_cast<const unsigned char*>(data.data()) + data.size()};
  const uint8_t version = r.u8();
  if (version != kFormatVersion) {
    throw IoError(path + ": unsupported checkpoint version " + std::to_string(version));
  }
  ModelConfig cfg;
  cfg.variant = static_cast<Variant>(r.u8());
  cfg.embedding_dim = static_cast<int>(r.u32());
  const uint32_t f = r.u32();
  cfg.per_field_vocab.resize(f);
  for (uint32_t i = 0; i < f; ++i) cfg.per_field_vocab[i] = r.u32();
  cfg.expansion_ratio = static_cast<int>(r.u32());
  cfg.depth = static_cast<int>(r.u32());
  cfg.generated_count = static_cast<int>(r.u32());
  cfg.activation = r.u8() == 0 ? Activation::relu : Activation::identity;
  cfg.lambda = r.f64();
  cfg.learning_rate = r.f64();
  cfg.batch_size = static_cast<int>(r.u32());
  cfg.max_epochs = static_cast<int>(r.u32());
  cfg.patience = static_cast<int>(r.u32());
  cfg.seed = r.u64();

  Checkpoint ckpt;
  ckpt.fields = read_fields(r);
  ckpt.params = build_parameters(cfg);
  ckpt.params.w0 = r.f64();
  Vec w = r.vec();
  Vec v = r.vec();
  Vec dense = r.vec();
  if (w.size() != ckpt.params.w.size() || v.size() != ckpt.params.V.size() ||
      dense.size() != ckpt.params.dense.size()) {
    throw IoError(path + ": tensor sizes disagree with the stored configuration");
  }
  ckpt.params.w = std::move(w);
  ckpt.params.V.data = std::move(v);
  ckpt.params.dense = std::move(dense);
  return ckpt;
}

void write_folded_text(const FoldedModel& model, std::ostream& out) {
  out << "folded_model version=" << model.version << " variant=" << to_string(model.variant)
      << " d=" << model.d << " fields=" << model.fields.size()
      << " features=" << model.total_features() << "\n";
  out << "w0 " << model.w0 << "\n";
  for (size_t f = 0; f < model.fields.size(); ++f) {
    const FieldInfo& info = model.fields[f];
    out << "field " << f << " kind=" << (info.kind == FieldKind::numerical ? "numerical" : "categorical")
        << " vocab=" << info.vocab << " mean=" << info.mean << " stdev=" << info.stdev << " name="
        << info.name << "\n";
  }
  for (uint64_t i = 0; i < model.total_features(); ++i) {
    out << i << " w=" << model.w[i] << " q=" << model.q[i] << " s=";
    for (int c = 0; c < model.d; ++c) {
      out << (c == 0 ? "" : ",") << model.s.at(static_cast<std::int64_t>(i), c);
    }
    out << "\n";
  }
}

}  // namespace leaffm
