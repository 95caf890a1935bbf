#pragma once

#include <iosfwd>

#include "leaffm/folding.hpp"
#include "leaffm/params.hpp"

namespace leaffm {

// Model files are binary, little-endian, 64-bit floats, with a 4-byte magic,
// a version byte and a CRC32 trailer. Reading verifies the checksum before
// touching any payload and refuses unknown versions.

void write_folded_model(const FoldedModel& model, const std::string& path);
FoldedModel read_folded_model(const std::string& path);

// Full training checkpoint: configuration, field metadata and every tensor.
struct Checkpoint {
  ParameterSet params;
  std::vector<FieldInfo> fields;
};

void write_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint read_checkpoint(const std::string& path);

// Human-readable dump of a folded model (debugging aid).
void write_folded_text(const FoldedModel& model, std::ostream& out);

uint32_t crc32(const unsigned char* data, size_t len);

}  // namespace leaffm
