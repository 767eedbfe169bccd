#ifndef GROUNDING_CHECKPOINT_H_
#define GROUNDING_CHECKPOINT_H_

// Binary checkpoint container.
//
//   "TGCK"  u32 version
//   u64 d_v, d_l, hidden_attention, hidden_reconstruction; u8 normalize_visual
//   u32 tensor count, then per tensor:
//     u32 name length, name bytes, u32 rank, u64 dims..., raw little-endian doubles
//   u64 FNV-1a hash of every preceding byte
//
// Doubles are stored bit for bit, so a round trip is exact.

#include <cstdint>
#include <filesystem>
#include <string>

#include "grounding/model.h"

namespace grounding {

inline constexpr std::uint32_t kCheckpointVersion = 1;

std::string SerializeCheckpoint(const ModelParams &params);
// Throws VersionError for an unknown version and CorruptionError for bad
// magic, truncation, trailing bytes or a checksum mismatch.
ModelParams DeserializeCheckpoint(const std::string &bytes);

// Writes to a sibling temporary file and renames it into place.
void SaveCheckpoint(const ModelParams &params, const std::filesystem::path &path);
// IoError when the file cannot be opened.
ModelParams LoadCheckpoint(const std::filesystem::path &path);

// Shared by every writer that must not leave a half-written file behind.
void WriteFileAtomically(const std::filesystem::path &path, const std::string &contents);
std::string ReadFile(const std::filesystem::path &path);

}  // namespace grounding

#endif  // GROUNDING_CHECKPOINT_H_
