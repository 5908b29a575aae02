#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnbound/matrix.hpp"

namespace attnbound {

// ---------------------------------------------------------------------------
// NPY v1.0 tensors
//
// Reading accepts little-endian float32 ('<f4') and float64 ('<f8') in C
// order with 0, 1 or 2 dimensions; 1-D arrays load as n x 1 and scalars as
// 1 x 1. float32 is widened to double. Writing always emits 2-D '<f8'.
// ---------------------------------------------------------------------------

Matrix parse_tensor(std::span<const std::byte> bytes);
std::vector<std::byte> encode_tensor(const Matrix& m);

Matrix read_tensor(const std::filesystem::path& path);
void write_tensor(const Matrix& m, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Dump manifests
// ---------------------------------------------------------------------------

struct DumpEntry {
  int layer = 0;
  int head = 0;
  std::filesystem::path q;
  std::filesystem::path k;
  std::filesystem::path v;
  std::optional<std::filesystem::path> attention;
};

struct DumpIndex {
  std::filesystem::path root;  // directory the entry paths are relative to
  std::string model_id;
  std::size_t d_model = 0;
  std::size_t n_layers = 0;
  std::size_t n_heads = 0;
  std::size_t seq_len = 0;
  std::optional<double> temperature;  // absent or null: sqrt(d) per head
  bool causal = false;
  std::optional<std::filesystem::path> embeddings;
  std::vector<DumpEntry> entries;

  const DumpEntry* find(int layer, int head) const noexcept;
};

/// Accepts the manifest file itself or the directory holding manifest.json.
DumpIndex read_manifest(const std::filesystem::path& path);
/// Writes `index` as manifest.json under index.root. Entry paths are written
/// as given, so they should be relative to root.
void write_manifest(const DumpIndex& index);

struct HeadDump {
  std::string model_id;
  int layer = 0;
  int head = 0;
  std::size_t seq_len = 0;
  std::size_t head_dim = 0;
  Matrix q;
  Matrix k;
  Matrix v;
  std::optional<Matrix> attention;
  std::optional<Matrix> embeddings;
  double temperature = 1.0;
  bool causal = false;
};

/// Shape agreement, attention rows on the simplex (1e-6), positive temperature.
void validate(const HeadDump& dump);

std::optional<Matrix> load_embeddings(const DumpIndex& index);

/// Loads and validates one head. Shared embeddings are attached when given.
HeadDump load_head(const DumpIndex& index, const DumpEntry& entry,
                   const std::optional<Matrix>& embeddings = std::nullopt);

}  // namespace attnbound
