#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eataudit {

enum class DType { float32, float64 };

// Dense row-major matrix of embedding vectors. Values are held as double
// regardless of the stored dtype; float32 -> double -> float32 is exact, so
// the dtype tag is enough to write back the original bytes.
class EmbeddingMatrix {
 public:
  // Throws DataError unless rows, dim >= 1, data.size() == rows * dim and
  // every value is finite.
  EmbeddingMatrix(std::size_t rows, std::size_t dim, DType dtype,
                  std::vector<double> data);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t dim() const noexcept { return dim_; }
  DType dtype() const noexcept { return dtype_; }
  std::span<const double> data() const noexcept { return data_; }
  std::span<const double> row(std::size_t i) const;

  bool operator==(const EmbeddingMatrix&) const = default;

 private:
  std::size_t rows_;
  std::size_t dim_;
  DType dtype_;
  std::vector<double> data_;
};

// Parses a NPY v1.0/v2.0 file holding a 2-D little-endian float32/float64
// C-order array.
EmbeddingMatrix parse_npy(std::span<const std::uint8_t> bytes);
EmbeddingMatrix parse_npy(std::string_view bytes);

// Emits a NPY v1.0 file. The preamble (magic, version, length, header) is
// padded with spaces and a newline to a multiple of 64 bytes.
std::vector<std::uint8_t> write_npy(const EmbeddingMatrix& matrix);

EmbeddingMatrix load_npy(const std::string& path);
void save_npy(const std::string& path, const EmbeddingMatrix& matrix);

enum class EntryKind { image, text };

struct ManifestEntry {
  std::string id;
  std::string group;
  std::size_t row = 0;
  EntryKind kind = EntryKind::image;
  std::optional<std::string> text;
  std::map<std::string, std::string> meta;
  std::size_t line = 0;  // 1-based source line, 0 when built in code
};

class Manifest {
 public:
  Manifest() = default;
  // Checks ids unique, groups non-empty and rows not shared.
  explicit Manifest(std::vector<ManifestEntry> entries);

  const std::vector<ManifestEntry>& entries() const noexcept {
    return entries_;
  }
  const ManifestEntry* find(std::string_view id) const;

 private:
  std::vector<ManifestEntry> entries_;
};

// One entry per non-blank line. Unknown fields are ignored.
Manifest parse_manifest_jsonl(std::string_view text);

struct Dataset {
  EmbeddingMatrix matrix;
  Manifest manifest;

  // Rows of all entries tagged `group`, in manifest order.
  std::vector<std::size_t> rows_in_group(std::string_view group) const;
};

// Joins a matrix with a manifest, checking every row index is in range.
Dataset make_dataset(EmbeddingMatrix matrix, Manifest manifest);

Dataset load_dataset(const std::string& matrix_path,
                     const std::string& manifest_path);

// dot(u, v) / (|u| |v|), clamped to [-1, 1]. Throws DataError on a dimension
// mismatch or a zero-norm vector.
double cosine(std::span<const double> u, std::span<const double> v);

}  // namespace eataudit
