#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bftt3d/geometry.hpp"

namespace bftt3d {

// All binary formats: 4-byte ASCII magic, u32 little-endian header fields,
// little-endian IEEE-754 payload.
//
//   PCB1 | u32 N | u32 3 | N*3 f32
//   LGT1 | u32 n_samples | u32 n_classes | n_samples*n_classes f32 (row-major)
//   FTR1 | u32 n | u32 D | n*D f32 (row-major)

PointCloud read_cloud(const std::filesystem::path& path);
void write_cloud(const PointCloud& cloud, const std::filesystem::path& path);

struct LogitRecord {
  std::vector<float> logits;
  std::uint32_t sample_index = 0;
};

// Dense row-major logit table as stored in an LGT1 file.
class LogitMatrix {
 public:
  LogitMatrix(std::uint32_t n_samples, std::uint32_t n_classes, std::vector<float> values);

  std::uint32_t samples() const noexcept { return n_samples_; }
  std::uint32_t classes() const noexcept { return n_classes_; }
  std::span<const float> row(std::uint32_t i) const;
  std::span<const float> values() const noexcept { return values_; }
  std::vector<LogitRecord> records() const;

  friend bool operator==(const LogitMatrix&, const LogitMatrix&) = default;

 private:
  std::uint32_t n_samples_;
  std::uint32_t n_classes_;
  std::vector<float> values_;
};

LogitMatrix read_logits(const std::filesystem::path& path);
void write_logits(const LogitMatrix& logits, const std::filesystem::path& path);
void write_logits(std::span<const LogitRecord> records, const std::filesystem::path& path);

// Feature matrices are held in double precision in memory; FTR1 stores f32.
using FeatureMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

FeatureMatrix read_features(const std::filesystem::path& path);
void write_features(const FeatureMatrix& features, const std::filesystem::path& path);

enum class SplitTag { source_clean, target_corrupted };

struct ManifestEntry {
  std::filesystem::path path;  // resolved against the manifest's directory
  int label = 0;
};

struct LabeledDataset {
  std::vector<ManifestEntry> entries;
  int class_count = 0;
  SplitTag split = SplitTag::source_clean;
};

// JSON Lines, one {"path": string, "label": int} object per line. Relative
// paths resolve against the manifest directory. class_count = max label + 1.
LabeledDataset read_manifest(const std::filesystem::path& path,
                             SplitTag split = SplitTag::source_clean);
// Paths are written relative to the manifest directory when possible.
void write_manifest(const LabeledDataset& dataset, const std::filesystem::path& path);

// Little-endian byte helpers shared by the binary formats.
namespace wire {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v);
void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v);
void put_f32(std::vector<std::uint8_t>& out, float v);
void put_f64(std::vector<std::uint8_t>& out, double v);

class Reader {
 public:
  Reader(std::vector<std::uint8_t> bytes, std::string what);

  void expect_magic(const char (&magic)[5]);
  std::uint32_t u32();
  std::uint64_t u64();
  float f32();
  double f64();
  std::size_t remaining() const noexcept { return bytes_.size() - pos_; }
  // Throws TruncationError unless at least n more bytes are available.
  void require(std::size_t n) const;

 private:
  std::vector<std::uint8_t> bytes_;
  std::size_t pos_ = 0;
  std::string what_;
};

std::vector<std::uint8_t> read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace wire

}  // namespace bftt3d
