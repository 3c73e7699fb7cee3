#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "bftt3d/io.hpp"

namespace bftt3d {

// Static source prototype memory: per class, the ceil(ratio * n_c) features
// nearest (Euclidean) to the mean of all class-c features, plus the one-hot
// label matrix. Immutable once built.
class PrototypeMemory {
 public:
  const FeatureMatrix& features() const noexcept { return features_; }       // n_s x D
  const Eigen::MatrixXd& labels() const noexcept { return labels_; }         // n_s x C one-hot
  const Eigen::MatrixXd& class_means() const noexcept { return class_means_; }  // C x D
  const std::vector<int>& label_ids() const noexcept { return label_ids_; }
  double ratio() const noexcept { return ratio_; }
  std::uint64_t config_hash() const noexcept { return config_hash_; }
  std::size_t size() const noexcept { return static_cast<std::size_t>(features_.rows()); }
  std::size_t dim() const noexcept { return static_cast<std::size_t>(features_.cols()); }
  std::size_t classes() const noexcept { return static_cast<std::size_t>(labels_.cols()); }
  std::size_t count_for(int label) const;

  // Digest of every stored value; used to assert the memory is not mutated.
  std::uint64_t state_hash() const noexcept;

  friend PrototypeMemory build_memory(const std::vector<FeatureMatrix>&, double, std::uint64_t);
  friend PrototypeMemory load_memory(const std::filesystem::path&, std::uint64_t);

 private:
  PrototypeMemory(FeatureMatrix features, Eigen::MatrixXd labels, Eigen::MatrixXd class_means,
                  double ratio, std::uint64_t config_hash);
  void validate() const;  // throws CorruptionError

  FeatureMatrix features_;
  Eigen::MatrixXd labels_;
  Eigen::MatrixXd class_means_;
  std::vector<int> label_ids_;
  double ratio_;
  std::uint64_t config_hash_;
};

// `per_class[c]` holds all class-c source features, one per row. Rows are
// stored class by class, and within a class by ascending distance to the class
// mean (ties by original row). Throws ArgumentError on an empty class, a
// ratio outside (0, 1] or inconsistent feature widths.
PrototypeMemory build_memory(const std::vector<FeatureMatrix>& per_class, double ratio,
                             std::uint64_t config_hash = 0);

// Splits rows of `features` by integer label into per-class matrices.
std::vector<FeatureMatrix> group_by_label(const FeatureMatrix& features, const std::vector<int>& labels,
                                          int class_count);

// MEM1 | u64 config_hash | u32 n_s | u32 D | u32 C | f64 ratio
//      | n_s*D f64 features | C*D f64 class means | n_s*C f32 labels
void save_memory(const PrototypeMemory& memory, const std::filesystem::path& path);

// Throws FormatError on a malformed file, CorruptionError when a stored
// invariant fails, ConfigError when `expected_config_hash` is nonzero and
// differs from the stored hash.
PrototypeMemory load_memory(const std::filesystem::path& path, std::uint64_t expected_config_hash = 0);

}  // namespace bftt3d
