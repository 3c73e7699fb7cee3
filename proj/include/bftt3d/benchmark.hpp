#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "bftt3d/corruption.hpp"
#include "bftt3d/encoder.hpp"
#include "bftt3d/head.hpp"
#include "bftt3d/io.hpp"
#include "bftt3d/pipeline.hpp"
#include "bftt3d/source_model.hpp"

namespace bftt3d {

struct DataConfig {
  std::vector<ShapeKind> classes{kAllShapes.begin(), kAllShapes.end()};
  int train_per_class = 100;
  int test_per_class = 50;
  int points = 1024;
};

struct SourceConfig {
  enum class Kind { centroid, file };
  Kind kind = Kind::centroid;
  double temperature = 0.04;
  // File kind: LGT1 path; "{domain}" is replaced by the domain name.
  std::string logits_path;
};

struct RunConfig {
  EncoderConfig encoder;
  DataConfig data;
  double memory_ratio = 0.25;
  SubspaceConfig subspace;
  FusionConfig fusion;
  SourceConfig source;
  // Domain names: any corruption kind, or "clean" for the uncorrupted test set.
  std::vector<std::string> domains;
  int severity = 5;
  std::uint64_t seed = 2024;
  std::size_t threads = 0;  // 0: BFTT3D_THREADS / hardware default
  std::filesystem::path trace_path;  // per-sample JSONL when non-empty

  RunConfig();
  void validate() const;  // throws ConfigError
};

// Encoded benchmark data, reusable across evaluation settings.
struct PreparedBenchmark {
  FeatureMatrix train_features;
  std::vector<int> train_labels;
  std::vector<int> test_labels;  // in evaluation order
  std::vector<std::string> domains;
  std::map<std::string, FeatureMatrix> test_features;  // rows in evaluation order
  std::vector<std::size_t> test_ids;  // dataset index of each evaluation row
  int class_count = 0;
};

PreparedBenchmark prepare_benchmark(const RunConfig& cfg);

// Dataset generation shared by gen-data and the in-process harness.
struct SampleRef {
  ShapeKind shape;
  int label;
  std::uint64_t instance_seed;
};
std::vector<SampleRef> dataset_samples(const RunConfig& cfg, bool train);
PointCloud make_cloud(const RunConfig& cfg, const SampleRef& ref);
// Cloud for domain `domain` of test sample `dataset_index`.
PointCloud make_test_cloud(const RunConfig& cfg, const SampleRef& ref, const std::string& domain,
                           std::size_t dataset_index);

struct ArmRow {
  std::string name;
  std::map<std::string, double> errors;  // percent, per domain
  double mean = 0.0;
};

struct PSummary {
  double min = 0.0, median = 0.0, max = 0.0;
};

struct ErrorReport {
  std::vector<std::string> domains;
  std::vector<ArmRow> arms;
  std::map<std::string, PSummary> p_summary;
  std::vector<std::string> warnings;
  std::uint64_t memory_hash_before = 0, memory_hash_after = 0;
  std::uint64_t source_hash_before = 0, source_hash_after = 0;

  const ArmRow& arm(const std::string& name) const;
  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

// Arms: "source-only", "adaptation" (pure adaptation branch, p = 1) and
// "bftt3d" (the configured fusion).
ErrorReport evaluate(const PreparedBenchmark& data, const RunConfig& cfg);

ErrorReport run_benchmark(const RunConfig& cfg);

enum class AblationAxis { ratio, subspace, fusion_ratio };
AblationAxis parse_ablation_axis(std::string_view name);
std::string_view to_string(AblationAxis axis) noexcept;

struct AblationReport {
  AblationAxis axis;
  std::vector<std::string> domains;
  ArmRow source_only;
  std::vector<ArmRow> rows;  // one per setting of the swept axis

  nlohmann::ordered_json to_json() const;
  std::string to_text() const;
};

// ratio: {25, 50, 75, 100}%; subspace: {none, tca}; fusion-ratio: fixed p in
// {0.0, 0.1, ..., 1.0} followed by adaptive.
AblationReport run_ablation(const PreparedBenchmark& data, const RunConfig& cfg, AblationAxis axis);
AblationReport run_ablation(const RunConfig& cfg, AblationAxis axis);

double error_percent(std::size_t wrong, std::size_t total);

}  // namespace bftt3d
