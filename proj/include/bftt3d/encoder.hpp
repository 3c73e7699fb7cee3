#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bftt3d/geometry.hpp"
#include "bftt3d/io.hpp"

namespace bftt3d {

// Training-free hierarchical encoder: trigonometric point embedding, then
// `stages` rounds of FPS + k-NN grouping with position-reweighted neighbor
// aggregation, then global max + mean pooling.
struct EncoderConfig {
  int d0 = 72;             // base embedding width, multiple of 6
  double alpha = 1000.0;   // wavelength scale
  double beta = 100.0;     // frequency base
  int stages = 4;
  int k_neighbors = 24;
  double fps_ratio = 0.5;  // per-stage fraction of points kept as centers

  void validate() const;  // throws ConfigError
  std::size_t output_dim() const noexcept { return static_cast<std::size_t>(d0) << stages; }
  // Stable 64-bit digest of all fields; persisted in memory files.
  std::uint64_t hash() const noexcept;

  friend bool operator==(const EncoderConfig&, const EncoderConfig&) = default;
};

using Vec3d = std::array<double, 3>;

std::vector<Vec3d> to_double_points(const PointCloud& cloud);

// Trigonometric embedding of `p` at `width` channels (multiple of 6):
// [X block | Y block | Z block], each width/3 long; pair k of a block holds
// sin, cos of alpha * p_axis / beta^(6k / width).
void channel_embed(const Vec3d& p, int width, double alpha, double beta, std::span<double> out);
std::vector<double> channel_embed(const Vec3d& p, const EncoderConfig& cfg);

// Greedy farthest point sampling. The first pick is the point farthest from
// the centroid; each later pick maximizes the distance to the selected set.
// Distance ties go to the lexicographically smallest coordinates, then the
// lowest index. Throws ArgumentError unless 1 <= target_count <= N.
std::vector<std::size_t> fps(std::span<const Vec3d> points, std::size_t target_count);
std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t target_count);

// For each center, its k nearest points (center included) in ascending
// distance, with the same tie-break as fps. Throws ArgumentError if k > N.
std::vector<std::vector<std::size_t>> knn_group(std::span<const Vec3d> points,
                                                std::span<const std::size_t> centers,
                                                std::size_t k);
std::vector<std::vector<std::size_t>> knn_group(const PointCloud& cloud,
                                                std::span<const std::size_t> centers,
                                                std::size_t k);

using StageFeatures = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct StageResult {
  std::vector<std::size_t> center_indices;  // into the stage's input points
  std::vector<Vec3d> centers;
  StageFeatures features;  // one row of width 2 * D_in per center
};

// One aggregation stage. `features` has one row per point.
StageResult stage_aggregate(const StageFeatures& features, std::span<const Vec3d> points,
                            const EncoderConfig& cfg);

// Initial per-point embedding at width d0.
StageFeatures embed_points(std::span<const Vec3d> points, const EncoderConfig& cfg);

// Number of points entering each stage for an N-point cloud.
std::vector<std::size_t> stage_sizes(std::size_t n_points, const EncoderConfig& cfg);

// Smallest N the configured pipeline accepts.
std::size_t minimum_points(const EncoderConfig& cfg);

Eigen::VectorXd encode(const PointCloud& cloud, const EncoderConfig& cfg);

}  // namespace bftt3d
