#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace bftt3d {

using Point3 = std::array<float, 3>;

// Immutable N x 3 point set. Construction validates N >= 1 and finiteness.
class PointCloud {
 public:
  explicit PointCloud(std::vector<Point3> points);

  std::size_t size() const noexcept { return points_.size(); }
  std::span<const Point3> points() const noexcept { return points_; }
  const Point3& operator[](std::size_t i) const noexcept { return points_[i]; }

  friend bool operator==(const PointCloud&, const PointCloud&) = default;

 private:
  std::vector<Point3> points_;
};

struct Normalization {
  std::array<double, 3> center{};
  double scale = 1.0;  // max distance to center before normalization
};

Normalization unit_sphere_transform(const PointCloud& cloud);

// Centroid-centered, max norm 1. A cloud whose points all coincide is only
// centered.
PointCloud normalize_unit_sphere(const PointCloud& cloud);

enum class ShapeKind { sphere, cube, cylinder, torus };

inline constexpr std::array<ShapeKind, 4> kAllShapes = {ShapeKind::sphere, ShapeKind::cube,
                                                        ShapeKind::cylinder, ShapeKind::torus};

ShapeKind parse_shape_kind(std::string_view name);
std::string_view to_string(ShapeKind kind) noexcept;

// Canonical surface sample, normalized to the unit sphere. Deterministic for
// (kind, n_points, seed). Requires n_points >= 8.
PointCloud generate_shape(ShapeKind kind, std::size_t n_points, std::uint64_t seed);

// Dataset instance: canonical shape with per-instance anisotropic scaling,
// a small rotation and proportion changes drawn from `seed`, normalized.
PointCloud generate_instance(ShapeKind kind, std::size_t n_points, std::uint64_t seed);

double max_norm(const PointCloud& cloud) noexcept;
std::array<double, 3> centroid(const PointCloud& cloud) noexcept;

}  // namespace bftt3d
