#include "bftt3d/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bftt3d/error.hpp"
#include "bftt3d/rng.hpp"

namespace bftt3d {

namespace {

using Vec3 = std::array<double, 3>;

constexpr double kPi = std::numbers::pi;

Vec3 random_unit(CounterRng& rng) {
  for (;;) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(v[0] * v[0] + v[1] * v[1] + v[2] * v[2]);
    if (n > 1e-12) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

Vec3 sample_sphere(CounterRng& rng) { return random_unit(rng); }

Vec3 sample_cube(CounterRng& rng) {
  const auto face = rng.below(6);
  const double u = rng.uniform(-1.0, 1.0);
  const double v = rng.uniform(-1.0, 1.0);
  const double s = (face % 2 == 0) ? 1.0 : -1.0;
  switch (face / 2) {
    case 0: return {s, u, v};
    case 1: return {u, s, v};
    default: return {u, v, s};
  }
}

// Closed cylinder along z: radius r, z in [-h, h], area-weighted between the
// lateral surface and the two caps.
Vec3 sample_cylinder(CounterRng& rng, double r, double h) {
  const double lateral = 2.0 * kPi * r * 2.0 * h;
  const double caps = 2.0 * kPi * r * r;
  const double theta = rng.uniform(0.0, 2.0 * kPi);
  if (rng.uniform() * (lateral + caps) < lateral) {
    return {r * std::cos(theta), r * std::sin(theta), rng.uniform(-h, h)};
  }
  const double rho = r * std::sqrt(rng.uniform());
  const double z = rng.below(2) == 0 ? h : -h;
  return {rho * std::cos(theta), rho * std::sin(theta), z};
}

// Torus around z with major radius 1 and tube radius `tube`; area-uniform via
// rejection on the surface element (1 + tube * cos v).
Vec3 sample_torus(CounterRng& rng, double tube) {
  for (;;) {
    const double u = rng.uniform(0.0, 2.0 * kPi);
    const double v = rng.uniform(0.0, 2.0 * kPi);
    const double w = (1.0 + tube * std::cos(v)) / (1.0 + tube);
    if (rng.uniform() <= w) {
      const double ring = 1.0 + tube * std::cos(v);
      return {ring * std::cos(u), ring * std::sin(u), tube * std::sin(v)};
    }
  }
}

struct ShapeParams {
  double cylinder_radius = 0.6;
  double cylinder_half_height = 1.0;
  double torus_tube = 0.35;
};

std::vector<Point3> sample_surface(ShapeKind kind, std::size_t n, CounterRng& rng,
                                   const ShapeParams& params,
                                   const std::array<std::array<double, 3>, 3>& transform) {
  std::vector<Point3> pts;
  pts.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Vec3 p{};
    switch (kind) {
      case ShapeKind::sphere: p = sample_sphere(rng); break;
      case ShapeKind::cube: p = sample_cube(rng); break;
      case ShapeKind::cylinder:
        p = sample_cylinder(rng, params.cylinder_radius, params.cylinder_half_height);
        break;
      case ShapeKind::torus: p = sample_torus(rng, params.torus_tube); break;
    }
    Point3 q{};
    for (int r = 0; r < 3; ++r) {
      q[r] = static_cast<float>(transform[r][0] * p[0] + transform[r][1] * p[1] +
                                transform[r][2] * p[2]);
    }
    pts.push_back(q);
  }
  return pts;
}

constexpr std::array<std::array<double, 3>, 3> kIdentity = {{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

}  // namespace

PointCloud::PointCloud(std::vector<Point3> points) : points_(std::move(points)) {
  if (points_.empty()) throw ArgumentError("point cloud must contain at least one point");
  for (const auto& p : points_) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1]) || !std::isfinite(p[2])) {
      throw ArgumentError("point cloud contains a non-finite coordinate");
    }
  }
}

std::array<double, 3> centroid(const PointCloud& cloud) noexcept {
  std::array<double, 3> c{};
  for (const auto& p : cloud.points()) {
    for (int k = 0; k < 3; ++k) c[k] += p[k];
  }
  for (auto& v : c) v /= static_cast<double>(cloud.size());
  return c;
}

double max_norm(const PointCloud& cloud) noexcept {
  double best = 0.0;
  for (const auto& p : cloud.points()) {
    const double n = std::sqrt(double(p[0]) * p[0] + double(p[1]) * p[1] + double(p[2]) * p[2]);
    best = std::max(best, n);
  }
  return best;
}

Normalization unit_sphere_transform(const PointCloud& cloud) {
  Normalization t;
  t.center = centroid(cloud);
  double scale = 0.0;
  for (const auto& p : cloud.points()) {
    double s = 0.0;
    for (int k = 0; k < 3; ++k) {
      const double d = p[k] - t.center[k];
      s += d * d;
    }
    scale = std::max(scale, s);
  }
  t.scale = std::sqrt(scale);
  return t;
}

PointCloud normalize_unit_sphere(const PointCloud& cloud) {
  const auto t = unit_sphere_transform(cloud);
  const double inv = t.scale > 0.0 ? 1.0 / t.scale : 1.0;
  std::vector<Point3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points()) {
    out.push_back({static_cast<float>((p[0] - t.center[0]) * inv),
                   static_cast<float>((p[1] - t.center[1]) * inv),
                   static_cast<float>((p[2] - t.center[2]) * inv)});
  }
  return PointCloud(std::move(out));
}

ShapeKind parse_shape_kind(std::string_view name) {
  for (auto k : kAllShapes) {
    if (to_string(k) == name) return k;
  }
  throw ConfigError("unknown shape kind '" + std::string(name) + "'");
}

std::string_view to_string(ShapeKind kind) noexcept {
  switch (kind) {
    case ShapeKind::sphere: return "sphere";
    case ShapeKind::cube: return "cube";
    case ShapeKind::cylinder: return "cylinder";
    case ShapeKind::torus: return "torus";
  }
  return "unknown";
}

PointCloud generate_shape(ShapeKind kind, std::size_t n_points, std::uint64_t seed) {
  if (n_points < 8) throw ArgumentError("generate_shape needs at least 8 points");
  CounterRng rng(seed, to_string(kind), 0);
  return normalize_unit_sphere(PointCloud(sample_surface(kind, n_points, rng, {}, kIdentity)));
}

PointCloud generate_instance(ShapeKind kind, std::size_t n_points, std::uint64_t seed) {
  if (n_points < 8) throw ArgumentError("generate_instance needs at least 8 points");
  CounterRng shape_rng(seed, "instance-shape", static_cast<std::uint64_t>(kind));
  ShapeParams params;
  params.cylinder_radius = shape_rng.uniform(0.5, 0.7);
  params.cylinder_half_height = shape_rng.uniform(0.9, 1.1);
  params.torus_tube = shape_rng.uniform(0.3, 0.4);

  // Anisotropic scale followed by a rotation of at most 10 degrees.
  const Vec3 scale{shape_rng.uniform(0.85, 1.15), shape_rng.uniform(0.85, 1.15),
                   shape_rng.uniform(0.85, 1.15)};
  const Vec3 axis = random_unit(shape_rng);
  const double angle = shape_rng.uniform(-10.0, 10.0) * kPi / 180.0;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  const auto [x, y, z] = axis;
  const std::array<std::array<double, 3>, 3> rot = {{
      {t * x * x + c, t * x * y - s * z, t * x * z + s * y},
      {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
      {t * x * z - s * y, t * y * z + s * x, t * z * z + c},
  }};
  std::array<std::array<double, 3>, 3> m{};
  for (int r = 0; r < 3; ++r) {
    for (int k = 0; k < 3; ++k) m[r][k] = rot[r][k] * scale[k];
  }

  CounterRng point_rng(seed, "instance-points", static_cast<std::uint64_t>(kind));
  return normalize_unit_sphere(PointCloud(sample_surface(kind, n_points, point_rng, params, m)));
}

}  // namespace bftt3d
