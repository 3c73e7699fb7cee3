#include "bftt3d/corruption.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "bftt3d/error.hpp"
#include "bftt3d/rng.hpp"

namespace bftt3d {

namespace {

using Vec3 = std::array<double, 3>;

struct KindInfo {
  CorruptionKind kind;
  std::string_view name;
  std::array<double, 5> schedule;
};

constexpr std::array<KindInfo, 15> kKinds = {{
    {CorruptionKind::uniform, "uniform", {0.01, 0.02, 0.03, 0.04, 0.05}},
    {CorruptionKind::gaussian, "gaussian", {0.01, 0.015, 0.02, 0.025, 0.03}},
    {CorruptionKind::background, "background", {10, 20, 30, 40, 50}},
    {CorruptionKind::impulse, "impulse", {0.01, 0.02, 0.03, 0.04, 0.05}},
    {CorruptionKind::upsampling, "upsampling", {0.1, 0.2, 0.3, 0.4, 0.5}},
    {CorruptionKind::rbf, "rbf", {0.04, 0.08, 0.12, 0.16, 0.2}},
    {CorruptionKind::rbf_inv, "rbf-inv", {0.04, 0.08, 0.12, 0.16, 0.2}},
    {CorruptionKind::den_dec, "den-dec", {0.1, 0.2, 0.3, 0.4, 0.5}},
    {CorruptionKind::den_inc, "den-inc", {0.1, 0.2, 0.3, 0.4, 0.5}},
    {CorruptionKind::shear, "shear", {0.1, 0.2, 0.3, 0.4, 0.5}},
    {CorruptionKind::rot, "rot", {5, 15, 30, 60, 90}},
    {CorruptionKind::cut, "cut", {1, 2, 3, 4, 5}},
    {CorruptionKind::distort, "distort", {0.05, 0.1, 0.15, 0.2, 0.25}},
    {CorruptionKind::occlusion, "occlusion", {0.2, 0.4, 0.6, 0.8, 1.0}},
    {CorruptionKind::lidar, "lidar", {0.1, 0.2, 0.3, 0.4, 0.5}},
}};

const KindInfo& info(CorruptionKind kind) {
  return kKinds[static_cast<std::size_t>(kind)];
}

double dot(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

Vec3 to_vec(const Point3& p) { return {p[0], p[1], p[2]}; }

Point3 to_point(const Vec3& v) {
  return {static_cast<float>(v[0]), static_cast<float>(v[1]), static_cast<float>(v[2])};
}

Vec3 random_unit(CounterRng& rng) {
  for (;;) {
    Vec3 v{rng.normal(), rng.normal(), rng.normal()};
    const double n = std::sqrt(dot(v, v));
    if (n > 1e-12) return {v[0] / n, v[1] / n, v[2] / n};
  }
}

Vec3 random_in_ball(CounterRng& rng, double radius) {
  for (;;) {
    Vec3 v{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    if (dot(v, v) <= 1.0) return {v[0] * radius, v[1] * radius, v[2] * radius};
  }
}

std::vector<Point3> copy_points(const PointCloud& c) { return {c.points().begin(), c.points().end()}; }

std::size_t retain_floor(std::size_t n) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(kMinRetainedFraction * n)));
}

// Keeps points whose violation is <= 0. If fewer than the retention floor
// survive, the least-violating removed points are restored.
PointCloud keep_by_violation(const PointCloud& cloud, const std::vector<double>& violation) {
  const std::size_t n = cloud.size();
  std::vector<char> keep(n, 0);
  std::size_t kept = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (violation[i] <= 0.0) {
      keep[i] = 1;
      ++kept;
    }
  }
  const std::size_t floor = retain_floor(n);
  if (kept < floor) {
    std::vector<std::size_t> removed;
    for (std::size_t i = 0; i < n; ++i) {
      if (!keep[i]) removed.push_back(i);
    }
    std::stable_sort(removed.begin(), removed.end(),
                     [&](std::size_t a, std::size_t b) { return violation[a] < violation[b]; });
    for (std::size_t j = 0; kept < floor; ++j, ++kept) keep[removed[j]] = 1;
  }
  std::vector<Point3> out;
  out.reserve(kept);
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(cloud[i]);
  }
  return PointCloud(std::move(out));
}

std::vector<std::size_t> distinct_indices(CounterRng& rng, std::size_t n, std::size_t count) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  count = std::min(count, n);
  for (std::size_t i = 0; i < count; ++i) {
    const auto j = i + rng.below(n - i);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  return idx;
}

std::size_t scaled_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::lround(fraction * static_cast<double>(n)));
}

PointCloud jitter(const PointCloud& cloud, CounterRng& rng, bool gaussian, double magnitude) {
  auto pts = copy_points(cloud);
  for (auto& p : pts) {
    for (auto& v : p) {
      const double d = gaussian ? rng.normal(0.0, magnitude) : rng.uniform(-magnitude, magnitude);
      v = static_cast<float>(v + d);
    }
  }
  return PointCloud(std::move(pts));
}

PointCloud background(const PointCloud& cloud, CounterRng& rng, double count) {
  auto pts = copy_points(cloud);
  const auto extra = static_cast<std::size_t>(std::lround(count));
  for (std::size_t i = 0; i < extra; ++i) {
    pts.push_back(to_point({rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)}));
  }
  return PointCloud(std::move(pts));
}

PointCloud impulse(const PointCloud& cloud, CounterRng& rng, double fraction) {
  auto pts = copy_points(cloud);
  for (auto i : distinct_indices(rng, pts.size(), scaled_count(fraction, pts.size()))) {
    for (auto& v : pts[i]) v = static_cast<float>(v + (rng.below(2) == 0 ? 0.1 : -0.1));
  }
  return PointCloud(std::move(pts));
}

PointCloud upsampling(const PointCloud& cloud, CounterRng& rng, double fraction) {
  auto pts = copy_points(cloud);
  const std::size_t n = cloud.size();
  const std::size_t extra = scaled_count(fraction, n);
  for (std::size_t i = 0; i < extra; ++i) {
    auto p = to_vec(cloud[rng.below(n)]);
    for (auto& v : p) v += rng.uniform(-0.03, 0.03);
    pts.push_back(to_point(p));
  }
  return PointCloud(std::move(pts));
}

// Smooth displacement field: sum of 5 seeded radial bumps with random unit
// directions, width 0.5.
PointCloud radial_warp(const PointCloud& cloud, CounterRng& rng, double amplitude, bool inverse) {
  constexpr int kCenters = 5;
  constexpr double kWidth = 0.5;
  std::array<Vec3, kCenters> centers{};
  std::array<Vec3, kCenters> dirs{};
  for (int i = 0; i < kCenters; ++i) {
    centers[i] = random_in_ball(rng, 0.9);
    dirs[i] = random_unit(rng);
  }
  auto pts = copy_points(cloud);
  for (auto& p : pts) {
    const auto x = to_vec(p);
    Vec3 d{};
    for (int i = 0; i < kCenters; ++i) {
      Vec3 r{x[0] - centers[i][0], x[1] - centers[i][1], x[2] - centers[i][2]};
      const double r2 = dot(r, r) / (kWidth * kWidth);
      const double k = inverse ? 1.0 / std::sqrt(1.0 + r2) : std::exp(-0.5 * r2);
      for (int a = 0; a < 3; ++a) d[a] += amplitude * k * dirs[i][a];
    }
    p = to_point({x[0] + d[0], x[1] + d[1], x[2] + d[2]});
  }
  return PointCloud(std::move(pts));
}

PointCloud den_dec(const PointCloud& cloud, CounterRng& rng, double fraction) {
  constexpr double kVoxel = 0.25;
  const std::size_t n = cloud.size();
  const std::size_t drop = std::min(scaled_count(fraction, n), n - retain_floor(n));
  using Key = std::tuple<long, long, long>;
  std::map<Key, std::vector<std::size_t>> voxels;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& p = cloud[i];
    voxels[{std::lround(std::floor(p[0] / kVoxel)), std::lround(std::floor(p[1] / kVoxel)),
            std::lround(std::floor(p[2] / kVoxel))}]
        .push_back(i);
  }
  std::vector<std::pair<double, const std::vector<std::size_t>*>> order;
  order.reserve(voxels.size());
  for (const auto& [key, members] : voxels) order.emplace_back(rng.uniform(), &members);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<char> removed(n, 0);
  std::size_t dropped = 0;
  for (const auto& [prio, members] : order) {
    for (auto i : *members) {
      if (dropped == drop) break;
      removed[i] = 1;
      ++dropped;
    }
    if (dropped == drop) break;
  }
  std::vector<Point3> out;
  out.reserve(n - dropped);
  for (std::size_t i = 0; i < n; ++i) {
    if (!removed[i]) out.push_back(cloud[i]);
  }
  return PointCloud(std::move(out));
}

PointCloud den_inc(const PointCloud& cloud, CounterRng& rng, double fraction) {
  constexpr std::size_t kAnchors = 3;
  const std::size_t n = cloud.size();
  const std::size_t extra = scaled_count(fraction, n);
  auto pts = copy_points(cloud);
  for (std::size_t a = 0; a < kAnchors; ++a) {
    const auto anchor = to_vec(cloud[rng.below(n)]);
    const std::size_t share = std::min(n, extra / kAnchors + (a < extra % kAnchors ? 1 : 0));
    std::vector<std::pair<double, std::size_t>> by_dist(n);
    for (std::size_t i = 0; i < n; ++i) {
      const auto x = to_vec(cloud[i]);
      Vec3 d{x[0] - anchor[0], x[1] - anchor[1], x[2] - anchor[2]};
      by_dist[i] = {dot(d, d), i};
    }
    std::partial_sort(by_dist.begin(), by_dist.begin() + static_cast<std::ptrdiff_t>(share),
                      by_dist.end());
    for (std::size_t j = 0; j < share; ++j) {
      auto x = to_vec(cloud[by_dist[j].second]);
      for (auto& v : x) v += rng.normal(0.0, 0.01);
      pts.push_back(to_point(x));
    }
  }
  return PointCloud(std::move(pts));
}

PointCloud linear_map(const PointCloud& cloud, const std::array<Vec3, 3>& m) {
  auto pts = copy_points(cloud);
  for (auto& p : pts) {
    const auto x = to_vec(p);
    p = to_point({dot(m[0], x), dot(m[1], x), dot(m[2], x)});
  }
  return PointCloud(std::move(pts));
}

PointCloud shear(const PointCloud& cloud, CounterRng& rng, double s) {
  std::array<Vec3, 3> m{};
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m[r][c] = (r == c) ? 1.0 : rng.uniform(-s, s);
  }
  return normalize_unit_sphere(linear_map(cloud, m));
}

PointCloud rotate(const PointCloud& cloud, CounterRng& rng, double degrees) {
  const auto [x, y, z] = random_unit(rng);
  const double a = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(a), s = std::sin(a), t = 1.0 - c;
  const std::array<Vec3, 3> m = {{
      {t * x * x + c, t * x * y - s * z, t * x * z + s * y},
      {t * x * y + s * z, t * y * y + c, t * y * z - s * x},
      {t * x * z - s * y, t * y * z + s * x, t * z * z + c},
  }};
  return linear_map(cloud, m);
}

PointCloud cut(const PointCloud& cloud, CounterRng& rng, double slabs) {
  constexpr double kHalfWidth = 0.1;
  const std::size_t floor = retain_floor(cloud.size());
  std::vector<Point3> pts = copy_points(cloud);
  const auto count = static_cast<int>(std::lround(slabs));
  for (int s = 0; s < count; ++s) {
    const auto normal = random_unit(rng);
    const double offset = rng.uniform(-0.6, 0.6);
    std::vector<Point3> next;
    next.reserve(pts.size());
    for (const auto& p : pts) {
      if (std::abs(dot(normal, to_vec(p)) - offset) >= kHalfWidth) next.push_back(p);
    }
    if (next.size() >= floor) pts = std::move(next);
  }
  return PointCloud(std::move(pts));
}

// Free-form deformation with a 3x3x3 quadratic Bernstein lattice on [-1,1]^3.
PointCloud distort(const PointCloud& cloud, CounterRng& rng, double magnitude) {
  std::array<Vec3, 27> offsets{};
  for (auto& o : offsets) {
    const auto u = random_unit(rng);
    const double len = magnitude * rng.uniform();
    o = {u[0] * len, u[1] * len, u[2] * len};
  }
  auto basis = [](double x) {
    const double t = std::clamp((x + 1.0) * 0.5, 0.0, 1.0);
    return std::array<double, 3>{(1 - t) * (1 - t), 2 * t * (1 - t), t * t};
  };
  auto pts = copy_points(cloud);
  for (auto& p : pts) {
    auto x = to_vec(p);
    const auto bx = basis(x[0]), by = basis(x[1]), bz = basis(x[2]);
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        for (int k = 0; k < 3; ++k) {
          const double w = bx[i] * by[j] * bz[k];
          const auto& o = offsets[static_cast<std::size_t>(9 * i + 3 * j + k)];
          for (int a = 0; a < 3; ++a) x[a] += w * o[a];
        }
      }
    }
    p = to_point(x);
  }
  return normalize_unit_sphere(PointCloud(std::move(pts)));
}

PointCloud occlusion(const PointCloud& cloud, CounterRng& rng, double depth) {
  const auto normal = random_unit(rng);
  std::vector<double> violation(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    violation[i] = dot(normal, to_vec(cloud[i])) - (1.0 - depth);
  }
  return keep_by_violation(cloud, violation);
}

// Virtual scanner 3 units away along a seeded direction. Points are kept when
// they face the scanner (depth-limited) and fall on one of the elevation rings
// spaced 1.5 degrees apart; `gap` is the fraction of each ring period dropped.
PointCloud lidar(const PointCloud& cloud, CounterRng& rng, double gap) {
  constexpr double kPeriod = 1.5 * std::numbers::pi / 180.0;
  const auto view = random_unit(rng);
  Vec3 helper = std::abs(view[2]) < 0.9 ? Vec3{0, 0, 1} : Vec3{1, 0, 0};
  Vec3 up{helper[0] - dot(helper, view) * view[0], helper[1] - dot(helper, view) * view[1],
          helper[2] - dot(helper, view) * view[2]};
  const double un = std::sqrt(dot(up, up));
  for (auto& v : up) v /= un;
  const Vec3 side{view[1] * up[2] - view[2] * up[1], view[2] * up[0] - view[0] * up[2],
                  view[0] * up[1] - view[1] * up[0]};
  const double phase = rng.uniform();
  const Vec3 sensor{3 * view[0], 3 * view[1], 3 * view[2]};

  std::vector<double> violation(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto x = to_vec(cloud[i]);
    const Vec3 d{x[0] - sensor[0], x[1] - sensor[1], x[2] - sensor[2]};
    const double h = std::hypot(dot(d, view), dot(d, side));
    const double elevation = std::atan2(dot(d, up), h);
    double ring = elevation / kPeriod + phase;
    ring -= std::floor(ring);
    const double ring_violation = ring - (1.0 - gap);
    const double back_violation = -(dot(x, view) + (1.0 - gap));
    violation[i] = std::max(ring_violation, back_violation);
  }
  return keep_by_violation(cloud, violation);
}

}  // namespace

std::string_view to_string(CorruptionKind kind) noexcept { return info(kind).name; }

CorruptionKind parse_corruption_kind(std::string_view name) {
  for (const auto& k : kKinds) {
    if (k.name == name) return k.kind;
  }
  throw ConfigError("unknown corruption kind '" + std::string(name) + "'");
}

double severity_magnitude(CorruptionKind kind, int severity) {
  if (severity < 1 || severity > 5) {
    throw ArgumentError("severity must be in [1, 5], got " + std::to_string(severity));
  }
  return info(kind).schedule[static_cast<std::size_t>(severity - 1)];
}

PointCloud corrupt_with_magnitude(const PointCloud& cloud, CorruptionKind kind, double magnitude,
                                  std::uint64_t seed, std::uint64_t sample_index) {
  if (!(magnitude >= 0.0) || !std::isfinite(magnitude)) {
    throw ArgumentError("corruption magnitude must be finite and non-negative");
  }
  if (magnitude == 0.0) return cloud;
  CounterRng rng(seed, to_string(kind), sample_index);
  switch (kind) {
    case CorruptionKind::uniform: return jitter(cloud, rng, false, magnitude);
    case CorruptionKind::gaussian: return jitter(cloud, rng, true, magnitude);
    case CorruptionKind::background: return background(cloud, rng, magnitude);
    case CorruptionKind::impulse: return impulse(cloud, rng, magnitude);
    case CorruptionKind::upsampling: return upsampling(cloud, rng, magnitude);
    case CorruptionKind::rbf: return radial_warp(cloud, rng, magnitude, false);
    case CorruptionKind::rbf_inv: return radial_warp(cloud, rng, magnitude, true);
    case CorruptionKind::den_dec: return den_dec(cloud, rng, magnitude);
    case CorruptionKind::den_inc: return den_inc(cloud, rng, magnitude);
    case CorruptionKind::shear: return shear(cloud, rng, magnitude);
    case CorruptionKind::rot: return rotate(cloud, rng, magnitude);
    case CorruptionKind::cut: return cut(cloud, rng, magnitude);
    case CorruptionKind::distort: return distort(cloud, rng, magnitude);
    case CorruptionKind::occlusion: return occlusion(cloud, rng, magnitude);
    case CorruptionKind::lidar: return lidar(cloud, rng, magnitude);
  }
  return cloud;
}

PointCloud corrupt(const PointCloud& cloud, const CorruptionSpec& spec) {
  return corrupt_with_magnitude(cloud, spec.kind, severity_magnitude(spec.kind, spec.severity),
                                spec.seed, spec.sample_index);
}

}  // namespace bftt3d
