#include "bftt3d/encoder.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bftt3d/error.hpp"
#include "bftt3d/hash.hpp"

namespace bftt3d {

namespace {

double squared_distance(const Vec3d& a, const Vec3d& b) noexcept {
  const double dx = a[0] - b[0], dy = a[1] - b[1], dz = a[2] - b[2];
  return dx * dx + dy * dy + dz * dz;
}

// Tie-break for equal distances: lexicographic coordinates, then index.
bool coords_before(const Vec3d& a, std::size_t ia, const Vec3d& b, std::size_t ib) noexcept {
  if (a != b) return a < b;
  return ia < ib;
}

// Per-point sin/cos tables at one embedding width, used to expand the
// embedding of pairwise offsets with the angle-difference identities.
struct TrigTable {
  int pairs = 0;                 // frequency pairs per axis
  std::vector<double> freq;      // pairs
  std::vector<double> sin_vals;  // n * 3 * pairs
  std::vector<double> cos_vals;

  TrigTable(std::span<const Vec3d> points, int width, double alpha, double beta)
      : pairs(width / 6), freq(static_cast<std::size_t>(pairs)) {
    for (int k = 0; k < pairs; ++k) {
      freq[static_cast<std::size_t>(k)] = alpha / std::pow(beta, 6.0 * k / width);
    }
    const std::size_t stride = 3 * static_cast<std::size_t>(pairs);
    sin_vals.resize(points.size() * stride);
    cos_vals.resize(points.size() * stride);
    for (std::size_t i = 0; i < points.size(); ++i) {
      for (int a = 0; a < 3; ++a) {
        for (int k = 0; k < pairs; ++k) {
          const double arg = freq[static_cast<std::size_t>(k)] * points[i][static_cast<std::size_t>(a)];
          const std::size_t at = i * stride + static_cast<std::size_t>(a * pairs + k);
          sin_vals[at] = std::sin(arg);
          cos_vals[at] = std::cos(arg);
        }
      }
    }
  }

  // Embedding of (points[nb] - points[center]) written into out (width wide).
  void offset_embedding(std::size_t nb, std::size_t center, std::span<double> out) const noexcept {
    const std::size_t stride = 3 * static_cast<std::size_t>(pairs);
    const double* sn = sin_vals.data() + nb * stride;
    const double* cn = cos_vals.data() + nb * stride;
    const double* sc = sin_vals.data() + center * stride;
    const double* cc = cos_vals.data() + center * stride;
    for (std::size_t j = 0; j < stride; ++j) {
      out[2 * j] = sn[j] * cc[j] - cn[j] * sc[j];
      out[2 * j + 1] = cn[j] * cc[j] + sn[j] * sc[j];
    }
  }
};

std::size_t centers_for(std::size_t n, double ratio) {
  return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(n))));
}

}  // namespace

void EncoderConfig::validate() const {
  if (d0 <= 0 || d0 % 6 != 0) throw ConfigError("encoder d0 must be a positive multiple of 6");
  if (stages < 1) throw ConfigError("encoder stages must be >= 1");
  if (stages > 16) throw ConfigError("encoder stages must be <= 16");
  if (k_neighbors < 1) throw ConfigError("encoder k_neighbors must be >= 1");
  if (!(fps_ratio > 0.0 && fps_ratio <= 1.0)) throw ConfigError("encoder fps_ratio must be in (0, 1]");
  if (!(alpha > 0.0) || !std::isfinite(alpha)) throw ConfigError("encoder alpha must be positive");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("encoder beta must be positive");
}

std::uint64_t EncoderConfig::hash() const noexcept {
  Fnv1a h;
  h.text("bftt3d-encoder-v1");
  h.value<std::int64_t>(d0);
  h.value(alpha);
  h.value(beta);
  h.value<std::int64_t>(stages);
  h.value<std::int64_t>(k_neighbors);
  h.value(fps_ratio);
  return h.digest();
}

std::vector<Vec3d> to_double_points(const PointCloud& cloud) {
  std::vector<Vec3d> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points()) out.push_back({p[0], p[1], p[2]});
  return out;
}

void channel_embed(const Vec3d& p, int width, double alpha, double beta, std::span<double> out) {
  const int block = width / 3;
  for (int a = 0; a < 3; ++a) {
    for (int k = 0; 2 * k < block; ++k) {
      const double arg = alpha * p[static_cast<std::size_t>(a)] / std::pow(beta, 6.0 * k / width);
      out[static_cast<std::size_t>(a * block + 2 * k)] = std::sin(arg);
      out[static_cast<std::size_t>(a * block + 2 * k + 1)] = std::cos(arg);
    }
  }
}

std::vector<double> channel_embed(const Vec3d& p, const EncoderConfig& cfg) {
  cfg.validate();
  std::vector<double> out(static_cast<std::size_t>(cfg.d0));
  channel_embed(p, cfg.d0, cfg.alpha, cfg.beta, out);
  return out;
}

std::vector<std::size_t> fps(std::span<const Vec3d> points, std::size_t target_count) {
  const std::size_t n = points.size();
  if (target_count < 1 || target_count > n) {
    throw ArgumentError("fps: target_count " + std::to_string(target_count) + " not in [1, " +
                        std::to_string(n) + "]");
  }
  Vec3d c{};
  for (const auto& p : points) {
    for (int a = 0; a < 3; ++a) c[a] += p[a];
  }
  for (auto& v : c) v /= static_cast<double>(n);

  auto better = [&](double d_new, std::size_t i, double d_best, std::size_t best) {
    if (d_new != d_best) return d_new > d_best;
    return coords_before(points[i], i, points[best], best);
  };

  std::size_t first = 0;
  double first_d = squared_distance(points[0], c);
  for (std::size_t i = 1; i < n; ++i) {
    const double d = squared_distance(points[i], c);
    if (better(d, i, first_d, first)) {
      first = i;
      first_d = d;
    }
  }

  std::vector<std::size_t> selected;
  selected.reserve(target_count);
  selected.push_back(first);
  std::vector<double> min_d(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  taken[first] = 1;
  std::size_t last = first;
  while (selected.size() < target_count) {
    std::size_t best = n;
    double best_d = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      min_d[i] = std::min(min_d[i], squared_distance(points[i], points[last]));
      if (best == n || better(min_d[i], i, best_d, best)) {
        best = i;
        best_d = min_d[i];
      }
    }
    taken[best] = 1;
    selected.push_back(best);
    last = best;
  }
  return selected;
}

std::vector<std::size_t> fps(const PointCloud& cloud, std::size_t target_count) {
  const auto pts = to_double_points(cloud);
  return fps(pts, target_count);
}

std::vector<std::vector<std::size_t>> knn_group(std::span<const Vec3d> points,
                                                std::span<const std::size_t> centers,
                                                std::size_t k) {
  const std::size_t n = points.size();
  if (k < 1 || k > n) {
    throw ArgumentError("knn_group: k = " + std::to_string(k) + " not in [1, " + std::to_string(n) + "]");
  }
  std::vector<std::vector<std::size_t>> groups;
  groups.reserve(centers.size());
  std::vector<std::pair<double, std::size_t>> cand(n);
  for (auto c : centers) {
    if (c >= n) throw ArgumentError("knn_group: center index out of range");
    for (std::size_t i = 0; i < n; ++i) cand[i] = {squared_distance(points[i], points[c]), i};
    auto less = [&](const auto& a, const auto& b) {
      if (a.first != b.first) return a.first < b.first;
      return coords_before(points[a.second], a.second, points[b.second], b.second);
    };
    std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(k), cand.end(), less);
    std::vector<std::size_t> g(k);
    for (std::size_t j = 0; j < k; ++j) g[j] = cand[j].second;
    groups.push_back(std::move(g));
  }
  return groups;
}

std::vector<std::vector<std::size_t>> knn_group(const PointCloud& cloud,
                                                std::span<const std::size_t> centers,
                                                std::size_t k) {
  const auto pts = to_double_points(cloud);
  return knn_group(pts, centers, k);
}

StageFeatures embed_points(std::span<const Vec3d> points, const EncoderConfig& cfg) {
  StageFeatures f(static_cast<Eigen::Index>(points.size()), cfg.d0);
  for (std::size_t i = 0; i < points.size(); ++i) {
    channel_embed(points[i], cfg.d0, cfg.alpha, cfg.beta,
                  std::span<double>(f.row(static_cast<Eigen::Index>(i)).data(),
                                    static_cast<std::size_t>(cfg.d0)));
  }
  return f;
}

StageResult stage_aggregate(const StageFeatures& features, std::span<const Vec3d> points,
                            const EncoderConfig& cfg) {
  if (static_cast<std::size_t>(features.rows()) != points.size()) {
    throw ArgumentError("stage_aggregate: features and points disagree in count");
  }
  const auto d_in = static_cast<std::size_t>(features.cols());
  const std::size_t width = 2 * d_in;
  if (width % 6 != 0) throw ArgumentError("stage_aggregate: 2 * D_in must be a multiple of 6");

  StageResult out;
  out.center_indices = fps(points, centers_for(points.size(), cfg.fps_ratio));
  const auto groups = knn_group(points, out.center_indices, static_cast<std::size_t>(cfg.k_neighbors));
  const TrigTable trig(points, static_cast<int>(width), cfg.alpha, cfg.beta);

  out.features.resize(static_cast<Eigen::Index>(out.center_indices.size()),
                      static_cast<Eigen::Index>(width));
  std::vector<double> g(width), w(width), mx(width), sum(width);
  for (std::size_t ci = 0; ci < out.center_indices.size(); ++ci) {
    const std::size_t c = out.center_indices[ci];
    out.centers.push_back(points[c]);
    std::fill(mx.begin(), mx.end(), -std::numeric_limits<double>::infinity());
    std::fill(sum.begin(), sum.end(), 0.0);
    const double* fc = features.row(static_cast<Eigen::Index>(c)).data();
    for (std::size_t nb : groups[ci]) {
      trig.offset_embedding(nb, c, g);
      const double* fn = features.row(static_cast<Eigen::Index>(nb)).data();
      // [f_center | f_neighbor], shifted by and scaled with the offset encoding.
      for (std::size_t j = 0; j < d_in; ++j) {
        w[j] = (fc[j] + g[j]) * g[j];
        w[d_in + j] = (fn[j] + g[d_in + j]) * g[d_in + j];
      }
      for (std::size_t j = 0; j < width; ++j) {
        mx[j] = std::max(mx[j], w[j]);
        sum[j] += w[j];
      }
    }
    const double inv_k = 1.0 / static_cast<double>(groups[ci].size());
    double* dst = out.features.row(static_cast<Eigen::Index>(ci)).data();
    for (std::size_t j = 0; j < width; ++j) dst[j] = mx[j] + sum[j] * inv_k;
  }
  return out;
}

std::vector<std::size_t> stage_sizes(std::size_t n_points, const EncoderConfig& cfg) {
  std::vector<std::size_t> sizes;
  std::size_t n = n_points;
  for (int s = 0; s < cfg.stages; ++s) {
    sizes.push_back(n);
    n = centers_for(n, cfg.fps_ratio);
  }
  return sizes;
}

std::size_t minimum_points(const EncoderConfig& cfg) {
  cfg.validate();
  std::size_t n = 1;
  while (true) {
    const auto sizes = stage_sizes(n, cfg);
    if (std::all_of(sizes.begin(), sizes.end(),
                    [&](std::size_t s) { return s >= static_cast<std::size_t>(cfg.k_neighbors); })) {
      return n;
    }
    ++n;
  }
}

Eigen::VectorXd encode(const PointCloud& cloud, const EncoderConfig& cfg) {
  cfg.validate();
  const auto sizes = stage_sizes(cloud.size(), cfg);
  for (std::size_t s = 0; s < sizes.size(); ++s) {
    if (sizes[s] < static_cast<std::size_t>(cfg.k_neighbors)) {
      throw ArgumentError("encode: stage " + std::to_string(s + 1) + " receives " +
                          std::to_string(sizes[s]) + " points but k_neighbors = " +
                          std::to_string(cfg.k_neighbors) + " (cloud has " +
                          std::to_string(cloud.size()) + " points, need at least " +
                          std::to_string(minimum_points(cfg)) + ")");
    }
  }

  std::vector<Vec3d> points = to_double_points(cloud);
  StageFeatures features = embed_points(points, cfg);
  for (int s = 0; s < cfg.stages; ++s) {
    auto r = stage_aggregate(features, points, cfg);
    points = std::move(r.centers);
    features = std::move(r.features);
  }
  const Eigen::Index n = features.rows();
  Eigen::VectorXd out(features.cols());
  for (Eigen::Index j = 0; j < features.cols(); ++j) {
    double mx = -std::numeric_limits<double>::infinity();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      mx = std::max(mx, features(i, j));
      sum += features(i, j);
    }
    out[j] = mx + sum / static_cast<double>(n);
  }
  return out;
}

}  // namespace bftt3d
