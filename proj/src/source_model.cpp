#include "bftt3d/source_model.hpp"

#include <cmath>
#include <iostream>

#include "bftt3d/error.hpp"
#include "bftt3d/hash.hpp"

namespace bftt3d {

SourceProvider SourceProvider::from_file(LogitMatrix logits) {
  return SourceProvider(Replay{std::move(logits)});
}

SourceProvider SourceProvider::from_centroids(Eigen::MatrixXd centroids, double temperature) {
  if (!(temperature > 0.0) || !std::isfinite(temperature)) {
    throw ArgumentError("centroid temperature must be positive");
  }
  if (centroids.rows() == 0 || centroids.cols() == 0) throw ArgumentError("empty centroid matrix");
  if (!centroids.allFinite()) throw ArgumentError("centroids must be finite");
  for (Eigen::Index c = 0; c < centroids.rows(); ++c) {
    if (centroids.row(c).norm() == 0.0) {
      throw ArgumentError("centroid " + std::to_string(c) + " is the zero vector");
    }
  }
  return SourceProvider(Centroid{std::move(centroids), temperature});
}

std::size_t SourceProvider::classes() const noexcept {
  if (const auto* r = std::get_if<Replay>(&state_)) return r->logits.classes();
  return static_cast<std::size_t>(std::get<Centroid>(state_).centroids.rows());
}

std::size_t SourceProvider::samples() const {
  if (const auto* r = std::get_if<Replay>(&state_)) return r->logits.samples();
  throw ArgumentError("centroid provider has no fixed sample count");
}

const Eigen::MatrixXd* SourceProvider::centroids() const noexcept {
  if (const auto* c = std::get_if<Centroid>(&state_)) return &c->centroids;
  return nullptr;
}

Eigen::VectorXd SourceProvider::logits_for(std::size_t sample_index, const Eigen::VectorXd* feature) const {
  if (const auto* r = std::get_if<Replay>(&state_)) {
    if (sample_index >= r->logits.samples()) {
      throw ArgumentError("source logits: sample index " + std::to_string(sample_index) +
                          " out of range (" + std::to_string(r->logits.samples()) + " rows)");
    }
    const auto row = r->logits.row(static_cast<std::uint32_t>(sample_index));
    Eigen::VectorXd out(static_cast<Eigen::Index>(row.size()));
    for (std::size_t i = 0; i < row.size(); ++i) out[static_cast<Eigen::Index>(i)] = row[i];
    return out;
  }
  const auto& c = std::get<Centroid>(state_);
  if (feature == nullptr) throw ArgumentError("centroid source model needs a feature vector");
  if (feature->size() != c.centroids.cols()) {
    throw ArgumentError("source logits: feature width " + std::to_string(feature->size()) +
                        " != centroid width " + std::to_string(c.centroids.cols()));
  }
  const double fn = feature->norm();
  if (!(fn > 0.0)) throw NumericError("source logits: zero-norm feature");
  Eigen::VectorXd out(c.centroids.rows());
  for (Eigen::Index k = 0; k < c.centroids.rows(); ++k) {
    const double cos = c.centroids.row(k).dot(*feature) / (c.centroids.row(k).norm() * fn);
    out[k] = cos / c.temperature;
  }
  return out;
}

std::uint64_t SourceProvider::state_hash() const noexcept {
  Fnv1a h;
  if (const auto* r = std::get_if<Replay>(&state_)) {
    h.text("replay");
    h.value(r->logits.samples());
    h.value(r->logits.classes());
    for (float v : r->logits.values()) h.value(v);
  } else {
    const auto& c = std::get<Centroid>(state_);
    h.text("centroid");
    h.matrix(c.centroids);
    h.value(c.temperature);
  }
  return h.digest();
}

SourceProvider fit_centroids(const std::vector<FeatureMatrix>& per_class, double temperature) {
  if (per_class.empty()) throw ArgumentError("fit_centroids: no classes");
  const Eigen::Index dim = per_class.front().cols();
  Eigen::MatrixXd centroids(static_cast<Eigen::Index>(per_class.size()), dim);
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c].rows() == 0) throw ArgumentError("fit_centroids: class " + std::to_string(c) + " is empty");
    if (per_class[c].cols() != dim) throw ArgumentError("fit_centroids: inconsistent feature width");
    centroids.row(static_cast<Eigen::Index>(c)) = per_class[c].colwise().mean();
  }
  std::vector<std::string> warnings;
  for (Eigen::Index a = 0; a < centroids.rows(); ++a) {
    for (Eigen::Index b = a + 1; b < centroids.rows(); ++b) {
      if (centroids.row(a) == centroids.row(b)) {
        warnings.push_back("classes " + std::to_string(a) + " and " + std::to_string(b) +
                           " have identical centroids");
        std::clog << "warning: " << warnings.back() << '\n';
      }
    }
  }
  auto provider = SourceProvider::from_centroids(std::move(centroids), temperature);
  provider.warnings_ = std::move(warnings);
  return provider;
}

}  // namespace bftt3d
