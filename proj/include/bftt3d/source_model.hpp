#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "bftt3d/io.hpp"

namespace bftt3d {

// Frozen source classifier. Either replays logits exported by an external
// model (LGT1) or scores features against clean-source class centroids.
class SourceProvider {
 public:
  struct Replay {
    LogitMatrix logits;
  };
  struct Centroid {
    Eigen::MatrixXd centroids;  // C x D
    double temperature = 0.04;
  };

  static SourceProvider from_file(LogitMatrix logits);
  static SourceProvider from_centroids(Eigen::MatrixXd centroids, double temperature);

  bool is_replay() const noexcept { return std::holds_alternative<Replay>(state_); }
  std::size_t classes() const noexcept;
  // Replay providers only.
  std::size_t samples() const;
  const Eigen::MatrixXd* centroids() const noexcept;

  // Replay: stored row `sample_index`, verbatim. Centroid: cos(feature,
  // centroid_c) / temperature per class. Throws ArgumentError for a missing
  // or out-of-range index, a missing feature or a width mismatch.
  Eigen::VectorXd logits_for(std::size_t sample_index, const Eigen::VectorXd* feature) const;

  const std::vector<std::string>& warnings() const noexcept { return warnings_; }
  std::uint64_t state_hash() const noexcept;

 private:
  explicit SourceProvider(std::variant<Replay, Centroid> state) : state_(std::move(state)) {}

  std::variant<Replay, Centroid> state_;
  std::vector<std::string> warnings_;

  friend SourceProvider fit_centroids(const std::vector<FeatureMatrix>&, double);
};

// Centroid provider from per-class clean-source features. Throws
// ArgumentError on an empty class; identical centroids produce a warning.
SourceProvider fit_centroids(const std::vector<FeatureMatrix>& per_class, double temperature = 0.04);

}  // namespace bftt3d
