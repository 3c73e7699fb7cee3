#pragma once

#include <cmath>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bftt3d {

// Cosine similarity of every target row against every prototype row
// (n_t x n_s). Throws NumericError naming the first zero-norm row.
Eigen::MatrixXd similarity(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& prototypes);

// phi(x) = exp(-gamma (1 - x))
inline double activation(double x, double gamma) { return std::exp(-gamma * (1.0 - x)); }

enum class Aggregation {
  // phi applied to each similarity, then averaged per class.
  elementwise_mean,
  // phi applied to the summed similarities J * L_m.
  summed,
};

Aggregation parse_aggregation(std::string_view name);
std::string_view to_string(Aggregation a) noexcept;

// Adaptation-branch scores (n_t x C) from similarities and the one-hot
// prototype label matrix (n_s x C).
Eigen::MatrixXd bf_logits(const Eigen::MatrixXd& sim, const Eigen::MatrixXd& labels, double gamma,
                          Aggregation aggregation = Aggregation::elementwise_mean);

Eigen::VectorXd softmax(const Eigen::VectorXd& logits);

// Shannon entropy (nats) of softmax(logits), in [0, ln C].
double softmax_entropy(const Eigen::VectorXd& logits);

enum class FusionMode { adaptive, fixed };
enum class FuseSpace {
  // Both branches softmax-normalized, mixed as probabilities.
  probability,
  // Branch vectors mixed as given; weights still from softmax entropies.
  raw,
};

FuseSpace parse_fuse_space(std::string_view name);
std::string_view to_string(FuseSpace s) noexcept;

struct FusionConfig {
  double gamma = 100.0;
  FusionMode mode = FusionMode::adaptive;
  double fixed_p = 0.5;
  double entropy_epsilon = 1e-8;
  FuseSpace space = FuseSpace::probability;
  Aggregation aggregation = Aggregation::elementwise_mean;

  void validate() const;  // throws ConfigError
};

struct FusionResult {
  Eigen::VectorXd logits;
  double p = 0.5;
  double entropy_bf = 0.0;
  double entropy_source = 0.0;
};

// Entropies closer than this count as equal and give p = 0.5 exactly.
inline constexpr double kEntropyTieTolerance = 1e-12;

// p = E(l_s) / (E(l_s) + E(l_bf)), or 0.5 when both entropies sum below
// entropy_epsilon or tie, or cfg.fixed_p in fixed mode. Output = p a + (1 - p) b on
// the chosen space. Throws ArgumentError on a class-count mismatch.
FusionResult fuse(const Eigen::VectorXd& l_bf, const Eigen::VectorXd& l_s, const FusionConfig& cfg);

// Maps adaptation-branch scores (positive phi values) to logits whose softmax
// is the scores' sum-normalization: elementwise log, floored to stay finite.
Eigen::VectorXd scores_to_logits(const Eigen::VectorXd& scores);

Eigen::Index argmax(const Eigen::VectorXd& v);

}  // namespace bftt3d
