#pragma once

#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "bftt3d/head.hpp"
#include "bftt3d/memory.hpp"
#include "bftt3d/subspace.hpp"

namespace bftt3d {

enum class SubspaceMethod { none, tca };

SubspaceMethod parse_subspace_method(std::string_view name);
std::string_view to_string(SubspaceMethod m) noexcept;

struct SubspaceConfig {
  SubspaceMethod method = SubspaceMethod::tca;
  int m = 150;
  double mu = 1.0;
  KernelSpec kernel;
  int batch = 64;
  // Subtract the prototype-memory mean from prototypes and targets.
  bool center_features = true;
  // L2-normalize (after centering) before building kernels / similarities.
  bool normalize_features = true;

  void validate() const;  // throws ConfigError
};

// Per-sample output of the backpropagation-free branch and the fusion.
struct AdaptedSample {
  Eigen::VectorXd bf_scores;  // phi-activated class scores
  Eigen::VectorXd source_logits;
  FusionResult fusion;
};

struct AdaptationOutput {
  std::vector<AdaptedSample> samples;  // same order as the target rows
  std::vector<std::string> warnings;
};

// Runs the adaptation branch over `targets` in consecutive batches of
// cfg.batch rows: per batch, fit TCA on [memory; batch] (or skip for
// method none), take cosine similarities to the prototypes, activate, and fuse
// with the matching row of `source_logits`.
//
// In the probability fuse space the adaptation scores enter fusion as
// log-scores, so their softmax equals the scores normalized to sum 1.
AdaptationOutput adapt(const PrototypeMemory& memory, const Eigen::MatrixXd& targets,
                       const Eigen::MatrixXd& source_logits, const SubspaceConfig& subspace,
                       const FusionConfig& fusion);

// Fusion of precomputed branch outputs under another fusion config.
FusionResult refuse(const AdaptedSample& sample, const FusionConfig& fusion);

}  // namespace bftt3d
