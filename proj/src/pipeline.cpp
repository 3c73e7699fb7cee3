#include "bftt3d/pipeline.hpp"

#include <algorithm>
#include <string>

#include "bftt3d/error.hpp"

namespace bftt3d {

namespace {

Eigen::MatrixXd preprocess(const Eigen::MatrixXd& m, const Eigen::RowVectorXd* center, bool normalize,
                           const char* what) {
  Eigen::MatrixXd out = m;
  if (center) out.rowwise() -= *center;
  if (!normalize) return out;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double n = out.row(i).norm();
    if (!(n > 0.0)) {
      throw NumericError(std::string("adapt: ") + what + " row " + std::to_string(i) + " has zero norm");
    }
    out.row(i) /= n;
  }
  return out;
}

}  // namespace

SubspaceMethod parse_subspace_method(std::string_view name) {
  if (name == "none") return SubspaceMethod::none;
  if (name == "tca") return SubspaceMethod::tca;
  throw ConfigError("unknown subspace method '" + std::string(name) + "'");
}

std::string_view to_string(SubspaceMethod m) noexcept { return m == SubspaceMethod::none ? "none" : "tca"; }

void SubspaceConfig::validate() const {
  if (m < 1) throw ConfigError("subspace m must be >= 1");
  if (!(mu > 0.0)) throw ConfigError("subspace mu must be positive");
  if (batch < 1) throw ConfigError("subspace batch must be >= 1");
  kernel.validate();
}

FusionResult refuse(const AdaptedSample& sample, const FusionConfig& fusion) {
  const Eigen::VectorXd bf =
      fusion.space == FuseSpace::probability ? scores_to_logits(sample.bf_scores) : sample.bf_scores;
  return fuse(bf, sample.source_logits, fusion);
}

AdaptationOutput adapt(const PrototypeMemory& memory, const Eigen::MatrixXd& targets,
                       const Eigen::MatrixXd& source_logits, const SubspaceConfig& subspace,
                       const FusionConfig& fusion) {
  subspace.validate();
  fusion.validate();
  if (targets.cols() != static_cast<Eigen::Index>(memory.dim())) {
    throw ArgumentError("adapt: target width " + std::to_string(targets.cols()) + " != memory width " +
                        std::to_string(memory.dim()));
  }
  if (source_logits.rows() != targets.rows() ||
      source_logits.cols() != static_cast<Eigen::Index>(memory.classes())) {
    throw ArgumentError("adapt: source logits must be n_targets x n_classes");
  }

  AdaptationOutput out;
  out.samples.resize(static_cast<std::size_t>(targets.rows()));
  const Eigen::RowVectorXd memory_mean = memory.features().colwise().mean();
  const Eigen::RowVectorXd* center = subspace.center_features ? &memory_mean : nullptr;
  const Eigen::MatrixXd protos = preprocess(memory.features(), center, subspace.normalize_features, "prototype");
  const Eigen::MatrixXd all_targets = preprocess(targets, center, subspace.normalize_features, "target");

  for (Eigen::Index start = 0; start < targets.rows(); start += subspace.batch) {
    const Eigen::Index len = std::min<Eigen::Index>(subspace.batch, targets.rows() - start);
    const Eigen::MatrixXd batch = all_targets.middleRows(start, len);
    Eigen::MatrixXd sim;
    if (subspace.method == SubspaceMethod::tca) {
      const auto state = fit_tca(protos, batch, subspace.m, subspace.mu, subspace.kernel);
      for (const auto& w : state.warnings) {
        if (std::find(out.warnings.begin(), out.warnings.end(), w) == out.warnings.end()) {
          out.warnings.push_back(w);
        }
      }
      const auto projected = project(state);
      sim = similarity(projected.target, projected.source);
    } else {
      sim = similarity(batch, protos);
    }
    const Eigen::MatrixXd scores = bf_logits(sim, memory.labels(), fusion.gamma, fusion.aggregation);
    for (Eigen::Index r = 0; r < len; ++r) {
      auto& s = out.samples[static_cast<std::size_t>(start + r)];
      s.bf_scores = scores.row(r).transpose();
      s.source_logits = source_logits.row(start + r).transpose();
      s.fusion = refuse(s, fusion);
    }
  }
  return out;
}

}  // namespace bftt3d
