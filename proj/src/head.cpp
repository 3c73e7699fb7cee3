#include "bftt3d/head.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "bftt3d/error.hpp"

namespace bftt3d {

namespace {

Eigen::MatrixXd row_normalized(const Eigen::MatrixXd& m, const char* what) {
  Eigen::MatrixXd out = m;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    const double n = m.row(i).norm();
    if (!(n > 0.0) || !std::isfinite(n)) {
      throw NumericError(std::string("similarity: ") + what + " row " + std::to_string(i) +
                         " has zero or non-finite norm");
    }
    out.row(i) /= n;
  }
  return out;
}

}  // namespace

Eigen::MatrixXd similarity(const Eigen::MatrixXd& targets, const Eigen::MatrixXd& prototypes) {
  if (targets.cols() != prototypes.cols()) throw ArgumentError("similarity: width mismatch");
  return row_normalized(targets, "target") * row_normalized(prototypes, "prototype").transpose();
}

Aggregation parse_aggregation(std::string_view name) {
  if (name == "elementwise-mean") return Aggregation::elementwise_mean;
  if (name == "summed") return Aggregation::summed;
  throw ConfigError("unknown aggregation '" + std::string(name) + "'");
}

std::string_view to_string(Aggregation a) noexcept {
  return a == Aggregation::elementwise_mean ? "elementwise-mean" : "summed";
}

Eigen::MatrixXd bf_logits(const Eigen::MatrixXd& sim, const Eigen::MatrixXd& labels, double gamma,
                          Aggregation aggregation) {
  if (sim.cols() != labels.rows()) throw ArgumentError("bf_logits: similarity/label shape mismatch");
  if (aggregation == Aggregation::summed) {
    return (sim * labels).unaryExpr([gamma](double x) { return activation(x, gamma); });
  }
  const Eigen::RowVectorXd counts = labels.colwise().sum();
  Eigen::MatrixXd scaled = labels;
  for (Eigen::Index c = 0; c < labels.cols(); ++c) {
    if (counts[c] > 0.0) scaled.col(c) /= counts[c];
  }
  const Eigen::MatrixXd act = sim.unaryExpr([gamma](double x) { return activation(x, gamma); });
  return act * scaled;
}

Eigen::VectorXd softmax(const Eigen::VectorXd& logits) {
  const double mx = logits.maxCoeff();
  Eigen::VectorXd e = (logits.array() - mx).exp().matrix();
  return e / e.sum();
}

double softmax_entropy(const Eigen::VectorXd& logits) {
  // H = logsumexp(l) - sum p_i l_i, evaluated with the max shift.
  const double mx = logits.maxCoeff();
  const Eigen::ArrayXd shifted = logits.array() - mx;
  const Eigen::ArrayXd e = shifted.exp();
  const double z = e.sum();
  const double h = std::log(z) - (e * shifted).sum() / z;
  return std::clamp(h, 0.0, std::log(static_cast<double>(logits.size())));
}

FuseSpace parse_fuse_space(std::string_view name) {
  if (name == "probability") return FuseSpace::probability;
  if (name == "raw") return FuseSpace::raw;
  throw ConfigError("unknown fuse space '" + std::string(name) + "'");
}

std::string_view to_string(FuseSpace s) noexcept {
  return s == FuseSpace::probability ? "probability" : "raw";
}

void FusionConfig::validate() const {
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw ConfigError("fusion gamma must be positive");
  if (mode == FusionMode::fixed && !(fixed_p >= 0.0 && fixed_p <= 1.0)) {
    throw ConfigError("fixed fusion ratio must be in [0, 1]");
  }
  if (!(entropy_epsilon > 0.0)) throw ConfigError("entropy_epsilon must be positive");
}

FusionResult fuse(const Eigen::VectorXd& l_bf, const Eigen::VectorXd& l_s, const FusionConfig& cfg) {
  if (l_bf.size() != l_s.size()) {
    throw ArgumentError("fuse: class count mismatch (" + std::to_string(l_bf.size()) + " vs " +
                        std::to_string(l_s.size()) + ")");
  }
  if (l_bf.size() == 0) throw ArgumentError("fuse: empty logits");
  if (!l_bf.allFinite() || !l_s.allFinite()) throw ArgumentError("fuse: non-finite logits");

  FusionResult r;
  r.entropy_bf = softmax_entropy(l_bf);
  r.entropy_source = softmax_entropy(l_s);
  if (cfg.mode == FusionMode::fixed) {
    r.p = cfg.fixed_p;
  } else {
    const double total = r.entropy_bf + r.entropy_source;
    const bool tie = std::abs(r.entropy_bf - r.entropy_source) <= kEntropyTieTolerance;
    r.p = total < cfg.entropy_epsilon || tie ? 0.5 : r.entropy_source / total;
  }
  if (cfg.space == FuseSpace::probability) {
    r.logits = r.p * softmax(l_bf) + (1.0 - r.p) * softmax(l_s);
  } else {
    r.logits = r.p * l_bf + (1.0 - r.p) * l_s;
  }
  return r;
}

Eigen::VectorXd scores_to_logits(const Eigen::VectorXd& scores) {
  static constexpr double kFloor = std::numeric_limits<double>::min();
  return scores.unaryExpr([](double s) { return std::log(std::max(s, kFloor)); });
}

Eigen::Index argmax(const Eigen::VectorXd& v) {
  Eigen::Index best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

}  // namespace bftt3d
