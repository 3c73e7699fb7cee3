#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace bftt3d {

enum class KernelKind { linear, rbf };

struct KernelSpec {
  KernelKind kind = KernelKind::linear;
  // RBF only: k(a, b) = exp(-|a - b|^2 / (2 h^2)). Unset means the median
  // heuristic over the pooled pairwise distances.
  std::optional<double> rbf_bandwidth;

  void validate() const;  // throws ConfigError
};

KernelKind parse_kernel_kind(std::string_view name);
std::string_view to_string(KernelKind kind) noexcept;

// Rows of `x` are samples.
Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelSpec& spec, double bandwidth);
double median_heuristic_bandwidth(const Eigen::MatrixXd& x);

// Biased MMD^2 estimate ||mean phi(A) - mean phi(B)||^2. For the linear kernel
// this is the squared distance of the sample means. Throws ArgumentError on
// empty sets or mismatched widths.
double mmd_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelSpec& spec = {});

// MMD scaling matrix: 1/n_s^2 on source-source, 1/n_t^2 on target-target,
// -1/(n_s n_t) across.
Eigen::MatrixXd mmd_scaling_matrix(Eigen::Index n_s, Eigen::Index n_t);
// I - 11^T / n.
Eigen::MatrixXd centering_matrix(Eigen::Index n);

// Transfer component analysis fitted on stacked [source; target] rows.
struct ProjectionState {
  Eigen::MatrixXd K;        // (n_s+n_t)^2 kernel
  Eigen::MatrixXd L;        // MMD scaling
  Eigen::MatrixXd H;        // centering
  Eigen::MatrixXd W;        // (n_s+n_t) x m, W^T K H K W = I
  Eigen::VectorXd eigenvalues;  // generalized eigenvalues of the kept columns, descending
  double mu = 1.0;
  Eigen::Index n_s = 0;
  Eigen::Index n_t = 0;
  Eigen::Index requested_m = 0;
  double bandwidth = 0.0;  // RBF bandwidth actually used (0 for linear)
  std::vector<std::string> warnings;

  Eigen::Index m() const noexcept { return W.cols(); }
};

// Solves KHK w = lambda (KLK + mu I) w and keeps the m largest lambda, i.e. the
// m dominant eigenvectors of (KLK + mu I)^-1 KHK. Each column is scaled so that
// W^T KHK W = I and its largest-magnitude entry is positive. m is clamped to
// n_s + n_t - 1 and then to the number of strictly positive eigenvalues, with a
// warning recorded in `warnings`. Throws NumericError on non-finite input or
// solver failure, ArgumentError on invalid sizes or mu <= 0.
ProjectionState fit_tca(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target, Eigen::Index m,
                        double mu, const KernelSpec& kernel = {});

struct ProjectedFeatures {
  Eigen::MatrixXd source;  // n_s x m
  Eigen::MatrixXd target;  // n_t x m
};

// Columns of W^T K split by domain.
ProjectedFeatures project(const ProjectionState& state);

}  // namespace bftt3d
