#include "bftt3d/subspace.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "bftt3d/error.hpp"

namespace bftt3d {

namespace {

Eigen::MatrixXd squared_distances(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  const Eigen::VectorXd na = a.rowwise().squaredNorm();
  const Eigen::VectorXd nb = b.rowwise().squaredNorm();
  Eigen::MatrixXd d = -2.0 * a * b.transpose();
  d.colwise() += na;
  d.rowwise() += nb.transpose();
  return d.cwiseMax(0.0);
}

Eigen::MatrixXd cross_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelSpec& spec,
                             double bandwidth) {
  if (spec.kind == KernelKind::linear) return a * b.transpose();
  const double scale = -0.5 / (bandwidth * bandwidth);
  return (squared_distances(a, b) * scale).array().exp().matrix();
}

double resolve_bandwidth(const Eigen::MatrixXd& pooled, const KernelSpec& spec) {
  if (spec.kind == KernelKind::linear) return 0.0;
  return spec.rbf_bandwidth ? *spec.rbf_bandwidth : median_heuristic_bandwidth(pooled);
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  Eigen::Index arg = 0;
  v.cwiseAbs().maxCoeff(&arg);
  if (v[arg] < 0.0) v = -v;
}

}  // namespace

void KernelSpec::validate() const {
  if (kind == KernelKind::rbf && rbf_bandwidth && !(*rbf_bandwidth > 0.0 && std::isfinite(*rbf_bandwidth))) {
    throw ConfigError("rbf bandwidth must be positive");
  }
}

KernelKind parse_kernel_kind(std::string_view name) {
  if (name == "linear") return KernelKind::linear;
  if (name == "rbf") return KernelKind::rbf;
  throw ConfigError("unknown kernel '" + std::string(name) + "'");
}

std::string_view to_string(KernelKind kind) noexcept {
  return kind == KernelKind::linear ? "linear" : "rbf";
}

double median_heuristic_bandwidth(const Eigen::MatrixXd& x) {
  const auto d2 = squared_distances(x, x);
  std::vector<double> dist;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    for (Eigen::Index j = i + 1; j < x.rows(); ++j) dist.push_back(std::sqrt(d2(i, j)));
  }
  if (dist.empty()) return 1.0;
  auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
  std::nth_element(dist.begin(), mid, dist.end());
  return *mid > 0.0 ? *mid : 1.0;
}

Eigen::MatrixXd kernel_matrix(const Eigen::MatrixXd& x, const KernelSpec& spec, double bandwidth) {
  Eigen::MatrixXd k = cross_kernel(x, x, spec, bandwidth);
  return 0.5 * (k + k.transpose());
}

double mmd_distance(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, const KernelSpec& spec) {
  if (a.rows() == 0 || b.rows() == 0) throw ArgumentError("mmd_distance: empty sample set");
  if (a.cols() != b.cols()) throw ArgumentError("mmd_distance: dimension mismatch");
  spec.validate();
  if (spec.kind == KernelKind::linear) {
    return (a.colwise().mean() - b.colwise().mean()).squaredNorm();
  }
  Eigen::MatrixXd pooled(a.rows() + b.rows(), a.cols());
  pooled << a, b;
  const double h = resolve_bandwidth(pooled, spec);
  const double v = cross_kernel(a, a, spec, h).mean() + cross_kernel(b, b, spec, h).mean() -
                   2.0 * cross_kernel(a, b, spec, h).mean();
  return std::max(0.0, v);
}

Eigen::MatrixXd mmd_scaling_matrix(Eigen::Index n_s, Eigen::Index n_t) {
  const Eigen::Index n = n_s + n_t;
  Eigen::MatrixXd l(n, n);
  const double ss = 1.0 / (double(n_s) * double(n_s));
  const double tt = 1.0 / (double(n_t) * double(n_t));
  const double st = -1.0 / (double(n_s) * double(n_t));
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      const bool si = i < n_s, sj = j < n_s;
      l(i, j) = (si && sj) ? ss : (!si && !sj) ? tt : st;
    }
  }
  return l;
}

Eigen::MatrixXd centering_matrix(Eigen::Index n) {
  return Eigen::MatrixXd::Identity(n, n) - Eigen::MatrixXd::Constant(n, n, 1.0 / double(n));
}

ProjectionState fit_tca(const Eigen::MatrixXd& source, const Eigen::MatrixXd& target, Eigen::Index m,
                        double mu, const KernelSpec& kernel) {
  if (source.rows() < 1 || target.rows() < 1) throw ArgumentError("fit_tca: both domains need samples");
  if (source.cols() != target.cols()) throw ArgumentError("fit_tca: feature width mismatch");
  if (!(mu > 0.0) || !std::isfinite(mu)) throw ArgumentError("fit_tca: mu must be positive");
  if (m < 1) throw ArgumentError("fit_tca: m must be >= 1");
  kernel.validate();
  if (!source.allFinite() || !target.allFinite()) throw NumericError("fit_tca: non-finite features");

  ProjectionState st;
  st.n_s = source.rows();
  st.n_t = target.rows();
  st.mu = mu;
  st.requested_m = m;
  const Eigen::Index n = st.n_s + st.n_t;

  Eigen::MatrixXd x(n, source.cols());
  x << source, target;
  st.bandwidth = resolve_bandwidth(x, kernel);
  st.K = kernel_matrix(x, kernel, st.bandwidth);
  if (!st.K.allFinite()) throw NumericError("fit_tca: kernel matrix is not finite");
  st.L = mmd_scaling_matrix(st.n_s, st.n_t);
  st.H = centering_matrix(n);

  // L = e e^T, so KLK + mu I = mu I + u u^T with u = K e, whose inverse square
  // root is mu^-1/2 (I - c u u^T / |u|^2), c = 1 - sqrt(mu / (mu + |u|^2)).
  Eigen::VectorXd e(n);
  e.head(st.n_s).setConstant(1.0 / double(st.n_s));
  e.tail(st.n_t).setConstant(-1.0 / double(st.n_t));
  const Eigen::VectorXd u = st.K * e;
  const double u2 = u.squaredNorm();
  Eigen::MatrixXd b_inv_sqrt = Eigen::MatrixXd::Identity(n, n);
  if (u2 > 0.0) {
    const double c = 1.0 - std::sqrt(mu / (mu + u2));
    b_inv_sqrt -= (c / u2) * (u * u.transpose());
  }
  b_inv_sqrt /= std::sqrt(mu);

  const Eigen::MatrixXd hk = st.H * st.K;
  Eigen::MatrixXd khk = hk.transpose() * hk;  // K H K with H = H^T H
  khk = 0.5 * (khk + khk.transpose());
  Eigen::MatrixXd c_mat = b_inv_sqrt * khk * b_inv_sqrt;
  c_mat = 0.5 * (c_mat + c_mat.transpose());

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(c_mat);
  if (solver.info() != Eigen::Success) throw NumericError("fit_tca: eigensolver failed");
  const Eigen::VectorXd& evals = solver.eigenvalues();  // ascending
  if (!evals.allFinite()) throw NumericError("fit_tca: non-finite eigenvalues");

  const double top = std::max(0.0, evals[n - 1]);
  const double tol = std::max(top * 1e-9, 1e-300);
  Eigen::Index positive = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (evals[i] > tol) ++positive;
  }
  Eigen::Index keep = std::min(m, n - 1);
  if (keep < m) {
    st.warnings.push_back("m clamped from " + std::to_string(m) + " to n_s + n_t - 1 = " +
                          std::to_string(keep));
  }
  if (positive < keep) {
    st.warnings.push_back("m reduced from " + std::to_string(keep) + " to effective rank " +
                          std::to_string(positive));
    keep = positive;
  }
  if (keep < 1) throw NumericError("fit_tca: K H K has no positive spectrum (degenerate input)");

  st.W.resize(n, keep);
  st.eigenvalues.resize(keep);
  for (Eigen::Index j = 0; j < keep; ++j) {
    const Eigen::Index src = n - 1 - j;
    st.eigenvalues[j] = evals[src];
    st.W.col(j) = b_inv_sqrt * solver.eigenvectors().col(src);
  }

  // Enforce W^T KHK W = I: W <- W G^-1/2 with G = W^T KHK W.
  Eigen::MatrixXd g = st.W.transpose() * khk * st.W;
  g = 0.5 * (g + g.transpose());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> gs(g);
  if (gs.info() != Eigen::Success || gs.eigenvalues().minCoeff() <= 0.0) {
    throw NumericError("fit_tca: projection constraint matrix is not positive definite");
  }
  st.W = st.W * gs.operatorInverseSqrt();
  for (Eigen::Index j = 0; j < keep; ++j) fix_sign(st.W.col(j));
  if (!st.W.allFinite()) throw NumericError("fit_tca: non-finite projection");
  return st;
}

ProjectedFeatures project(const ProjectionState& state) {
  const Eigen::MatrixXd p = state.W.transpose() * state.K;  // m x n
  ProjectedFeatures out;
  out.source = p.leftCols(state.n_s).transpose();
  out.target = p.rightCols(state.n_t).transpose();
  return out;
}

}  // namespace bftt3d
