#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "bftt3d/geometry.hpp"
#include "bftt3d/io.hpp"
#include "bftt3d/rng.hpp"

namespace testing {

// Directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("bftt3d-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline bftt3d::PointCloud random_cloud(std::size_t n, std::uint64_t seed) {
  bftt3d::CounterRng rng(seed, "test-cloud", n);
  std::vector<bftt3d::Point3> pts(n);
  for (auto& p : pts) {
    p = {static_cast<float>(rng.uniform(-1, 1)), static_cast<float>(rng.uniform(-1, 1)),
         static_cast<float>(rng.uniform(-1, 1))};
  }
  return bftt3d::PointCloud(std::move(pts));
}

inline Eigen::MatrixXd random_matrix(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed,
                                     double shift = 0.0) {
  bftt3d::CounterRng rng(seed, "test-matrix", static_cast<std::uint64_t>(rows * 1000 + cols));
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i) {
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = rng.normal() + shift;
  }
  return m;
}

inline std::vector<std::uint8_t> bytes_of(const std::filesystem::path& p) { return bftt3d::wire::read_file(p); }

inline void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  bftt3d::wire::write_file(p, b);
}

// Source ~ N(0, I), target ~ N((5, 0), I) in two dimensions, n rows each.
inline std::pair<Eigen::MatrixXd, Eigen::MatrixXd> shifted_gaussian(Eigen::Index n, std::uint64_t seed) {
  Eigen::MatrixXd s = random_matrix(n, 2, seed);
  Eigen::MatrixXd t = random_matrix(n, 2, seed + 7919);
  t.col(0).array() += 5.0;
  return {s, t};
}

// Squared distance of domain means after scaling the pooled rows to unit
// total variance, so projections of different scale compare fairly.
inline double standardized_mmd(const Eigen::MatrixXd& s, const Eigen::MatrixXd& t) {
  Eigen::MatrixXd x(s.rows() + t.rows(), s.cols());
  x << s, t;
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const double var = (x.rowwise() - mean).squaredNorm() / static_cast<double>(x.rows());
  return (s.colwise().mean() - t.colwise().mean()).squaredNorm() / var;
}

// Random matrix with orthonormal columns.
inline Eigen::MatrixXd random_orthonormal(Eigen::Index rows, Eigen::Index cols, std::uint64_t seed) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(random_matrix(rows, cols, seed));
  return qr.householderQ() * Eigen::MatrixXd::Identity(rows, cols);
}

}  // namespace testing
