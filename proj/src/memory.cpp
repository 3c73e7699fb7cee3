#include "bftt3d/memory.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bftt3d/error.hpp"
#include "bftt3d/hash.hpp"

namespace bftt3d {

PrototypeMemory::PrototypeMemory(FeatureMatrix features, Eigen::MatrixXd labels,
                                 Eigen::MatrixXd class_means, double ratio, std::uint64_t config_hash)
    : features_(std::move(features)),
      labels_(std::move(labels)),
      class_means_(std::move(class_means)),
      ratio_(ratio),
      config_hash_(config_hash) {
  validate();
  label_ids_.resize(static_cast<std::size_t>(labels_.rows()));
  for (Eigen::Index i = 0; i < labels_.rows(); ++i) {
    Eigen::Index c = 0;
    labels_.row(i).maxCoeff(&c);
    label_ids_[static_cast<std::size_t>(i)] = static_cast<int>(c);
  }
}

void PrototypeMemory::validate() const {
  if (features_.rows() == 0 || features_.cols() == 0) throw CorruptionError("memory is empty");
  if (labels_.rows() != features_.rows()) throw CorruptionError("memory label/feature row mismatch");
  if (labels_.cols() == 0) throw CorruptionError("memory has zero classes");
  if (class_means_.rows() != labels_.cols() || class_means_.cols() != features_.cols()) {
    throw CorruptionError("memory class-mean shape mismatch");
  }
  if (!(ratio_ > 0.0 && ratio_ <= 1.0)) throw CorruptionError("memory ratio outside (0, 1]");
  if (!features_.allFinite() || !class_means_.allFinite()) {
    throw CorruptionError("memory contains non-finite values");
  }
  std::vector<std::size_t> per_class(static_cast<std::size_t>(labels_.cols()), 0);
  for (Eigen::Index i = 0; i < labels_.rows(); ++i) {
    double sum = 0.0;
    Eigen::Index hot = -1;
    for (Eigen::Index c = 0; c < labels_.cols(); ++c) {
      const double v = labels_(i, c);
      if (v != 0.0 && v != 1.0) {
        throw CorruptionError("memory label row " + std::to_string(i) + " is not one-hot");
      }
      if (v == 1.0) hot = c;
      sum += v;
    }
    if (sum != 1.0) {
      throw CorruptionError("memory label row " + std::to_string(i) + " sums to " + std::to_string(sum));
    }
    ++per_class[static_cast<std::size_t>(hot)];
  }
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    if (per_class[c] == 0) throw CorruptionError("memory class " + std::to_string(c) + " has no prototypes");
  }
}

std::size_t PrototypeMemory::count_for(int label) const {
  return static_cast<std::size_t>(std::count(label_ids_.begin(), label_ids_.end(), label));
}

std::uint64_t PrototypeMemory::state_hash() const noexcept {
  Fnv1a h;
  h.matrix(features_);
  h.matrix(labels_);
  h.matrix(class_means_);
  h.value(ratio_);
  h.value(config_hash_);
  return h.digest();
}

PrototypeMemory build_memory(const std::vector<FeatureMatrix>& per_class, double ratio,
                             std::uint64_t config_hash) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw ArgumentError("memory ratio must be in (0, 1]");
  if (per_class.empty()) throw ArgumentError("build_memory: no classes");
  const Eigen::Index dim = per_class.front().cols();
  if (dim == 0) throw ArgumentError("build_memory: zero-width features");

  std::vector<std::vector<Eigen::Index>> chosen(per_class.size());
  Eigen::MatrixXd means(static_cast<Eigen::Index>(per_class.size()), dim);
  Eigen::Index total = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    const auto& f = per_class[c];
    if (f.rows() == 0) throw ArgumentError("build_memory: class " + std::to_string(c) + " is empty");
    if (f.cols() != dim) throw ArgumentError("build_memory: inconsistent feature width");
    const Eigen::RowVectorXd mean = f.colwise().mean();
    means.row(static_cast<Eigen::Index>(c)) = mean;

    std::vector<std::pair<double, Eigen::Index>> order(static_cast<std::size_t>(f.rows()));
    for (Eigen::Index i = 0; i < f.rows(); ++i) {
      order[static_cast<std::size_t>(i)] = {(f.row(i) - mean).norm(), i};
    }
    std::sort(order.begin(), order.end());
    const auto keep = static_cast<std::size_t>(
        std::max(1.0, std::ceil(ratio * static_cast<double>(f.rows()) - 1e-9)));
    for (std::size_t j = 0; j < keep; ++j) chosen[c].push_back(order[j].second);
    total += static_cast<Eigen::Index>(keep);
  }

  FeatureMatrix features(total, dim);
  Eigen::MatrixXd labels = Eigen::MatrixXd::Zero(total, static_cast<Eigen::Index>(per_class.size()));
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < per_class.size(); ++c) {
    for (auto i : chosen[c]) {
      features.row(row) = per_class[c].row(i);
      labels(row, static_cast<Eigen::Index>(c)) = 1.0;
      ++row;
    }
  }
  return PrototypeMemory(std::move(features), std::move(labels), std::move(means), ratio, config_hash);
}

std::vector<FeatureMatrix> group_by_label(const FeatureMatrix& features, const std::vector<int>& labels,
                                          int class_count) {
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ArgumentError("group_by_label: feature rows and labels disagree");
  }
  std::vector<std::vector<Eigen::Index>> rows(static_cast<std::size_t>(class_count));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= class_count) throw ArgumentError("group_by_label: label out of range");
    rows[static_cast<std::size_t>(labels[i])].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<FeatureMatrix> out;
  for (const auto& r : rows) {
    FeatureMatrix m(static_cast<Eigen::Index>(r.size()), features.cols());
    for (std::size_t j = 0; j < r.size(); ++j) m.row(static_cast<Eigen::Index>(j)) = features.row(r[j]);
    out.push_back(std::move(m));
  }
  return out;
}

void save_memory(const PrototypeMemory& memory, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out{'M', 'E', 'M', '1'};
  wire::put_u64(out, memory.config_hash());
  wire::put_u32(out, static_cast<std::uint32_t>(memory.size()));
  wire::put_u32(out, static_cast<std::uint32_t>(memory.dim()));
  wire::put_u32(out, static_cast<std::uint32_t>(memory.classes()));
  wire::put_f64(out, memory.ratio());
  const auto& f = memory.features();
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index j = 0; j < f.cols(); ++j) wire::put_f64(out, f(i, j));
  }
  const auto& m = memory.class_means();
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) wire::put_f64(out, m(i, j));
  }
  const auto& l = memory.labels();
  for (Eigen::Index i = 0; i < l.rows(); ++i) {
    for (Eigen::Index j = 0; j < l.cols(); ++j) wire::put_f32(out, static_cast<float>(l(i, j)));
  }
  wire::write_file(path, out);
}

PrototypeMemory load_memory(const std::filesystem::path& path, std::uint64_t expected_config_hash) {
  const std::string what = "memory file '" + path.string() + "'";
  wire::Reader r(wire::read_file(path), what);
  r.expect_magic("MEM1");
  const auto hash = r.u64();
  const auto n = r.u32();
  const auto d = r.u32();
  const auto c = r.u32();
  const double ratio = r.f64();
  if (n == 0 || d == 0 || c == 0) throw FormatError(what + ": zero dimension in header");
  r.require((static_cast<std::size_t>(n) * d + static_cast<std::size_t>(c) * d) * 8 +
            static_cast<std::size_t>(n) * c * 4);
  FeatureMatrix features(n, d);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) features(i, j) = r.f64();
  }
  Eigen::MatrixXd means(c, d);
  for (Eigen::Index i = 0; i < means.rows(); ++i) {
    for (Eigen::Index j = 0; j < means.cols(); ++j) means(i, j) = r.f64();
  }
  Eigen::MatrixXd labels(n, c);
  for (Eigen::Index i = 0; i < labels.rows(); ++i) {
    for (Eigen::Index j = 0; j < labels.cols(); ++j) labels(i, j) = r.f32();
  }
  if (r.remaining() != 0) throw FormatError(what + ": trailing bytes after payload");
  if (expected_config_hash != 0 && hash != expected_config_hash) {
    throw ConfigError(what + ": built with a different encoder configuration");
  }
  return PrototypeMemory(std::move(features), std::move(labels), std::move(means), ratio, hash);
}

}  // namespace bftt3d
