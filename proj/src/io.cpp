#include "bftt3d/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <nlohmann/json.hpp>

#include "bftt3d/error.hpp"

namespace bftt3d {

namespace wire {

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f32(std::vector<std::uint8_t>& out, float v) { put_u32(out, std::bit_cast<std::uint32_t>(v)); }

void put_f64(std::vector<std::uint8_t>& out, double v) { put_u64(out, std::bit_cast<std::uint64_t>(v)); }

Reader::Reader(std::vector<std::uint8_t> bytes, std::string what)
    : bytes_(std::move(bytes)), what_(std::move(what)) {}

void Reader::require(std::size_t n) const {
  if (remaining() < n) {
    throw TruncationError(what_ + ": truncated (needed " + std::to_string(n) + " bytes at offset " +
                          std::to_string(pos_) + ", have " + std::to_string(remaining()) + ")");
  }
}

void Reader::expect_magic(const char (&magic)[5]) {
  if (remaining() < 4) throw FormatError(what_ + ": file too short for magic");
  if (std::memcmp(bytes_.data() + pos_, magic, 4) != 0) {
    throw FormatError(what_ + ": bad magic, expected '" + std::string(magic) + "'");
  }
  pos_ += 4;
}

std::uint32_t Reader::u32() {
  require(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 4;
  return v;
}

std::uint64_t Reader::u64() {
  require(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(bytes_[pos_ + i]) << (8 * i);
  pos_ += 8;
  return v;
}

float Reader::f32() { return std::bit_cast<float>(u32()); }

double Reader::f64() { return std::bit_cast<double>(u64()); }

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open '" + path.string() + "'");
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw FormatError("cannot open '" + path.string() + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError("write failed for '" + path.string() + "'");
}

}  // namespace wire

PointCloud read_cloud(const std::filesystem::path& path) {
  wire::Reader r(wire::read_file(path), "cloud file '" + path.string() + "'");
  r.expect_magic("PCB1");
  const auto n = r.u32();
  const auto dims = r.u32();
  if (dims != 3) throw FormatError("cloud file '" + path.string() + "': dimension field must be 3");
  if (n == 0) throw FormatError("cloud file '" + path.string() + "': N = 0");
  r.require(static_cast<std::size_t>(n) * 12);
  if (r.remaining() != static_cast<std::size_t>(n) * 12) {
    throw FormatError("cloud file '" + path.string() + "': trailing bytes after payload");
  }
  std::vector<Point3> pts(n);
  for (auto& p : pts) {
    p[0] = r.f32();
    p[1] = r.f32();
    p[2] = r.f32();
  }
  return PointCloud(std::move(pts));
}

void write_cloud(const PointCloud& cloud, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out{'P', 'C', 'B', '1'};
  out.reserve(12 + cloud.size() * 12);
  wire::put_u32(out, static_cast<std::uint32_t>(cloud.size()));
  wire::put_u32(out, 3);
  for (const auto& p : cloud.points()) {
    for (float v : p) wire::put_f32(out, v);
  }
  wire::write_file(path, out);
}

LogitMatrix::LogitMatrix(std::uint32_t n_samples, std::uint32_t n_classes, std::vector<float> values)
    : n_samples_(n_samples), n_classes_(n_classes), values_(std::move(values)) {
  if (n_classes_ == 0) throw FormatError("logit matrix needs n_classes >= 1");
  if (values_.size() != static_cast<std::size_t>(n_samples_) * n_classes_) {
    throw FormatError("logit matrix payload does not match n_samples x n_classes");
  }
  for (float v : values_) {
    if (!std::isfinite(v)) throw FormatError("logit matrix contains a non-finite entry");
  }
}

std::span<const float> LogitMatrix::row(std::uint32_t i) const {
  if (i >= n_samples_) {
    throw ArgumentError("logit row " + std::to_string(i) + " out of range (n_samples = " +
                        std::to_string(n_samples_) + ")");
  }
  return std::span<const float>(values_).subspan(static_cast<std::size_t>(i) * n_classes_, n_classes_);
}

std::vector<LogitRecord> LogitMatrix::records() const {
  std::vector<LogitRecord> out;
  out.reserve(n_samples_);
  for (std::uint32_t i = 0; i < n_samples_; ++i) {
    auto r = row(i);
    out.push_back({std::vector<float>(r.begin(), r.end()), i});
  }
  return out;
}

LogitMatrix read_logits(const std::filesystem::path& path) {
  const std::string what = "logit file '" + path.string() + "'";
  wire::Reader r(wire::read_file(path), what);
  r.expect_magic("LGT1");
  const auto n = r.u32();
  const auto c = r.u32();
  if (c == 0) throw FormatError(what + ": n_classes = 0");
  const std::size_t count = static_cast<std::size_t>(n) * c;
  r.require(count * 4);
  if (r.remaining() != count * 4) throw FormatError(what + ": trailing bytes after payload");
  std::vector<float> values(count);
  for (auto& v : values) v = r.f32();
  return LogitMatrix(n, c, std::move(values));
}

void write_logits(const LogitMatrix& logits, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out{'L', 'G', 'T', '1'};
  wire::put_u32(out, logits.samples());
  wire::put_u32(out, logits.classes());
  for (float v : logits.values()) wire::put_f32(out, v);
  wire::write_file(path, out);
}

void write_logits(std::span<const LogitRecord> records, const std::filesystem::path& path) {
  if (records.empty()) throw FormatError("cannot infer n_classes from zero records");
  const auto c = static_cast<std::uint32_t>(records.front().logits.size());
  std::vector<float> values;
  values.reserve(records.size() * c);
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].logits.size() != c) throw FormatError("logit records disagree on n_classes");
    if (records[i].sample_index != i) throw FormatError("logit records are not in sample order");
    values.insert(values.end(), records[i].logits.begin(), records[i].logits.end());
  }
  write_logits(LogitMatrix(static_cast<std::uint32_t>(records.size()), c, std::move(values)), path);
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  const std::string what = "feature file '" + path.string() + "'";
  wire::Reader r(wire::read_file(path), what);
  r.expect_magic("FTR1");
  const auto n = r.u32();
  const auto d = r.u32();
  if (d == 0) throw FormatError(what + ": D = 0");
  r.require(static_cast<std::size_t>(n) * d * 4);
  if (r.remaining() != static_cast<std::size_t>(n) * d * 4) throw FormatError(what + ": trailing bytes after payload");
  FeatureMatrix f(n, d);
  for (Eigen::Index i = 0; i < f.rows(); ++i) {
    for (Eigen::Index j = 0; j < f.cols(); ++j) f(i, j) = r.f32();
  }
  return f;
}

void write_features(const FeatureMatrix& features, const std::filesystem::path& path) {
  std::vector<std::uint8_t> out{'F', 'T', 'R', '1'};
  wire::put_u32(out, static_cast<std::uint32_t>(features.rows()));
  wire::put_u32(out, static_cast<std::uint32_t>(features.cols()));
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    for (Eigen::Index j = 0; j < features.cols(); ++j) {
      wire::put_f32(out, static_cast<float>(features(i, j)));
    }
  }
  wire::write_file(path, out);
}

LabeledDataset read_manifest(const std::filesystem::path& path, SplitTag split) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest '" + path.string() + "'");
  LabeledDataset ds;
  ds.split = split;
  const auto base = path.parent_path();
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(where + ": " + e.what());
    }
    if (!j.is_object() || !j.contains("path") || !j["path"].is_string() || !j.contains("label") ||
        !j["label"].is_number_integer()) {
      throw FormatError(where + ": expected {\"path\": string, \"label\": int}");
    }
    ManifestEntry e;
    e.path = j["path"].get<std::string>();
    if (e.path.is_relative()) e.path = base / e.path;
    e.label = j["label"].get<int>();
    if (e.label < 0) throw FormatError(where + ": negative label");
    ds.class_count = std::max(ds.class_count, e.label + 1);
    ds.entries.push_back(std::move(e));
  }
  return ds;
}

void write_manifest(const LabeledDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw FormatError("cannot open manifest '" + path.string() + "' for writing");
  const auto base = path.parent_path();
  for (const auto& e : dataset.entries) {
    auto p = e.path;
    std::error_code ec;
    auto rel = std::filesystem::relative(p, base.empty() ? std::filesystem::path(".") : base, ec);
    if (!ec && !rel.empty()) p = rel;
    nlohmann::json j = {{"path", p.generic_string()}, {"label", e.label}};
    out << j.dump() << '\n';
  }
}

}  // namespace bftt3d
