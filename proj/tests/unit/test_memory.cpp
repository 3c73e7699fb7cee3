#include <cstring>

#include <doctest.h>

#include "bftt3d/error.hpp"
#include "bftt3d/memory.hpp"
#include "support.hpp"

using namespace bftt3d;

namespace {

FeatureMatrix column(std::initializer_list<double> values) {
  FeatureMatrix m(static_cast<Eigen::Index>(values.size()), 1);
  Eigen::Index i = 0;
  for (double v : values) m(i++, 0) = v;
  return m;
}

std::vector<FeatureMatrix> two_classes(Eigen::Index rows, std::uint64_t seed) {
  return {testing::random_matrix(rows, 6, seed), testing::random_matrix(rows, 6, seed + 1, 3.0)};
}

}  // namespace

TEST_CASE("one-dimensional memory keeps the points nearest the mean") {
  const auto mem = build_memory({column({0, 1, 2, 3})}, 0.5);
  REQUIRE(mem.size() == 2);
  // Mean 1.5; 1 and 2 tie at distance 0.5 and keep their original order.
  CHECK(mem.features()(0, 0) == 1.0);
  CHECK(mem.features()(1, 0) == 2.0);
  CHECK(mem.class_means()(0, 0) == 1.5);
}

TEST_CASE("memory counts round up per class") {
  const auto data = two_classes(100, 1);
  CHECK(build_memory(data, 0.25).size() == 50);
  CHECK(build_memory(data, 0.01).size() == 2);
  CHECK(build_memory(data, 1.0).size() == 200);
  const auto mem = build_memory({testing::random_matrix(7, 3, 2), testing::random_matrix(3, 3, 3)}, 0.5);
  CHECK(mem.count_for(0) == 4);
  CHECK(mem.count_for(1) == 2);
}

TEST_CASE("selected prototypes are nearer the class mean than every rejected feature") {
  const auto data = two_classes(60, 5);
  const auto mem = build_memory(data, 0.3);
  Eigen::Index row = 0;
  for (std::size_t c = 0; c < data.size(); ++c) {
    const Eigen::RowVectorXd mean = data[c].colwise().mean();
    CHECK((mem.class_means().row(static_cast<Eigen::Index>(c)) - mean).norm() < 1e-12);
    const auto kept = static_cast<Eigen::Index>(mem.count_for(static_cast<int>(c)));
    double worst_kept = 0.0;
    for (Eigen::Index i = 0; i < kept; ++i, ++row) {
      CHECK(mem.labels()(row, static_cast<Eigen::Index>(c)) == 1.0);
      worst_kept = std::max(worst_kept, (mem.features().row(row) - mean).norm());
    }
    int outside = 0;
    for (Eigen::Index i = 0; i < data[c].rows(); ++i) {
      const double d = (data[c].row(i) - mean).norm();
      if (d > worst_kept + 1e-12) ++outside;
    }
    CHECK(outside == data[c].rows() - kept);
  }
}

TEST_CASE("build_memory argument errors") {
  const auto data = two_classes(10, 1);
  CHECK_THROWS_AS(build_memory(data, 0.0), ArgumentError);
  CHECK_THROWS_AS(build_memory(data, 1.5), ArgumentError);
  CHECK_THROWS_AS(build_memory({data[0], FeatureMatrix(0, 6)}, 0.5), ArgumentError);
  CHECK_THROWS_AS(build_memory({data[0], testing::random_matrix(4, 5, 1)}, 0.5), ArgumentError);
}

TEST_CASE("group_by_label splits rows") {
  const FeatureMatrix f = testing::random_matrix(5, 2, 4);
  const auto g = group_by_label(f, {1, 0, 1, 2, 0}, 3);
  REQUIRE(g.size() == 3);
  CHECK(g[0].rows() == 2);
  CHECK(g[1].row(1) == f.row(2));
  CHECK_THROWS_AS(group_by_label(f, {0, 1, 2, 3, 0}, 3), ArgumentError);
}

TEST_CASE("memory save and load is bit exact") {
  testing::TempDir dir;
  const auto mem = build_memory(two_classes(20, 8), 0.5, 1234);
  save_memory(mem, dir / "m.mem");
  const auto back = load_memory(dir / "m.mem", 1234);
  CHECK(back.features() == mem.features());
  CHECK(back.labels() == mem.labels());
  CHECK(back.class_means() == mem.class_means());
  CHECK(back.ratio() == mem.ratio());
  CHECK(back.state_hash() == mem.state_hash());
  CHECK_THROWS_AS(load_memory(dir / "m.mem", 99), ConfigError);
  CHECK_NOTHROW(load_memory(dir / "m.mem"));
}

TEST_CASE("memory load error paths") {
  testing::TempDir dir;
  const auto mem = build_memory(two_classes(20, 8), 0.5, 1);
  save_memory(mem, dir / "m.mem");
  auto bytes = testing::bytes_of(dir / "m.mem");

  // Header is magic, u64 hash, three u32, f64 ratio; labels follow the f64 blocks.
  const std::size_t header = 4 + 8 + 12 + 8;
  const std::size_t labels_at = header + (mem.size() * mem.dim() + mem.classes() * mem.dim()) * 8;
  auto tampered = bytes;
  const float half = 0.5f;
  std::memcpy(tampered.data() + labels_at, &half, 4);
  testing::write_bytes(dir / "t.mem", tampered);
  CHECK_THROWS_AS(load_memory(dir / "t.mem"), CorruptionError);

  testing::write_bytes(dir / "e.mem", {});
  CHECK_THROWS_AS(load_memory(dir / "e.mem"), FormatError);

  auto cut = bytes;
  cut.resize(cut.size() - 3);
  testing::write_bytes(dir / "c.mem", cut);
  CHECK_THROWS_AS(load_memory(dir / "c.mem"), TruncationError);

  auto extra = bytes;
  extra.push_back(1);
  testing::write_bytes(dir / "x.mem", extra);
  CHECK_THROWS_AS(load_memory(dir / "x.mem"), FormatError);
}

TEST_CASE("state_hash tracks content") {
  const auto data = two_classes(20, 3);
  const auto a = build_memory(data, 0.5);
  CHECK(a.state_hash() == build_memory(data, 0.5).state_hash());
  CHECK(a.state_hash() != build_memory(data, 0.6).state_hash());
  auto moved = data;
  moved[0](0, 0) += 1e-9;
  CHECK(a.state_hash() != build_memory(moved, 0.5).state_hash());
}
