#include <cmath>
#include <fstream>

#include <doctest.h>

#include "bftt3d/error.hpp"
#include "bftt3d/geometry.hpp"
#include "bftt3d/io.hpp"
#include "support.hpp"

using namespace bftt3d;

TEST_CASE("point cloud rejects empty and non-finite input") {
  CHECK_THROWS_AS(PointCloud({}), ArgumentError);
  CHECK_THROWS_AS(PointCloud({{0.f, NAN, 0.f}}), ArgumentError);
  CHECK_THROWS_AS(PointCloud({{INFINITY, 0.f, 0.f}}), ArgumentError);
  CHECK(PointCloud({{1.f, 2.f, 3.f}}).size() == 1);
}

TEST_CASE("normalize_unit_sphere centers and scales") {
  const auto cloud = normalize_unit_sphere(testing::random_cloud(300, 1));
  const auto c = centroid(cloud);
  for (double v : c) CHECK(std::abs(v) < 1e-6);
  CHECK(max_norm(cloud) == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("normalize_unit_sphere is idempotent") {
  const auto once = normalize_unit_sphere(testing::random_cloud(200, 2));
  const auto twice = normalize_unit_sphere(once);
  for (std::size_t i = 0; i < once.size(); ++i) {
    for (int a = 0; a < 3; ++a) CHECK(std::abs(once[i][a] - twice[i][a]) < 1e-7);
  }
}

TEST_CASE("generate_shape sphere is normalized and deterministic") {
  const auto a = generate_shape(ShapeKind::sphere, 1024, 7);
  const auto b = generate_shape(ShapeKind::sphere, 1024, 7);
  CHECK(a.size() == 1024);
  CHECK(max_norm(a) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(a == b);
  CHECK_FALSE(a == generate_shape(ShapeKind::sphere, 1024, 8));
}

TEST_CASE("generate_shape cube points lie on the six faces") {
  const auto cloud = generate_shape(ShapeKind::cube, 512, 3);
  // Oracle: the faces of an axis-aligned cube are the per-axis extrema of
  // its surface sample, whatever the normalization did.
  std::array<double, 3> lo{1e9, 1e9, 1e9}, hi{-1e9, -1e9, -1e9};
  for (const auto& p : cloud.points()) {
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min<double>(lo[a], p[a]);
      hi[a] = std::max<double>(hi[a], p[a]);
    }
  }
  // Cube: equal extents on all axes.
  CHECK(hi[0] - lo[0] == doctest::Approx(hi[1] - lo[1]).epsilon(0.02));
  CHECK(hi[0] - lo[0] == doctest::Approx(hi[2] - lo[2]).epsilon(0.02));
  const double tol = 1e-5;
  int on_face = 0;
  for (const auto& p : cloud.points()) {
    bool face = false;
    for (int a = 0; a < 3; ++a) {
      face = face || std::abs(p[a] - lo[a]) < tol || std::abs(p[a] - hi[a]) < tol;
    }
    on_face += face;
  }
  CHECK(on_face == 512);
}

TEST_CASE("generate_shape rejects tiny clouds and unknown kinds") {
  CHECK_THROWS_AS(generate_shape(ShapeKind::torus, 7, 1), ArgumentError);
  CHECK_THROWS_AS(parse_shape_kind("pyramid"), ConfigError);
  for (auto k : kAllShapes) CHECK(parse_shape_kind(to_string(k)) == k);
}

TEST_CASE("generate_instance varies with the seed and stays normalized") {
  for (auto k : kAllShapes) {
    const auto a = generate_instance(k, 256, 11);
    const auto b = generate_instance(k, 256, 12);
    CHECK(max_norm(a) == doctest::Approx(1.0).epsilon(1e-6));
    CHECK_FALSE(a == b);
    CHECK(a == generate_instance(k, 256, 11));
  }
}

TEST_CASE("PCB1 round trip is bit exact") {
  testing::TempDir dir;
  const auto cloud = generate_shape(ShapeKind::torus, 1024, 5);
  write_cloud(cloud, dir / "c.pcb");
  CHECK(read_cloud(dir / "c.pcb") == cloud);
  const auto bytes = testing::bytes_of(dir / "c.pcb");
  CHECK(bytes.size() == 12 + 1024 * 12);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "PCB1");
}

TEST_CASE("PCB1 error paths") {
  testing::TempDir dir;
  write_cloud(testing::random_cloud(100, 3), dir / "ok.pcb");
  auto bytes = testing::bytes_of(dir / "ok.pcb");

  auto bad_magic = bytes;
  std::copy_n("XXXX", 4, bad_magic.begin());
  testing::write_bytes(dir / "magic.pcb", bad_magic);
  CHECK_THROWS_AS(read_cloud(dir / "magic.pcb"), FormatError);

  auto short_payload = bytes;
  short_payload.resize(short_payload.size() - 12);  // 99 points for a header of 100
  testing::write_bytes(dir / "short.pcb", short_payload);
  CHECK_THROWS_AS(read_cloud(dir / "short.pcb"), TruncationError);

  std::vector<std::uint8_t> empty{'P', 'C', 'B', '1'};
  wire::put_u32(empty, 0);
  wire::put_u32(empty, 3);
  testing::write_bytes(dir / "zero.pcb", empty);
  CHECK_THROWS_AS(read_cloud(dir / "zero.pcb"), FormatError);

  auto trailing = bytes;
  trailing.push_back(0);
  testing::write_bytes(dir / "trailing.pcb", trailing);
  CHECK_THROWS_AS(read_cloud(dir / "trailing.pcb"), FormatError);

  CHECK_THROWS_AS(read_cloud(dir / "missing.pcb"), FormatError);
}

TEST_CASE("LGT1 round trip and records") {
  testing::TempDir dir;
  std::vector<float> v(12);
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5f * static_cast<float>(i) - 2.f;
  const LogitMatrix m(3, 4, v);
  write_logits(m, dir / "l.lgt");
  const auto back = read_logits(dir / "l.lgt");
  CHECK(back == m);
  CHECK(back.row(1)[0] == v[4]);
  const auto recs = back.records();
  REQUIRE(recs.size() == 3);
  CHECK(recs[2].sample_index == 2);
  CHECK(recs[2].logits == std::vector<float>(v.begin() + 8, v.end()));

  write_logits(std::span<const LogitRecord>(recs), dir / "r.lgt");
  CHECK(testing::bytes_of(dir / "r.lgt") == testing::bytes_of(dir / "l.lgt"));
  CHECK_THROWS_AS(back.row(3), ArgumentError);
}

TEST_CASE("LGT1 error paths") {
  testing::TempDir dir;
  std::vector<std::uint8_t> zero_classes{'L', 'G', 'T', '1'};
  wire::put_u32(zero_classes, 2);
  wire::put_u32(zero_classes, 0);
  testing::write_bytes(dir / "z.lgt", zero_classes);
  CHECK_THROWS_AS(read_logits(dir / "z.lgt"), FormatError);

  write_logits(LogitMatrix(3, 4, std::vector<float>(12, 1.f)), dir / "ok.lgt");
  auto bytes = testing::bytes_of(dir / "ok.lgt");
  bytes.resize(bytes.size() - 4);
  testing::write_bytes(dir / "short.lgt", bytes);
  CHECK_THROWS_AS(read_logits(dir / "short.lgt"), TruncationError);

  CHECK_THROWS_AS(LogitMatrix(2, 3, std::vector<float>(5)), FormatError);
}

TEST_CASE("LGT1 with zero samples is valid") {
  testing::TempDir dir;
  write_logits(LogitMatrix(0, 5, {}), dir / "e.lgt");
  const auto m = read_logits(dir / "e.lgt");
  CHECK(m.samples() == 0);
  CHECK(m.classes() == 5);
}

TEST_CASE("FTR1 round trip at float precision") {
  testing::TempDir dir;
  FeatureMatrix f = testing::random_matrix(5, 7, 9);
  write_features(f, dir / "f.ftr");
  const auto back = read_features(dir / "f.ftr");
  REQUIRE(back.rows() == 5);
  REQUIRE(back.cols() == 7);
  for (Eigen::Index i = 0; i < 5; ++i) {
    for (Eigen::Index j = 0; j < 7; ++j) CHECK(back(i, j) == static_cast<double>(static_cast<float>(f(i, j))));
  }
}

TEST_CASE("manifest round trip resolves relative paths") {
  testing::TempDir dir;
  std::filesystem::create_directories(dir / "clouds");
  LabeledDataset set;
  set.entries = {{dir / "clouds" / "a.pcb", 0}, {dir / "clouds" / "b.pcb", 2}};
  write_manifest(set, dir / "m.jsonl");
  std::ifstream in(dir / "m.jsonl");
  std::string first;
  std::getline(in, first);
  CHECK(first.find("clouds/a.pcb") != std::string::npos);
  CHECK(first.find(dir.path().string()) == std::string::npos);

  const auto back = read_manifest(dir / "m.jsonl");
  REQUIRE(back.entries.size() == 2);
  CHECK(back.class_count == 3);
  CHECK(std::filesystem::equivalent(back.entries[1].path.parent_path(), dir / "clouds"));
  CHECK(back.entries[1].label == 2);
}

TEST_CASE("manifest rejects malformed lines") {
  testing::TempDir dir;
  std::ofstream(dir / "bad.jsonl") << "{\"path\": \"a.pcb\"}\n";
  CHECK_THROWS_AS(read_manifest(dir / "bad.jsonl"), FormatError);
  std::ofstream(dir / "neg.jsonl") << "{\"path\": \"a.pcb\", \"label\": -1}\n";
  CHECK_THROWS_AS(read_manifest(dir / "neg.jsonl"), FormatError);
  std::ofstream(dir / "junk.jsonl") << "not json\n";
  CHECK_THROWS_AS(read_manifest(dir / "junk.jsonl"), FormatError);
}
