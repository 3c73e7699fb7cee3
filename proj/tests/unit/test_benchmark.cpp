#include <fstream>
#include <numeric>

#include <doctest.h>

#include "bftt3d/benchmark.hpp"
#include "bftt3d/config.hpp"
#include "bftt3d/error.hpp"
#include "support.hpp"

using namespace bftt3d;

namespace {

const std::filesystem::path kConfigs = std::filesystem::path(BFTT3D_SOURCE_DIR) / "configs";

RunConfig smoke() { return load_run_config(kConfigs / "smoke.toml"); }

// Encoded once; the fixtures below only re-evaluate.
const PreparedBenchmark& smoke_data() {
  static const PreparedBenchmark data = prepare_benchmark(smoke());
  return data;
}

}  // namespace

TEST_CASE("config files load") {
  const auto desk = load_run_config(kConfigs / "desk.toml");
  CHECK(desk.domains.size() == 15);
  CHECK(desk.data.classes.size() == 4);
  CHECK(desk.data.train_per_class == 100);
  CHECK(desk.data.test_per_class == 50);
  CHECK(desk.data.points == 1024);
  CHECK(desk.severity == 5);
  CHECK(desk.memory_ratio == 0.25);
  CHECK(desk.encoder == EncoderConfig{});
  CHECK(desk.subspace.method == SubspaceMethod::tca);
  CHECK(desk.fusion.mode == FusionMode::adaptive);
  CHECK(desk.source.kind == SourceConfig::Kind::centroid);

  const auto s = smoke();
  CHECK(s.seed == 7);
  CHECK(s.encoder.d0 == 24);
  CHECK(s.subspace.m == 4);
}

TEST_CASE("config parsing rejects bad input") {
  CHECK_THROWS_AS(parse_run_config("domains = [\"clean\"]\nsede = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("domains = [\"clean\"]\n[encoder]\nd00 = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("domains = [\"clean\"]\nseed = \"x\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("domains = [\"fog\"]\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("domains = [\"clean\"]\n[fusion]\nmode = \"greedy\"\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("domains = []\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("domains = [\"clean\"]\n[data]\npoints = 100\n"), ConfigError);
  CHECK_THROWS_AS(parse_run_config("domains = [\"clean\"]\n[source]\nkind = \"file\"\n"), ConfigError);
  try {
    parse_run_config("domains = [\"clean\"]\n\nseed = = 4\n", "x.toml");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("x.toml:3") != std::string::npos);
  }
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.toml"), ConfigError);
}

TEST_CASE("config paths resolve relative to the config file") {
  testing::TempDir dir;
  std::ofstream(dir / "run.toml") << "domains = [\"clean\"]\ntrace = \"t.jsonl\"\n[source]\nkind = \"file\"\nlogits = \"l/{domain}.lgt\"\n";
  const auto cfg = load_run_config(dir / "run.toml");
  CHECK(cfg.trace_path == dir / "t.jsonl");
  CHECK(cfg.source.logits_path == (dir / "l/{domain}.lgt").string());
}

TEST_CASE("dataset samples are seeded per split and index") {
  auto cfg = smoke();
  const auto train = dataset_samples(cfg, true);
  CHECK(train.size() == 4 * 12);
  CHECK(train[12].label == 1);
  CHECK(train[0].instance_seed != dataset_samples(cfg, false)[0].instance_seed);
  cfg.data.train_per_class = 20;
  // Class 1, instance 0 keeps its seed when the per-class count changes.
  CHECK(dataset_samples(cfg, true)[20].instance_seed == train[12].instance_seed);
}

TEST_CASE("error_percent") {
  CHECK(error_percent(3, 12) == 25.0);
  CHECK(error_percent(0, 5) == 0.0);
}

TEST_CASE("smoke benchmark is deterministic and consistent") {
  const auto cfg = smoke();
  const auto a = evaluate(smoke_data(), cfg);
  const auto b = run_benchmark(cfg);
  CHECK(a.to_json().dump() == b.to_json().dump());
  CHECK(a.to_text() == b.to_text());

  for (const auto& arm : a.arms) {
    double sum = 0.0;
    for (const auto& d : a.domains) sum += arm.errors.at(d);
    CHECK(std::abs(arm.mean - sum / static_cast<double>(a.domains.size())) < 1e-9);
  }
  CHECK(a.memory_hash_before == a.memory_hash_after);
  CHECK(a.source_hash_before == a.source_hash_after);
  CHECK(a.p_summary.at("clean").min >= 0.0);
  CHECK(a.p_summary.at("clean").max <= 1.0);
  CHECK_THROWS_AS(a.arm("missing"), ArgumentError);
}

TEST_CASE("fixed fusion ends reproduce the single-branch arms") {
  auto cfg = smoke();
  cfg.fusion.mode = FusionMode::fixed;
  cfg.fusion.fixed_p = 0.0;
  const auto zero = evaluate(smoke_data(), cfg);
  CHECK(zero.arm("bftt3d").errors == zero.arm("source-only").errors);
  cfg.fusion.fixed_p = 1.0;
  const auto one = evaluate(smoke_data(), cfg);
  CHECK(one.arm("bftt3d").errors == one.arm("adaptation").errors);
}

TEST_CASE("ablation shapes") {
  const auto cfg = smoke();
  const auto base = evaluate(smoke_data(), cfg);
  const auto ratio = run_ablation(smoke_data(), cfg, AblationAxis::ratio);
  CHECK(ratio.rows.size() == 4);
  CHECK(ratio.rows[0].name == "ratio=25%");
  CHECK(ratio.rows[0].errors == base.arm("bftt3d").errors);
  CHECK(ratio.source_only.errors == base.arm("source-only").errors);

  const auto sub = run_ablation(smoke_data(), cfg, AblationAxis::subspace);
  REQUIRE(sub.rows.size() == 2);
  CHECK(sub.rows[1].errors == base.arm("bftt3d").errors);
  CHECK(sub.source_only.errors == ratio.source_only.errors);

  const auto fr = run_ablation(smoke_data(), cfg, AblationAxis::fusion_ratio);
  REQUIRE(fr.rows.size() == 12);
  CHECK(fr.rows.front().errors == base.arm("source-only").errors);
  CHECK(fr.rows[10].errors == base.arm("adaptation").errors);
  CHECK(fr.rows.back().errors == base.arm("bftt3d").errors);
  CHECK(fr.to_json()["rows"].size() == 12);
  CHECK_THROWS_AS(parse_ablation_axis("gamma"), ConfigError);
}

TEST_CASE("file source replays exported logits per domain") {
  testing::TempDir dir;
  auto cfg = smoke();
  const auto test = dataset_samples(cfg, false);
  for (const auto& d : cfg.domains) {
    std::vector<float> v(test.size() * 4, 0.0f);
    for (std::size_t i = 0; i < test.size(); ++i) v[i * 4 + static_cast<std::size_t>(test[i].label)] = 20.0f;
    write_logits(LogitMatrix(static_cast<std::uint32_t>(test.size()), 4, v), dir / (d + ".lgt"));
  }
  cfg.source.kind = SourceConfig::Kind::file;
  cfg.source.logits_path = (dir / "{domain}.lgt").string();
  const auto r = evaluate(smoke_data(), cfg);
  for (const auto& d : cfg.domains) CHECK(r.arm("source-only").errors.at(d) == 0.0);

  write_logits(LogitMatrix(2, 4, std::vector<float>(8, 0.f)), dir / "lidar.lgt");
  try {
    evaluate(smoke_data(), cfg);
    FAIL("expected ArgumentError");
  } catch (const ArgumentError& e) {
    CHECK(std::string(e.what()).find("domain lidar") != std::string::npos);
  }
  std::filesystem::remove(dir / "clean.lgt");
  CHECK_THROWS_AS(evaluate(smoke_data(), cfg), FormatError);
}
