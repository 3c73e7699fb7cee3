#include <doctest.h>

#include "bftt3d/error.hpp"
#include "bftt3d/pipeline.hpp"
#include "support.hpp"

using namespace bftt3d;

namespace {

struct Fixture {
  PrototypeMemory memory = build_memory({testing::random_matrix(12, 6, 1, 1.0), testing::random_matrix(12, 6, 2, -1.0)}, 0.5);
  Eigen::MatrixXd targets = testing::random_matrix(7, 6, 3, 0.2);
  Eigen::MatrixXd source = testing::random_matrix(7, 2, 4);
};

Eigen::MatrixXd centered_unit(Eigen::MatrixXd m, const Eigen::RowVectorXd& mean) {
  m.rowwise() -= mean;
  m.rowwise().normalize();
  return m;
}

}  // namespace

TEST_CASE("adapt without subspace is cosine voting on centered features") {
  Fixture fx;
  SubspaceConfig sub;
  sub.method = SubspaceMethod::none;
  FusionConfig fus;
  fus.gamma = 10.0;
  const auto out = adapt(fx.memory, fx.targets, fx.source, sub, fus);
  REQUIRE(out.samples.size() == 7);

  const Eigen::RowVectorXd mean = fx.memory.features().colwise().mean();
  const Eigen::MatrixXd t = centered_unit(fx.targets, mean);
  const Eigen::MatrixXd p = centered_unit(fx.memory.features(), mean);
  const Eigen::MatrixXd expected = bf_logits(t * p.transpose(), fx.memory.labels(), 10.0);
  for (Eigen::Index i = 0; i < 7; ++i) {
    const auto& s = out.samples[static_cast<std::size_t>(i)];
    CHECK((s.bf_scores - expected.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(s.source_logits == fx.source.row(i).transpose());
    const auto direct = fuse(scores_to_logits(s.bf_scores), s.source_logits, fus);
    CHECK(s.fusion.p == direct.p);
    CHECK(s.fusion.logits == direct.logits);
  }
}

TEST_CASE("adapt with tca refits per batch") {
  Fixture fx;
  SubspaceConfig sub;
  sub.m = 3;
  sub.batch = 4;
  FusionConfig fus;
  const auto out = adapt(fx.memory, fx.targets, fx.source, sub, fus);

  const Eigen::RowVectorXd mean = fx.memory.features().colwise().mean();
  const Eigen::MatrixXd t = centered_unit(fx.targets, mean);
  const Eigen::MatrixXd p = centered_unit(fx.memory.features(), mean);
  for (Eigen::Index start : {0, 4}) {
    const Eigen::Index len = start == 0 ? 4 : 3;
    const auto proj = project(fit_tca(p, t.middleRows(start, len), 3, 1.0));
    const auto sim = similarity(proj.target, proj.source);
    const Eigen::MatrixXd scores = bf_logits(sim, fx.memory.labels(), fus.gamma);
    for (Eigen::Index i = 0; i < len; ++i) {
      const auto& got = out.samples[static_cast<std::size_t>(start + i)].bf_scores;
      CHECK((got - scores.row(i).transpose()).cwiseAbs().maxCoeff() < 1e-10);
    }
  }
}

TEST_CASE("adapt leaves the memory untouched and refuse reproduces fusion") {
  Fixture fx;
  const auto before = fx.memory.state_hash();
  SubspaceConfig sub;
  sub.m = 2;
  FusionConfig fus;
  const auto out = adapt(fx.memory, fx.targets, fx.source, sub, fus);
  CHECK(fx.memory.state_hash() == before);
  for (const auto& s : out.samples) {
    const auto r = refuse(s, fus);
    CHECK(r.p == s.fusion.p);
    CHECK(r.logits == s.fusion.logits);
  }
  FusionConfig fixed = fus;
  fixed.mode = FusionMode::fixed;
  fixed.fixed_p = 0.0;
  CHECK(refuse(out.samples[0], fixed).logits == softmax(out.samples[0].source_logits));
}

TEST_CASE("adapt argument errors") {
  Fixture fx;
  SubspaceConfig sub;
  FusionConfig fus;
  CHECK_THROWS_AS(adapt(fx.memory, testing::random_matrix(3, 5, 1), fx.source.topRows(3), sub, fus), ArgumentError);
  CHECK_THROWS_AS(adapt(fx.memory, fx.targets, testing::random_matrix(7, 3, 1), sub, fus), ArgumentError);
  Eigen::MatrixXd zero_row = fx.targets;
  const Eigen::RowVectorXd mean = fx.memory.features().colwise().mean();
  zero_row.row(2) = mean;
  CHECK_THROWS_AS(adapt(fx.memory, zero_row, fx.source, sub, fus), NumericError);
  sub.batch = 0;
  CHECK_THROWS_AS(sub.validate(), ConfigError);
  CHECK_THROWS_AS(parse_subspace_method("pca"), ConfigError);
}
