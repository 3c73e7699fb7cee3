#include <doctest.h>

#include "bftt3d/error.hpp"
#include "bftt3d/source_model.hpp"
#include "support.hpp"

using namespace bftt3d;

TEST_CASE("centroid provider scores cosine over temperature") {
  const std::vector<FeatureMatrix> per_class{testing::random_matrix(6, 4, 1), testing::random_matrix(5, 4, 2, 2.0)};
  const auto sp = fit_centroids(per_class, 0.04);
  REQUIRE(sp.classes() == 2);
  CHECK_FALSE(sp.is_replay());
  const Eigen::RowVectorXd mean0 = per_class[0].colwise().mean();
  CHECK((sp.centroids()->row(0) - mean0).cwiseAbs().maxCoeff() < 1e-14);

  const Eigen::VectorXd f = mean0.transpose() * 3.0;
  const auto l = sp.logits_for(0, &f);
  CHECK(l[0] == doctest::Approx(1.0 / 0.04).epsilon(1e-12));
  const Eigen::RowVectorXd c1 = sp.centroids()->row(1);
  CHECK(l[1] == doctest::Approx(c1.dot(f) / (c1.norm() * f.norm()) / 0.04).epsilon(1e-12));
  CHECK(l.maxCoeff() <= 1.0 / 0.04 + 1e-9);
}

TEST_CASE("centroid provider errors and warnings") {
  const auto x = testing::random_matrix(3, 4, 1);
  const auto sp = fit_centroids({x, x}, 0.1);
  REQUIRE(sp.warnings().size() == 1);
  CHECK(sp.warnings()[0].find("identical") != std::string::npos);
  CHECK_THROWS_AS(sp.logits_for(0, nullptr), ArgumentError);
  const Eigen::VectorXd narrow = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(sp.logits_for(0, &narrow), ArgumentError);
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(4);
  CHECK_THROWS_AS(sp.logits_for(0, &zero), NumericError);
  CHECK_THROWS_AS(fit_centroids({x, FeatureMatrix(0, 4)}), ArgumentError);
  CHECK_THROWS_AS(sp.samples(), ArgumentError);
  CHECK_THROWS_AS(SourceProvider::from_centroids(x, 0.0), ArgumentError);
}

TEST_CASE("replay provider returns stored rows bit exactly") {
  std::vector<float> v{0.1f, -3.5f, 1e-7f, 2.25f, 0.0f, -0.0f};
  const auto sp = SourceProvider::from_file(LogitMatrix(2, 3, v));
  CHECK(sp.is_replay());
  CHECK(sp.samples() == 2);
  CHECK(sp.classes() == 3);
  const auto row = sp.logits_for(1, nullptr);
  for (int i = 0; i < 3; ++i) CHECK(row[i] == static_cast<double>(v[3 + static_cast<std::size_t>(i)]));
  CHECK_THROWS_AS(sp.logits_for(2, nullptr), ArgumentError);
  CHECK(sp.centroids() == nullptr);
}

TEST_CASE("provider state hash is stable and content sensitive") {
  const auto x = testing::random_matrix(4, 3, 5);
  const auto y = testing::random_matrix(4, 3, 6);
  const auto a = fit_centroids({x, y}, 0.04);
  const Eigen::VectorXd f = Eigen::VectorXd::Ones(3);
  const auto before = a.state_hash();
  a.logits_for(0, &f);
  CHECK(a.state_hash() == before);
  CHECK(fit_centroids({x, y}, 0.04).state_hash() == before);
  CHECK(fit_centroids({x, y}, 0.05).state_hash() != before);
  CHECK(fit_centroids({y, x}, 0.04).state_hash() != before);
}
