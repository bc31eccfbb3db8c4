#include <cmath>
#include <cstring>
#include <limits>

#include "doctest.h"
#include "dqlore/viz.hpp"
#include "helpers.hpp"

using namespace dqlore;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Matrix m(r, c);
  Rng rng(seed);
  for (double& x : m.data) x = rng.normal();
  return m;
}

// two tight gaussian blobs, n points each, separated along the first axis
Matrix two_clusters(std::size_t n, std::size_t d, std::uint64_t seed) {
  Matrix X(2 * n, d);
  Rng rng(seed);
  for (std::size_t i = 0; i < 2 * n; ++i) {
    double center = i < n ? -4.0 : 4.0;
    for (std::size_t c = 0; c < d; ++c)
      X.at(i, c) = (c == 0 ? center : 0.0) + 0.3 * rng.normal();
  }
  return X;
}

double row_entropy_bits(const Matrix& P, std::size_t i) {
  double h = 0.0;
  for (std::size_t j = 0; j < P.cols; ++j) {
    double p = P.at(i, j);
    if (p > 0.0) h -= p * std::log2(p);
  }
  return h;
}

}  // namespace

TEST_CASE("pca_2d projects to two coordinates") {
  Matrix X(4, 3);
  // collinear points along (1,1,0)
  X.data = {0, 0, 0, 1, 1, 0, 2, 2, 0, 3, 3, 0};
  Matrix Y = pca_2d(X);
  REQUIRE(Y.rows == 4);
  REQUIRE(Y.cols == 2);
  // all variance sits in the first coordinate
  for (std::size_t i = 0; i < 4; ++i)
    CHECK(Y.at(i, 1) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(std::fabs(Y.at(0, 0) - Y.at(3, 0)) > 1.0);

  CHECK_THROWS_AS(pca_2d(Matrix(2, 3)), ValidationError);

  // identical points: degenerate but well defined
  Matrix same(5, 3, 1.0);
  Matrix Z = pca_2d(same);
  for (double v : Z.data) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("conditional affinities are row-stochastic at the target entropy") {
  Matrix X = random_matrix(12, 4, 17);
  double perplexity = 3.0;
  Matrix C = conditional_affinities(X, perplexity);

  REQUIRE(C.rows == 12);
  REQUIRE(C.cols == 12);
  double target = std::log2(perplexity);
  for (std::size_t i = 0; i < C.rows; ++i) {
    CHECK(C.at(i, i) == 0.0);
    double sum = 0.0;
    for (std::size_t j = 0; j < C.cols; ++j) {
      CHECK(C.at(i, j) >= 0.0);
      sum += C.at(i, j);
    }
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(row_entropy_bits(C, i) == doctest::Approx(target).epsilon(1e-4));
  }
}

TEST_CASE("symmetrized affinities form a joint distribution") {
  Matrix X = random_matrix(10, 3, 23);
  Matrix P = symmetrized_affinities(X, 2.5);

  double total = 0.0;
  for (std::size_t i = 0; i < P.rows; ++i) {
    CHECK(P.at(i, i) == 0.0);
    for (std::size_t j = 0; j < P.cols; ++j) {
      CHECK(P.at(i, j) >= 0.0);
      CHECK(P.at(i, j) == doctest::Approx(P.at(j, i)).epsilon(1e-12));
      total += P.at(i, j);
    }
  }
  CHECK(total == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("tsne input validation") {
  Matrix ok = random_matrix(10, 3, 1);
  TsneConfig config;
  config.perplexity = 2.0;
  config.iters = 10;

  CHECK_THROWS_AS(tsne(random_matrix(3, 3, 1), config), ValidationError);
  TsneConfig bad = config;
  bad.perplexity = 1.0;
  CHECK_THROWS_AS(tsne(ok, bad), ValidationError);
  bad.perplexity = 3.0;  // bound for n=10 is (10-1)/3 = 3
  CHECK_THROWS_AS(tsne(ok, bad), ValidationError);
  bad = config;
  bad.iters = 0;
  CHECK_THROWS_AS(tsne(ok, bad), ValidationError);
  CHECK_THROWS_AS(conditional_affinities(ok, 0.5), ValidationError);
}

TEST_CASE("tsne is deterministic per seed") {
  Matrix X = two_clusters(6, 4, 3);
  TsneConfig config;
  config.perplexity = 3.0;
  config.iters = 60;
  config.seed = 5;

  Matrix a = tsne(X, config);
  Matrix b = tsne(X, config);
  REQUIRE(a.data.size() == b.data.size());
  CHECK(std::memcmp(a.data.data(), b.data.data(),
                    a.data.size() * sizeof(double)) == 0);

  config.seed = 6;
  Matrix c = tsne(X, config);
  CHECK(std::memcmp(a.data.data(), c.data.data(),
                    a.data.size() * sizeof(double)) != 0);
}

TEST_CASE("tsne separates two clusters and reduces the divergence") {
  Matrix X = two_clusters(10, 5, 42);
  TsneConfig config;
  config.perplexity = 5.0;
  config.iters = 500;
  config.learning_rate = 50.0;
  config.seed = 0;

  TsneDiagnostics diag;
  Matrix Y = tsne(X, config, &diag);
  REQUIRE(Y.rows == 20);
  REQUIRE(Y.cols == 2);

  auto dist = [&](std::size_t i, std::size_t j) {
    double dx = Y.at(i, 0) - Y.at(j, 0);
    double dy = Y.at(i, 1) - Y.at(j, 1);
    return std::sqrt(dx * dx + dy * dy);
  };
  double max_intra = 0.0;
  double min_inter = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < 20; ++i) {
    for (std::size_t j = i + 1; j < 20; ++j) {
      bool same = (i < 10) == (j < 10);
      if (same)
        max_intra = std::max(max_intra, dist(i, j));
      else
        min_inter = std::min(min_inter, dist(i, j));
    }
  }
  CHECK(max_intra < min_inter);

  REQUIRE(diag.kl_checkpoints.size() == 5);
  CHECK(diag.kl_checkpoints.front().first == 100);
  CHECK(diag.kl_checkpoints.back().first == 500);
  CHECK(diag.kl_checkpoints.back().second <
        diag.kl_checkpoints.front().second);
  for (const auto& [iter, kl] : diag.kl_checkpoints) CHECK(kl >= 0.0);
}

TEST_CASE("export_scatter writes csv and svg") {
  testutil::TempDir dir("viz");
  std::vector<VizPoint> points = {
      {"q-1", "query", "pre-lore", 0.25, -1.5},
      {"g-1", "good", "pre-lore", 1.0, 2.0},
      {"b-1", "bad", "post-lore", -3.0, 0.125},
  };
  std::string base = dir.file("scatter");
  export_scatter(points, base);

  std::string csv = testutil::read_file(base + ".csv");
  CHECK(csv.find("id,label,stage,x,y\n") == 0);
  CHECK(csv.find("q-1,query,pre-lore,0.25,-1.5\n") != std::string::npos);
  CHECK(csv.find("b-1,bad,post-lore,-3,0.125\n") != std::string::npos);

  std::string svg = testutil::read_file(base + ".svg");
  CHECK(svg.find("<svg") != std::string::npos);
  CHECK(svg.find(".good{fill:#2b6cb0}") != std::string::npos);
  CHECK(svg.find("class=\"query\"") != std::string::npos);
  CHECK(svg.find("r=\"7\"") != std::string::npos);  // query marker is larger
  CHECK(svg.find("<title>g-1</title>") != std::string::npos);

  // identical input, identical bytes
  export_scatter(points, dir.file("again"));
  CHECK(testutil::read_file(dir.file("again") + ".csv") == csv);
  CHECK(testutil::read_file(dir.file("again") + ".svg") == svg);

  // empty input still yields a valid header-only csv
  export_scatter({}, dir.file("empty"));
  CHECK(testutil::read_file(dir.file("empty") + ".csv") == "id,label,stage,x,y\n");

  std::vector<VizPoint> bad = {{"x", "good", "pre-lore",
                                std::numeric_limits<double>::quiet_NaN(), 0.0}};
  CHECK_THROWS_AS(export_scatter(bad, dir.file("bad")), ValidationError);
}
