#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "dqlore/lore.hpp"
#include "oracles.hpp"

using namespace dqlore;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed) {
  Matrix m(r, c);
  Rng rng(seed);
  for (double& x : m.data) x = rng.normal();
  return m;
}

}  // namespace

TEST_CASE("pca on a perfect 2d line") {
  Matrix X(4, 2);
  X.data = {0, 0, 1, 1, 2, 2, 3, 3};
  PcaModel pca = fit_pca(X, 1, true);

  REQUIRE(pca.components.rows == 1);
  double inv_sqrt2 = 1.0 / std::sqrt(2.0);
  CHECK(pca.components.at(0, 0) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
  CHECK(pca.components.at(0, 1) == doctest::Approx(inv_sqrt2).epsilon(1e-10));
  CHECK(pca.mean[0] == doctest::Approx(1.5));
  CHECK(pca.mean[1] == doctest::Approx(1.5));

  Vec t = pca_transform(pca, {3.0, 3.0});
  REQUIRE(t.size() == 1);
  CHECK(t[0] == doctest::Approx(1.5 * std::sqrt(2.0)).epsilon(1e-10));
  CHECK(t[0] == doctest::Approx(2.1213203436).epsilon(1e-9));

  // variance along the line, population divisor
  CHECK(pca.explained_variance[0] == doctest::Approx(2.5).epsilon(1e-10));
}

TEST_CASE("pca components are orthonormal with ordered variances") {
  Matrix X = random_matrix(10, 6, 31);
  PcaModel pca = fit_pca(X, 4, true);

  REQUIRE(pca.components.rows == 4);
  for (std::size_t i = 0; i < 4; ++i) {
    const double* ri = pca.components.row(i);
    for (std::size_t j = 0; j < 4; ++j) {
      const double* rj = pca.components.row(j);
      double d = 0.0;
      for (std::size_t c = 0; c < 6; ++c) d += ri[c] * rj[c];
      CHECK(d == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-8));
    }
  }
  for (std::size_t k = 1; k < 4; ++k)
    CHECK(pca.explained_variance[k - 1] >= pca.explained_variance[k]);
  for (double ev : pca.explained_variance) CHECK(ev >= 0.0);

  // sign convention: the largest-magnitude entry of each component is positive
  for (std::size_t k = 0; k < 4; ++k) {
    double best = 0.0;
    for (std::size_t c = 0; c < 6; ++c)
      if (std::fabs(pca.components.at(k, c)) > std::fabs(best))
        best = pca.components.at(k, c);
    CHECK(best > 0.0);
  }
}

TEST_CASE("pca matches an independent jacobi eigensolver") {
  for (std::uint64_t seed : {7, 8, 9}) {
    Matrix X = random_matrix(10, 6, seed);
    for (bool center : {true, false}) {
      PcaModel pca = fit_pca(X, 6, center);
      auto expect = oracle::jacobi_eigen(oracle::covariance(X, center));

      REQUIRE(pca.explained_variance.size() == 6);
      for (std::size_t k = 0; k < 6; ++k) {
        CHECK(pca.explained_variance[k] ==
              doctest::Approx(expect.values[k]).epsilon(1e-8));
        // eigenvectors agree up to sign
        double d = 0.0;
        for (std::size_t c = 0; c < 6; ++c)
          d += pca.components.at(k, c) * expect.vectors.at(k, c);
        CHECK(std::fabs(d) == doctest::Approx(1.0).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("pca reconstruction error equals the discarded eigenvalue sum") {
  Matrix X = random_matrix(10, 6, 55);
  auto expect = oracle::jacobi_eigen(oracle::covariance(X, true));

  for (std::size_t eps : {std::size_t{1}, std::size_t{2}, std::size_t{4},
                          std::size_t{6}}) {
    PcaModel pca = fit_pca(X, eps, true);
    double total_err = 0.0;
    for (std::size_t i = 0; i < X.rows; ++i) {
      Vec x(X.row(i), X.row(i) + X.cols);
      Vec z = pca_transform(pca, x);
      Vec recon = pca.mean;
      for (std::size_t k = 0; k < eps; ++k)
        for (std::size_t c = 0; c < X.cols; ++c)
          recon[c] += z[k] * pca.components.at(k, c);
      for (std::size_t c = 0; c < X.cols; ++c) {
        double dcomp = x[c] - recon[c];
        total_err += dcomp * dcomp;
      }
    }
    double mse = total_err / static_cast<double>(X.rows);
    double discarded = 0.0;
    for (std::size_t k = eps; k < 6; ++k) discarded += expect.values[k];
    CHECK(mse == doctest::Approx(discarded).epsilon(1e-8));
  }
}

TEST_CASE("pca caps the dimension at the rank bound") {
  Matrix X = random_matrix(3, 5, 12);
  PcaModel centered = fit_pca(X, 4, true);
  CHECK(centered.components.rows == 2);  // rows - 1
  PcaModel raw = fit_pca(X, 4, false);
  CHECK(raw.components.rows == 3);

  CHECK_THROWS_AS(fit_pca(Matrix(1, 5), 1, true), ValidationError);
  CHECK_THROWS_AS(fit_pca(X, 0, true), ValidationError);
  CHECK_THROWS_AS(pca_transform(centered, Vec(3, 0.0)), ValidationError);
}

TEST_CASE("uncentered pca keeps a zero mean") {
  Matrix X = random_matrix(5, 3, 77);
  PcaModel pca = fit_pca(X, 2, false);
  for (double m : pca.mean) CHECK(m == 0.0);
  CHECK_FALSE(pca.centered);
}

TEST_CASE("gaussian kernel values") {
  double expect = std::exp(-2.0);  // 0.1353352832...
  CHECK(gaussian_kernel({0.0}, {1.0}, 0.5) ==
        doctest::Approx(expect).epsilon(1e-9));
  CHECK(gaussian_kernel({0.0}, {0.5}, 0.25) ==
        doctest::Approx(expect).epsilon(1e-9));
  CHECK(gaussian_kernel({0.0}, {1.0}, 0.5) ==
        doctest::Approx(0.1353352832).epsilon(1e-9));

  Vec u = {1.0, -2.0, 0.5};
  CHECK(gaussian_kernel(u, u, 0.3) == 1.0);
  CHECK_THROWS_AS(gaussian_kernel({0.0}, {1.0}, 0.0), ValidationError);
  CHECK_THROWS_AS(gaussian_kernel({0.0}, {1.0}, -1.0), ValidationError);
}

TEST_CASE("full-rank uncentered rerank preserves inner-product order") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(200 + seed);
    std::size_t d = 6;
    Vec query(d);
    for (double& x : query) x = rng.normal();
    std::vector<std::pair<std::string, Vec>> candidates;
    for (std::size_t i = 0; i < 12; ++i) {
      Vec v(d);
      for (double& x : v) x = rng.normal();
      candidates.emplace_back("c" + std::to_string(i / 10) +
                                  std::to_string(i % 10),
                              std::move(v));
    }

    LoreConfig cfg;
    cfg.epsilon = d;
    cfg.center = false;
    cfg.metric = LoreMetric::kInnerProduct;
    auto reranked = lore_rerank(query, candidates, 5, cfg);

    std::vector<std::pair<std::string, double>> direct;
    for (const auto& [id, v] : candidates)
      direct.emplace_back(id, dot(query, v));
    std::sort(direct.begin(), direct.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second > b.second;
      return a.first < b.first;
    });

    REQUIRE(reranked.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(reranked[i].first == direct[i].first);
      CHECK(reranked[i].second ==
            doctest::Approx(direct[i].second).epsilon(1e-9));
    }
  }
}

TEST_CASE("full-rank centered gaussian rerank preserves distance order") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(300 + seed);
    std::size_t d = 5;
    Vec query(d);
    for (double& x : query) x = rng.normal();
    std::vector<std::pair<std::string, Vec>> candidates;
    for (std::size_t i = 0; i < 10; ++i) {
      Vec v(d);
      for (double& x : v) x = rng.normal();
      candidates.emplace_back("c" + std::to_string(i), std::move(v));
    }

    LoreConfig cfg;
    cfg.epsilon = d;
    cfg.center = true;
    cfg.metric = LoreMetric::kGaussian;
    cfg.sigma = 0.8;
    auto reranked = lore_rerank(query, candidates, 4, cfg);

    std::vector<std::pair<std::string, double>> direct;
    for (const auto& [id, v] : candidates)
      direct.emplace_back(id, squared_distance(query, v));
    std::sort(direct.begin(), direct.end(), [](const auto& a, const auto& b) {
      if (a.second != b.second) return a.second < b.second;  // closest first
      return a.first < b.first;
    });

    REQUIRE(reranked.size() == 4);
    for (std::size_t i = 0; i < 4; ++i)
      CHECK(reranked[i].first == direct[i].first);
  }
}

TEST_CASE("lore_rerank validation and ties") {
  Vec query = {1.0, 0.0};
  std::vector<std::pair<std::string, Vec>> candidates = {
      {"b", {0.5, 0.5}},
      {"a", {0.5, 0.5}},  // identical vector: score tie, id order decides
      {"c", {-1.0, 0.0}},
  };
  LoreConfig cfg;
  cfg.epsilon = 2;
  cfg.center = false;
  auto out = lore_rerank(query, candidates, 3, cfg);
  REQUIRE(out.size() == 3);
  CHECK(out[0].first == "a");
  CHECK(out[1].first == "b");
  CHECK(out[2].first == "c");

  CHECK_THROWS_AS(lore_rerank(query, candidates, 0, cfg), ValidationError);
  CHECK_THROWS_AS(lore_rerank(query, candidates, 4, cfg), ValidationError);
  candidates.push_back({"d", {1.0, 2.0, 3.0}});
  CHECK_THROWS_AS(lore_rerank(query, candidates, 2, cfg), ValidationError);
}
