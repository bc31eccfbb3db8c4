#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dqlore/common.hpp"

namespace dqlore {

struct PcaModel {
  Vec mean;                // column mean (zeros when centered=false)
  Matrix components;       // eps x d, orthonormal rows, descending variance
  Vec explained_variance;  // eigenvalues of the covariance, non-increasing
  bool centered = true;
};

// Covariance uses the population divisor (rows), so the mean squared
// reconstruction error at eps equals the sum of the discarded eigenvalues
// exactly. eps is capped at min(eps, d, rows - (center ? 1 : 0)) with a
// warning on stderr. Component sign: the largest-magnitude entry of each
// component is positive (ties: lowest index wins).
PcaModel fit_pca(const Matrix& X, std::size_t eps, bool center);

Vec pca_transform(const PcaModel& pca, const Vec& v);

// exp(-||u - v||^2 / (2 sigma^2))
double gaussian_kernel(const Vec& u, const Vec& v, double sigma);

enum class LoreMetric { kInnerProduct, kGaussian };
const char* to_string(LoreMetric m);
LoreMetric lore_metric_from_string(const std::string& s);

struct LoreConfig {
  std::size_t M = 16;
  std::size_t epsilon = 256;
  LoreMetric metric = LoreMetric::kInnerProduct;
  double sigma = 0.5;  // gaussian metric only
  bool center = true;
};

// Fits PCA over the candidates plus the query, scores each candidate against
// the query in the reduced space, returns the top n as (id, reduced-space
// score) descending, ties by ascending id.
std::vector<std::pair<std::string, double>> lore_rerank(
    const Vec& query_emb,
    const std::vector<std::pair<std::string, Vec>>& candidates, std::size_t n,
    const LoreConfig& config);

}  // namespace dqlore
