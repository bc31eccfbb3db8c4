#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "dqlore/common.hpp"

namespace dqlore {

struct VizPoint {
  std::string id;
  std::string label;  // good | bad | query
  std::string stage;  // pre-lore | post-lore
  double x = 0.0;
  double y = 0.0;
};

// PCA to two components (centered); rows >= 3
Matrix pca_2d(const Matrix& X);

struct TsneConfig {
  double perplexity = 5.0;
  std::size_t iters = 500;
  double learning_rate = 50.0;
  std::uint64_t seed = 0;
};

// row-stochastic conditional affinities p_{j|i}, bandwidths tuned per point
// so the entropy of each row matches log2(perplexity) within 1e-5 bits
Matrix conditional_affinities(const Matrix& X, double perplexity);

// symmetrized joint affinities P = (C + C^T) / (2n); sums to 1
Matrix symmetrized_affinities(const Matrix& X, double perplexity);

struct TsneDiagnostics {
  // (iteration, KL(P||Q)) recorded every 100 iterations, exaggeration excluded
  std::vector<std::pair<std::size_t, double>> kl_checkpoints;
};

// Exact O(n^2) t-SNE: early exaggeration x4 for the first 100 iterations,
// momentum 0.5 switching to 0.8 at iteration 250, seeded Gaussian init with
// std 1e-4. Returns n x 2 coordinates.
Matrix tsne(const Matrix& X, const TsneConfig& config,
            TsneDiagnostics* diag = nullptr);

// writes base_path + ".csv" (id,label,stage,x,y) and base_path + ".svg"
void export_scatter(const std::vector<VizPoint>& points,
                    const std::string& base_path);

}  // namespace dqlore
