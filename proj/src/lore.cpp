#include "dqlore/lore.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>

#include <Eigen/Dense>

namespace dqlore {

PcaModel fit_pca(const Matrix& X, std::size_t eps, bool center) {
  if (X.rows < 2) throw ValidationError("fit_pca: need at least 2 rows");
  if (eps == 0) throw ValidationError("fit_pca: eps must be at least 1");
  std::size_t d = X.cols;
  std::size_t cap = std::min(d, X.rows - (center ? 1 : 0));
  if (eps > cap) {
    std::cerr << "warning: reducing pca dimension from " << eps << " to "
              << cap << " (rank bound for " << X.rows << " x " << d
              << " data)\n";
    eps = cap;
  }

  PcaModel model;
  model.centered = center;
  model.mean.assign(d, 0.0);
  if (center) {
    for (std::size_t i = 0; i < X.rows; ++i) {
      const double* row = X.row(i);
      for (std::size_t c = 0; c < d; ++c) model.mean[c] += row[c];
    }
    for (double& m : model.mean) m /= static_cast<double>(X.rows);
  }

  Eigen::MatrixXd B(X.rows, d);
  for (std::size_t i = 0; i < X.rows; ++i)
    for (std::size_t c = 0; c < d; ++c)
      B(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) =
          X.at(i, c) - model.mean[c];

  Eigen::MatrixXd cov =
      (B.transpose() * B) / static_cast<double>(X.rows);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(cov);
  if (solver.info() != Eigen::Success)
    throw Error("fit_pca: eigendecomposition failed");

  // eigenvalues come back ascending; take the top eps in reverse
  model.components = Matrix(eps, d);
  model.explained_variance.assign(eps, 0.0);
  for (std::size_t k = 0; k < eps; ++k) {
    Eigen::Index col = static_cast<Eigen::Index>(d - 1 - k);
    double ev = solver.eigenvalues()(col);
    model.explained_variance[k] = ev < 0.0 ? 0.0 : ev;

    Eigen::VectorXd v = solver.eigenvectors().col(col);
    Eigen::Index arg = 0;
    double best = std::abs(v(0));
    for (Eigen::Index c = 1; c < v.size(); ++c) {
      if (std::abs(v(c)) > best) {
        best = std::abs(v(c));
        arg = c;
      }
    }
    if (v(arg) < 0.0) v = -v;
    for (std::size_t c = 0; c < d; ++c)
      model.components.at(k, c) = v(static_cast<Eigen::Index>(c));
  }
  return model;
}

Vec pca_transform(const PcaModel& pca, const Vec& v) {
  if (v.size() != pca.components.cols)
    throw ValidationError("pca_transform: vector has dim " +
                          std::to_string(v.size()) + ", expected " +
                          std::to_string(pca.components.cols));
  std::size_t eps = pca.components.rows;
  Vec out(eps, 0.0);
  for (std::size_t k = 0; k < eps; ++k) {
    const double* comp = pca.components.row(k);
    double s = 0.0;
    for (std::size_t c = 0; c < v.size(); ++c)
      s += comp[c] * (v[c] - pca.mean[c]);
    out[k] = s;
  }
  return out;
}

double gaussian_kernel(const Vec& u, const Vec& v, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian_kernel: sigma must be positive");
  return std::exp(-squared_distance(u, v) / (2.0 * sigma * sigma));
}

const char* to_string(LoreMetric m) {
  return m == LoreMetric::kInnerProduct ? "inner-product" : "gaussian";
}

LoreMetric lore_metric_from_string(const std::string& s) {
  if (s == "inner-product") return LoreMetric::kInnerProduct;
  if (s == "gaussian") return LoreMetric::kGaussian;
  throw ValidationError("unknown metric '" + s +
                        "' (expected inner-product or gaussian)");
}

std::vector<std::pair<std::string, double>> lore_rerank(
    const Vec& query_emb,
    const std::vector<std::pair<std::string, Vec>>& candidates, std::size_t n,
    const LoreConfig& config) {
  if (n == 0) throw ValidationError("lore_rerank: n must be at least 1");
  if (candidates.size() < n)
    throw ValidationError("lore_rerank: n=" + std::to_string(n) +
                          " exceeds candidate count " +
                          std::to_string(candidates.size()));
  std::size_t d = query_emb.size();
  for (const auto& [id, vec] : candidates)
    if (vec.size() != d)
      throw ValidationError("lore_rerank: candidate '" + id +
                            "' has mismatched dim");

  Matrix stacked(candidates.size() + 1, d);
  for (std::size_t i = 0; i < candidates.size(); ++i)
    std::copy(candidates[i].second.begin(), candidates[i].second.end(),
              stacked.row(i));
  std::copy(query_emb.begin(), query_emb.end(),
            stacked.row(candidates.size()));

  PcaModel pca = fit_pca(stacked, config.epsilon, config.center);
  Vec rq = pca_transform(pca, query_emb);

  std::vector<std::pair<std::string, double>> scored;
  scored.reserve(candidates.size());
  for (const auto& [id, vec] : candidates) {
    Vec rc = pca_transform(pca, vec);
    double score = config.metric == LoreMetric::kInnerProduct
                       ? dot(rq, rc)
                       : gaussian_kernel(rq, rc, config.sigma);
    scored.emplace_back(id, score);
  }
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  scored.resize(n);
  return scored;
}

}  // namespace dqlore
