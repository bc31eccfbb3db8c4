#include "dqlore/viz.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "dqlore/kernels.hpp"
#include "dqlore/lore.hpp"

namespace dqlore {

Matrix pca_2d(const Matrix& X) {
  if (X.rows < 3) throw ValidationError("pca_2d: need at least 3 rows");
  PcaModel pca = fit_pca(X, 2, true);
  Matrix out(X.rows, 2);
  Vec v(X.cols);
  for (std::size_t i = 0; i < X.rows; ++i) {
    std::copy(X.row(i), X.row(i) + X.cols, v.begin());
    Vec t = pca_transform(pca, v);
    out.at(i, 0) = t[0];
    out.at(i, 1) = t.size() > 1 ? t[1] : 0.0;
  }
  return out;
}

namespace {

constexpr double kLn2 = 0.6931471805599453;

void check_tsne_pre(const Matrix& X, double perplexity) {
  if (X.rows < 4) throw ValidationError("tsne: need at least 4 rows");
  double bound = (static_cast<double>(X.rows) - 1.0) / 3.0;
  if (!(perplexity > 1.0) || !(perplexity < bound))
    throw ValidationError("tsne: perplexity must be in (1, (n-1)/3) = (1, " +
                          std::to_string(bound) + ")");
}

}  // namespace

Matrix conditional_affinities(const Matrix& X, double perplexity) {
  check_tsne_pre(X, perplexity);
  std::size_t n = X.rows;
  Matrix D;
  kernels::pairwise_sq_dists(X, D);

  double target_bits = std::log2(perplexity);
  Matrix P(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double beta = 1.0;
    double beta_min = -std::numeric_limits<double>::infinity();
    double beta_max = std::numeric_limits<double>::infinity();
    const double* d = D.row(i);
    double* p = P.row(i);
    for (int it = 0; it < 50; ++it) {
      double sum = 0.0;
      double weighted = 0.0;  // sum of d * exp(-beta d)
      for (std::size_t j = 0; j < n; ++j) {
        if (j == i) {
          p[j] = 0.0;
          continue;
        }
        p[j] = std::exp(-beta * d[j]);
        sum += p[j];
        weighted += d[j] * p[j];
      }
      // Shannon entropy in bits: H = (beta * E[d] + ln(sum)) / ln 2
      double h_bits = (beta * weighted / sum + std::log(sum)) / kLn2;
      double diff = h_bits - target_bits;
      if (std::abs(diff) < 1e-5) break;
      if (diff > 0) {  // too flat, narrow the kernel
        beta_min = beta;
        beta = std::isinf(beta_max) ? beta * 2.0 : (beta + beta_max) / 2.0;
      } else {
        beta_max = beta;
        beta = std::isinf(beta_min) ? beta / 2.0 : (beta + beta_min) / 2.0;
      }
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) sum += p[j];
    for (std::size_t j = 0; j < n; ++j) p[j] /= sum;
  }
  return P;
}

Matrix symmetrized_affinities(const Matrix& X, double perplexity) {
  Matrix C = conditional_affinities(X, perplexity);
  std::size_t n = C.rows;
  Matrix P(n, n);
  double scale = 1.0 / (2.0 * static_cast<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      P.at(i, j) = (C.at(i, j) + C.at(j, i)) * scale;
  return P;
}

namespace {

double kl_divergence(const Matrix& P, const Matrix& Y) {
  Matrix D, N;
  Vec row_sums;
  kernels::pairwise_sq_dists(Y, D);
  kernels::student_t_weights(D, N, row_sums);
  double sum_n = 0.0;
  for (double s : row_sums) sum_n += s;
  double kl = 0.0;
  for (std::size_t i = 0; i < P.rows; ++i)
    for (std::size_t j = 0; j < P.cols; ++j) {
      double p = P.at(i, j);
      if (p <= 0.0 || i == j) continue;
      double q = N.at(i, j) / sum_n;
      kl += p * std::log(p / q);
    }
  return kl;
}

}  // namespace

Matrix tsne(const Matrix& X, const TsneConfig& config, TsneDiagnostics* diag) {
  check_tsne_pre(X, config.perplexity);
  if (config.iters == 0) throw ValidationError("tsne: iters must be positive");
  std::size_t n = X.rows;

  Matrix P = symmetrized_affinities(X, config.perplexity);
  Matrix P_ex = P;
  for (double& p : P_ex.data) p *= 4.0;

  Rng rng(config.seed);
  Matrix Y(n, 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < 2; ++c) Y.at(i, c) = rng.normal() * 1e-4;

  Matrix velocity(n, 2);
  for (std::size_t iter = 1; iter <= config.iters; ++iter) {
    const Matrix& P_use = iter <= 100 ? P_ex : P;
    Matrix D, N, G;
    Vec row_sums;
    kernels::pairwise_sq_dists(Y, D);
    kernels::student_t_weights(D, N, row_sums);
    double sum_n = 0.0;
    for (double s : row_sums) sum_n += s;
    kernels::map_gradient(P_use, N, sum_n, Y, G);

    double momentum = iter < 250 ? 0.5 : 0.8;
    for (std::size_t i = 0; i < Y.data.size(); ++i) {
      velocity.data[i] =
          momentum * velocity.data[i] - config.learning_rate * G.data[i];
      Y.data[i] += velocity.data[i];
    }
    if (diag && iter % 100 == 0)
      diag->kl_checkpoints.emplace_back(iter, kl_divergence(P, Y));
  }
  return Y;
}

void export_scatter(const std::vector<VizPoint>& points,
                    const std::string& base_path) {
  for (const VizPoint& p : points)
    if (!std::isfinite(p.x) || !std::isfinite(p.y))
      throw ValidationError("export_scatter: non-finite coordinate for '" +
                            p.id + "'");

  auto fmt = [](double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return std::string(buf);
  };

  std::ofstream csv(base_path + ".csv");
  if (!csv) throw Error("cannot write " + base_path + ".csv");
  csv << "id,label,stage,x,y\n";
  for (const VizPoint& p : points)
    csv << p.id << "," << p.label << "," << p.stage << "," << fmt(p.x) << ","
        << fmt(p.y) << "\n";
  if (!csv) throw Error("write failed: " + base_path + ".csv");

  double min_x = 0.0, max_x = 1.0, min_y = 0.0, max_y = 1.0;
  if (!points.empty()) {
    min_x = max_x = points[0].x;
    min_y = max_y = points[0].y;
    for (const VizPoint& p : points) {
      min_x = std::min(min_x, p.x);
      max_x = std::max(max_x, p.x);
      min_y = std::min(min_y, p.y);
      max_y = std::max(max_y, p.y);
    }
  }
  double span_x = max_x - min_x, span_y = max_y - min_y;
  if (span_x <= 0.0) span_x = 1.0;
  if (span_y <= 0.0) span_y = 1.0;
  const double w = 640.0, h = 480.0, pad = 40.0;
  auto sx = [&](double x) { return pad + (x - min_x) / span_x * (w - 2 * pad); };
  auto sy = [&](double y) { return h - pad - (y - min_y) / span_y * (h - 2 * pad); };

  std::ofstream svg(base_path + ".svg");
  if (!svg) throw Error("cannot write " + base_path + ".svg");
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"640\" "
         "height=\"480\" viewBox=\"0 0 640 480\">\n"
      << "<style>.good{fill:#2b6cb0}.bad{fill:#c53030}.query{fill:#1a1a1a}"
         "circle{opacity:0.85}</style>\n"
      << "<rect width=\"640\" height=\"480\" fill=\"#ffffff\"/>\n";
  for (const VizPoint& p : points) {
    double r = p.label == "query" ? 7.0 : 4.0;
    svg << "<circle class=\"" << p.label << "\" cx=\"" << fmt(sx(p.x))
        << "\" cy=\"" << fmt(sy(p.y)) << "\" r=\"" << fmt(r) << "\"><title>"
        << p.id << "</title></circle>\n";
  }
  svg << "</svg>\n";
  if (!svg) throw Error("write failed: " + base_path + ".svg");
}

}  // namespace dqlore
