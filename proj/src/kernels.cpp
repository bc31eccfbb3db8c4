#include "dqlore/kernels.hpp"

namespace dqlore::kernels {

namespace {

inline void project_row(const Matrix& W, const Matrix& X, Matrix& Y,
                        std::size_t i) {
  const double* x = X.row(i);
  double* y = Y.row(i);
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double* w = W.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < W.cols; ++c) s += w[c] * x[c];
    y[r] = s;
  }
}

inline double dot_row(const Vec& q, const Matrix& E, std::size_t i) {
  const double* e = E.row(i);
  double s = 0.0;
  for (std::size_t c = 0; c < E.cols; ++c) s += q[c] * e[c];
  return s;
}

inline void sq_dist_row(const Matrix& X, Matrix& D, std::size_t i) {
  const double* xi = X.row(i);
  double* d = D.row(i);
  for (std::size_t j = 0; j < X.rows; ++j) {
    if (j == i) {
      d[j] = 0.0;
      continue;
    }
    const double* xj = X.row(j);
    double s = 0.0;
    for (std::size_t c = 0; c < X.cols; ++c) {
      double t = xi[c] - xj[c];
      s += t * t;
    }
    d[j] = s;
  }
}

inline void student_row(const Matrix& D, Matrix& N, Vec& row_sums,
                        std::size_t i) {
  const double* d = D.row(i);
  double* n = N.row(i);
  double s = 0.0;
  for (std::size_t j = 0; j < D.cols; ++j) {
    if (j == i) {
      n[j] = 0.0;
      continue;
    }
    n[j] = 1.0 / (1.0 + d[j]);
    s += n[j];
  }
  row_sums[i] = s;
}

inline void grad_row(const Matrix& P, const Matrix& N, double inv_sum_n,
                     const Matrix& Y, Matrix& G, std::size_t i) {
  const double* yi = Y.row(i);
  double* g = G.row(i);
  for (std::size_t c = 0; c < Y.cols; ++c) g[c] = 0.0;
  for (std::size_t j = 0; j < Y.rows; ++j) {
    if (j == i) continue;
    double q = N.at(i, j) * inv_sum_n;
    double mult = 4.0 * (P.at(i, j) - q) * N.at(i, j);
    const double* yj = Y.row(j);
    for (std::size_t c = 0; c < Y.cols; ++c) g[c] += mult * (yi[c] - yj[c]);
  }
}

}  // namespace

void project_rows_serial(const Matrix& W, const Matrix& X, Matrix& Y) {
  if (W.cols != X.cols)
    throw ValidationError("project_rows: W.cols != X.cols");
  Y = Matrix(X.rows, W.rows);
  for (std::size_t i = 0; i < X.rows; ++i) project_row(W, X, Y, i);
}

void project_rows(const Matrix& W, const Matrix& X, Matrix& Y) {
  if (W.cols != X.cols)
    throw ValidationError("project_rows: W.cols != X.cols");
  Y = Matrix(X.rows, W.rows);
  const long n = static_cast<long>(X.rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i)
    project_row(W, X, Y, static_cast<std::size_t>(i));
}

void dot_scores_serial(const Vec& q, const Matrix& E, Vec& out) {
  if (q.size() != E.cols) throw ValidationError("dot_scores: dim mismatch");
  out.assign(E.rows, 0.0);
  for (std::size_t i = 0; i < E.rows; ++i) out[i] = dot_row(q, E, i);
}

void dot_scores(const Vec& q, const Matrix& E, Vec& out) {
  if (q.size() != E.cols) throw ValidationError("dot_scores: dim mismatch");
  out.assign(E.rows, 0.0);
  const long n = static_cast<long>(E.rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = dot_row(q, E, static_cast<std::size_t>(i));
}

void pairwise_sq_dists_serial(const Matrix& X, Matrix& D) {
  D = Matrix(X.rows, X.rows);
  for (std::size_t i = 0; i < X.rows; ++i) sq_dist_row(X, D, i);
}

void pairwise_sq_dists(const Matrix& X, Matrix& D) {
  D = Matrix(X.rows, X.rows);
  const long n = static_cast<long>(X.rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) sq_dist_row(X, D, static_cast<std::size_t>(i));
}

void student_t_weights_serial(const Matrix& D, Matrix& N, Vec& row_sums) {
  N = Matrix(D.rows, D.cols);
  row_sums.assign(D.rows, 0.0);
  for (std::size_t i = 0; i < D.rows; ++i) student_row(D, N, row_sums, i);
}

void student_t_weights(const Matrix& D, Matrix& N, Vec& row_sums) {
  N = Matrix(D.rows, D.cols);
  row_sums.assign(D.rows, 0.0);
  const long n = static_cast<long>(D.rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) student_row(D, N, row_sums, static_cast<std::size_t>(i));
}

void map_gradient_serial(const Matrix& P, const Matrix& N, double sum_n,
                         const Matrix& Y, Matrix& G) {
  G = Matrix(Y.rows, Y.cols);
  double inv = 1.0 / sum_n;
  for (std::size_t i = 0; i < Y.rows; ++i) grad_row(P, N, inv, Y, G, i);
}

void map_gradient(const Matrix& P, const Matrix& N, double sum_n,
                  const Matrix& Y, Matrix& G) {
  G = Matrix(Y.rows, Y.cols);
  double inv = 1.0 / sum_n;
  const long n = static_cast<long>(Y.rows);
#pragma omp parallel for schedule(static)
  for (long i = 0; i < n; ++i) grad_row(P, N, inv, Y, G, static_cast<std::size_t>(i));
}

}  // namespace dqlore::kernels
