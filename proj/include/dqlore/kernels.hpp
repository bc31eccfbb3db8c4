#pragma once

#include "dqlore/common.hpp"

// Hot loops shared by the encoder, re-ranker and map layout. Each kernel has
// a serial reference and an OpenMP variant; the parallel loops only write
// disjoint output rows and keep per-row accumulation order fixed, so both
// variants produce bit-identical results at any thread count.

namespace dqlore::kernels {

// Y[i] = W * X[i] for every row i of X. Y is resized to (X.rows, W.rows).
void project_rows_serial(const Matrix& W, const Matrix& X, Matrix& Y);
void project_rows(const Matrix& W, const Matrix& X, Matrix& Y);

// out[i] = q . E[i]
void dot_scores_serial(const Vec& q, const Matrix& E, Vec& out);
void dot_scores(const Vec& q, const Matrix& E, Vec& out);

// D[i][j] = ||X[i] - X[j]||^2, full symmetric matrix with zero diagonal
void pairwise_sq_dists_serial(const Matrix& X, Matrix& D);
void pairwise_sq_dists(const Matrix& X, Matrix& D);

// Student-t affinities over squared distances: N[i][j] = 1/(1 + D[i][j]),
// zero diagonal. Row sums are returned so the caller can form the global
// normalizer in fixed index order.
void student_t_weights_serial(const Matrix& D, Matrix& N, Vec& row_sums);
void student_t_weights(const Matrix& D, Matrix& N, Vec& row_sums);

// Map-space gradient: G[i] = 4 * sum_j (P[i][j] - N[i][j]/sum_n) * N[i][j]
//                              * (Y[i] - Y[j])
void map_gradient_serial(const Matrix& P, const Matrix& N, double sum_n,
                         const Matrix& Y, Matrix& G);
void map_gradient(const Matrix& P, const Matrix& N, double sum_n,
                  const Matrix& Y, Matrix& G);

}  // namespace dqlore::kernels
