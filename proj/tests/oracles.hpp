#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dqlore/common.hpp"
#include "dqlore/corpus.hpp"

// Reference implementations kept deliberately independent of the library
// internals: own tokenizer, own sort rules, own math. Tests compare the
// library against these rather than against values copied out of it.

namespace oracle {

std::vector<std::string> tokens(const std::string& text);

// Okapi BM25 score of one document for a bag-of-words query, computed
// directly from the token lists with no inverted index.
double bm25_score(const std::vector<std::vector<std::string>>& docs,
                  const std::vector<std::string>& query, std::size_t doc,
                  double k1, double b);

// Cyclic Jacobi eigendecomposition of a symmetric matrix. Eigenvalues come
// back in descending order; vectors.row(i) is the unit eigenvector for
// values[i].
struct EigenResult {
  std::vector<double> values;
  dqlore::Matrix vectors;
};
EigenResult jacobi_eigen(const dqlore::Matrix& sym);

// Covariance of X with the population divisor (rows), optionally centering.
dqlore::Matrix covariance(const dqlore::Matrix& X, bool center);

// Rebuilds one contrastive instance from scratch for a mock-scored corpus:
// ranks the given candidates by a from-scratch BM25 over the anchor's
// question, recomputes the mock log-probs via set difference, then applies
// the published ordering (score desc, rank asc, id asc) and takes the top and
// bottom t.
struct SplitResult {
  std::vector<std::string> positives;
  std::vector<std::string> negatives;
};
SplitResult rebuild_instance(const dqlore::Pool& pool,
                             const dqlore::Exemplar& anchor,
                             const std::vector<std::string>& candidate_ids,
                             double alpha, std::size_t t, double k1 = 1.5,
                             double b = 0.75);

}  // namespace oracle
