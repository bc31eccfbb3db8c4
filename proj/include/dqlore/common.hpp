#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dqlore {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// malformed input data (bad JSON, wrong field types, broken JSONL lines)
struct ParseError : Error {
  using Error::Error;
};

// structurally valid input that violates a contract (duplicate ids, empty
// fields, dimension mismatches, out-of-range parameters)
struct ValidationError : Error {
  using Error::Error;
};

// remote endpoint rejected the request because the prompt is too long
struct ContextLengthError : Error {
  using Error::Error;
};

// remote endpoint returned a response we cannot interpret
struct ProtocolError : Error {
  using Error::Error;
};

// bad command line or config file (CLI exits with 2 instead of 1)
struct UsageError : Error {
  using Error::Error;
};

// Deterministic RNG. All draws go through our own integer/float mapping so
// results are identical across platforms and standard library versions
// (std::uniform_int_distribution and friends are not portable).
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // uniform integer in [0, n), n > 0
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ValidationError("Rng::below: n must be positive");
    // rejection sampling to avoid modulo bias
    std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  // uniform double in [0, 1)
  double uniform01() {
    return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
  }

  // standard normal via Box-Muller
  double normal() {
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1, u2;
    do {
      u1 = uniform01();
    } while (u1 <= 0.0);
    u2 = uniform01();
    double r = std::sqrt(-2.0 * std::log(u1));
    double theta = 6.283185307179586476925286766559 * u2;
    spare_ = r * std::sin(theta);
    have_spare_ = true;
    return r * std::cos(theta);
  }

  // Fisher-Yates
  template <class T>
  void shuffle(std::vector<T>& v) {
    if (v.size() < 2) return;
    for (std::size_t i = v.size() - 1; i > 0; --i) {
      std::size_t j = static_cast<std::size_t>(below(i + 1));
      std::swap(v[i], v[j]);
    }
  }

 private:
  std::mt19937_64 gen_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

using Vec = std::vector<double>;

// dense row-major matrix
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }
};

inline double dot(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw ValidationError("dot: dimension mismatch (" + std::to_string(a.size()) +
                          " vs " + std::to_string(b.size()) + ")");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double squared_distance(const Vec& a, const Vec& b) {
  if (a.size() != b.size())
    throw ValidationError("squared_distance: dimension mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

// y = W x
inline Vec matvec(const Matrix& W, const Vec& x) {
  if (W.cols != x.size())
    throw ValidationError("matvec: dimension mismatch");
  Vec y(W.rows, 0.0);
  for (std::size_t r = 0; r < W.rows; ++r) {
    const double* wr = W.row(r);
    double s = 0.0;
    for (std::size_t c = 0; c < W.cols; ++c) s += wr[c] * x[c];
    y[r] = s;
  }
  return y;
}

// 64-bit FNV-1a
inline std::uint64_t fnv1a64(const std::string& s, std::uint64_t basis_xor = 0) {
  std::uint64_t h = 14695981039346656037ULL ^ basis_xor;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace dqlore
