// Times the serial reference kernels against their OpenMP variants and
// checks that both produce identical bytes.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "dqlore/common.hpp"
#include "dqlore/kernels.hpp"

namespace {

using dqlore::Matrix;
using dqlore::Rng;
using dqlore::Vec;
namespace kernels = dqlore::kernels;

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& x : m.data) x = rng.normal();
  return m;
}

template <class F>
double time_ms(F&& f, int reps) {
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) f();
  auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

bool same_bytes(const Matrix& a, const Matrix& b) {
  return a.rows == b.rows && a.cols == b.cols &&
         std::memcmp(a.data.data(), b.data.data(),
                     a.data.size() * sizeof(double)) == 0;
}

void report(const char* name, double serial_ms, double parallel_ms,
            bool identical) {
  std::printf("%-22s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms,
              identical ? "bit-identical" : "MISMATCH");
}

}  // namespace

int main(int argc, char** argv) {
  int reps = argc > 1 ? std::atoi(argv[1]) : 5;
  if (reps < 1) reps = 1;
#ifdef _OPENMP
  std::printf("openmp threads: %d\n", omp_get_max_threads());
#else
  std::printf("openmp: disabled at build time\n");
#endif

  Rng rng(42);
  const std::size_t n = 2000, d_in = 768, d_out = 256;
  Matrix W = random_matrix(d_out, d_in, rng);
  Matrix X = random_matrix(n, d_in, rng);
  Vec q(d_out);
  for (double& x : q) x = rng.normal();

  {
    Matrix ys, yp;
    double ts = time_ms([&] { kernels::project_rows_serial(W, X, ys); }, reps);
    double tp = time_ms([&] { kernels::project_rows(W, X, yp); }, reps);
    report("project_rows", ts, tp, same_bytes(ys, yp));
  }

  Matrix E = random_matrix(n, d_out, rng);
  {
    Vec ss, sp;
    double ts = time_ms([&] { kernels::dot_scores_serial(q, E, ss); }, reps);
    double tp = time_ms([&] { kernels::dot_scores(q, E, sp); }, reps);
    bool same = ss.size() == sp.size() &&
                std::memcmp(ss.data(), sp.data(), ss.size() * sizeof(double)) == 0;
    std::printf("%-22s serial %9.3f ms   parallel %9.3f ms   speedup %5.2fx   %s\n",
                "dot_scores", ts, tp, ts / tp, same ? "bit-identical" : "MISMATCH");
  }

  Matrix P = random_matrix(400, 32, rng);
  {
    Matrix ds, dp;
    double ts = time_ms([&] { kernels::pairwise_sq_dists_serial(P, ds); }, reps);
    double tp = time_ms([&] { kernels::pairwise_sq_dists(P, dp); }, reps);
    report("pairwise_sq_dists", ts, tp, same_bytes(ds, dp));
  }

  {
    Matrix D;
    kernels::pairwise_sq_dists_serial(P, D);
    Matrix ns, np;
    Vec rs, rp;
    double ts =
        time_ms([&] { kernels::student_t_weights_serial(D, ns, rs); }, reps);
    double tp = time_ms([&] { kernels::student_t_weights(D, np, rp); }, reps);
    report("student_t_weights", ts, tp, same_bytes(ns, np));

    Matrix Y = random_matrix(400, 2, rng);
    Matrix Paff(400, 400, 1.0 / (400.0 * 399.0));
    double sum_n = 0.0;
    for (double s : rs) sum_n += s;
    Matrix gs, gp;
    double tgs = time_ms(
        [&] { kernels::map_gradient_serial(Paff, ns, sum_n, Y, gs); }, reps);
    double tgp =
        time_ms([&] { kernels::map_gradient(Paff, ns, sum_n, Y, gp); }, reps);
    report("map_gradient", tgs, tgp, same_bytes(gs, gp));
  }
  return 0;
}
