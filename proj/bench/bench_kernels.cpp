// SPDX-License-Identifier: Apache-2.0
//
// Wall-clock comparison of the OpenMP kernels against the serial reference,
// plus a cross-check of the results. Usage: bench_kernels [--quick]

#include <omp.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <vector>

#include "avsr/kernels.hpp"

namespace {

using avsr::kernels::Conv1dGeom;
using avsr::kernels::Conv3dGeom;
using Clock = std::chrono::steady_clock;

std::vector<double> random_vec(size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> v(n);
  for (auto& x : v) x = u(rng);
  return v;
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <class F>
double time_ms(F&& fn, int reps) {
  fn();  // warm-up
  const auto t0 = Clock::now();
  for (int r = 0; r < reps; ++r) fn();
  const auto t1 = Clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count() / reps;
}

void report(const char* name, double serial_ms, double parallel_ms, double diff) {
  std::printf("%-22s serial %8.2f ms   openmp %8.2f ms   speedup %4.2fx   max|diff| %.3g\n",
              name, serial_ms, parallel_ms, serial_ms / parallel_ms, diff);
}

}  // namespace

int main(int argc, char** argv) {
  const bool quick = argc > 1 && std::string_view(argv[1]) == "--quick";
  const int reps = quick ? 2 : 5;
  const double scale = quick ? 0.25 : 1.0;
  std::mt19937_64 rng(7);

  std::printf("threads: %d\n", omp_get_max_threads());

  {
    const int64_t m = static_cast<int64_t>(384 * scale) + 64;
    const int64_t k = m, n = m;
    auto a = random_vec(static_cast<size_t>(m * k), rng);
    auto b = random_vec(static_cast<size_t>(k * n), rng);
    std::vector<double> y1(static_cast<size_t>(m * n)), y2(y1.size());
    const double ts = time_ms([&] { avsr::kernels::ref::matmul(a.data(), b.data(), y1.data(), m, k, n); }, reps);
    const double tp = time_ms([&] { avsr::kernels::matmul(a.data(), b.data(), y2.data(), m, k, n); }, reps);
    report("matmul", ts, tp, max_abs_diff(y1, y2));
  }

  {
    Conv1dGeom g;
    g.in_ch = 64;
    g.out_ch = 64;
    g.in_len = static_cast<int64_t>(512 * scale) + 64;
    g.kernel = 5;
    g.pad_lo = 2;
    g.pad_hi = 2;
    auto x = random_vec(static_cast<size_t>(g.in_ch * g.in_len), rng);
    auto w = random_vec(static_cast<size_t>(g.out_ch * g.in_ch * g.kernel), rng);
    std::vector<double> y1(static_cast<size_t>(g.out_ch * g.out_len())), y2(y1.size());
    const double ts = time_ms([&] { avsr::kernels::ref::conv1d(g, x.data(), w.data(), y1.data()); }, reps);
    const double tp = time_ms([&] { avsr::kernels::conv1d(g, x.data(), w.data(), y2.data()); }, reps);
    report("conv1d", ts, tp, max_abs_diff(y1, y2));

    std::vector<double> gx1(x.size(), 0.0), gx2(x.size(), 0.0);
    const double gs = time_ms([&] { avsr::kernels::ref::conv1d_grad_x(g, y1.data(), w.data(), gx1.data()); }, reps);
    const double gp = time_ms([&] { avsr::kernels::conv1d_grad_x(g, y1.data(), w.data(), gx2.data()); }, reps);
    report("conv1d_grad_x", gs, gp, 0.0);
  }

  {
    Conv3dGeom g;
    g.in_ch = 4;
    g.out_ch = 8;
    g.t = 8;
    g.h = static_cast<int64_t>(48 * scale) + 16;
    g.w = g.h;
    g.kt = 3;
    g.kh = 3;
    g.kw = 3;
    g.pt = 1;
    g.ph = 1;
    g.pw = 1;
    auto x = random_vec(static_cast<size_t>(g.in_ch * g.t * g.h * g.w), rng);
    auto w = random_vec(static_cast<size_t>(g.out_ch * g.in_ch * 27), rng);
    std::vector<double> y1(static_cast<size_t>(g.out_ch * g.out_t() * g.out_h() * g.out_w()));
    std::vector<double> y2(y1.size());
    const double ts = time_ms([&] { avsr::kernels::ref::conv3d(g, x.data(), w.data(), y1.data()); }, reps);
    const double tp = time_ms([&] { avsr::kernels::conv3d(g, x.data(), w.data(), y2.data()); }, reps);
    report("conv3d", ts, tp, max_abs_diff(y1, y2));
  }

  return 0;
}
