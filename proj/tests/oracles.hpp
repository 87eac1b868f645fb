// SPDX-License-Identifier: Apache-2.0
//
// Test-side oracles, independent of the library's compute paths:
//  - central finite-difference gradient checks
//  - a plain vanilla-GRU step (summation order matches the matmul kernel:
//    contributions accumulate over the contraction index in ascending order)
//  - brute-force minimal-edit distance by exhaustive recursion

#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "avsr/tensor.hpp"

namespace oracles {

inline double rel_err(double a, double b) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale < 1e-7) return 0.0;  // both effectively zero
  return std::abs(a - b) / scale;
}

struct GradCheckResult {
  double max_rel = 0.0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::string worst_leaf;
  int nonsmooth_skips = 0;  // coordinates at a genuine kink (relu/max ties)
  int coords_checked = 0;
};

// fn() must rebuild the graph from the current leaf values and return a
// scalar loss. Checks up to max_coords sampled coordinates per leaf.
//
// Piecewise-linear ops (relu, max-pool) make the loss non-differentiable on
// a measure-zero set; a perturbation of size h straddles such a kink with
// probability O(h). When the first central difference disagrees, the check
// retries with smaller h: a straddle vanishes and the estimate converges,
// while a true gradient bug stays wrong at every h. Coordinates that sit
// exactly on a kink (large second difference at every h) are counted and
// skipped.
inline GradCheckResult grad_check(const std::function<avsr::Tensor()>& fn,
                                  const std::vector<std::pair<std::string, avsr::Tensor>>& leaves,
                                  std::mt19937_64& rng, double h = 1e-5,
                                  int max_coords = 24) {
  avsr::Tensor loss = fn();
  const double f0 = loss.item();
  for (auto& [name, leaf] : leaves) {
    avsr::Tensor t = leaf;
    t.zero_grad();
  }
  loss.backward();

  std::vector<std::vector<double>> analytic;
  for (const auto& [name, leaf] : leaves)
    analytic.emplace_back(leaf.grad().begin(), leaf.grad().end());

  GradCheckResult result;
  for (size_t li = 0; li < leaves.size(); ++li) {
    avsr::Tensor leaf = leaves[li].second;
    const int64_t n = leaf.numel();
    std::vector<int64_t> coords;
    if (n <= max_coords) {
      for (int64_t i = 0; i < n; ++i) coords.push_back(i);
    } else {
      std::uniform_int_distribution<int64_t> pick(0, n - 1);
      for (int c = 0; c < max_coords; ++c) coords.push_back(pick(rng));
    }
    for (int64_t i : coords) {
      const double saved = leaf.data()[i];
      const double a = analytic[li][static_cast<size_t>(i)];
      double best_e = -1.0, best_numeric = 0.0;
      double best_abs = std::numeric_limits<double>::infinity();
      bool smooth_somewhere = false;
      // larger steps escape the cancellation noise floor of tiny gradients
      // (BN-scale-degenerate coordinates), smaller steps resolve kink
      // straddles
      for (const double step : {h, 10.0 * h, 100.0 * h, h / 10.0, h / 100.0}) {
        double fp, fm;
        {
          avsr::NoGradGuard no_grad;
          leaf.mutable_data()[i] = saved + step;
          fp = fn().item();
          leaf.mutable_data()[i] = saved - step;
          fm = fn().item();
          leaf.mutable_data()[i] = saved;
        }
        const double numeric = (fp - fm) / (2.0 * step);
        const double e = rel_err(a, numeric);
        if (best_e < 0.0 || e < best_e) {
          best_e = e;
          best_numeric = numeric;
        }
        best_abs = std::min(best_abs, std::abs(a - numeric));
        // second difference is ~ step^2 f'' when smooth but ~ step * jump
        // at a kink; compare against the first-difference scale
        const double curvature = std::abs(fp + fm - 2.0 * f0);
        const double kink_scale =
            0.05 * step * std::max(std::abs(numeric), 1e-9) +
            64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(f0));
        if (curvature <= kink_scale) smooth_somewhere = true;
        if (e < 1e-5) break;
      }
      // components far below the FD resolution (set by cancellation against
      // |f0|) cannot meet a relative tolerance; accept absolute agreement
      // at the resolution limit
      const bool at_resolution_floor =
          best_abs < 1e-7 * std::max(1.0, std::abs(f0));
      if (best_e >= 1e-4 && !at_resolution_floor && !smooth_somewhere) {
        ++result.nonsmooth_skips;  // sits exactly on a kink at every step
        continue;
      }
      ++result.coords_checked;
      if (best_e >= 1e-4 && at_resolution_floor) best_e = 0.0;
      if (best_e > result.max_rel) {
        result.max_rel = best_e;
        result.worst_analytic = a;
        result.worst_numeric = best_numeric;
        result.worst_leaf = leaves[li].first + "[" + std::to_string(i) + "]";
      }
    }
  }
  return result;
}

inline avsr::Tensor random_tensor(avsr::Shape shape, std::mt19937_64& rng,
                                  bool requires_grad = true, double lo = -1.0,
                                  double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<double> data(static_cast<size_t>(avsr::shape_numel(shape)));
  for (auto& d : data) d = u(rng);
  return avsr::Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

// ---------------------------------------------------------------------------
// vanilla GRU, independently coded

struct VanillaGRUWeights {
  int64_t d = 0, n = 0;
  std::vector<double> w_xr, w_hr, b_r;  // [d*n], [n*n], [n]
  std::vector<double> w_xz, w_hz, b_z;
  std::vector<double> w_xh, w_hh, b_h;
};

inline void vanilla_gru_step(const VanillaGRUWeights& w, const double* x,
                             const double* h_prev, double* h_out) {
  const int64_t d = w.d, n = w.n;
  std::vector<double> xr(n, 0.0), hr(n, 0.0), xz(n, 0.0), hz(n, 0.0), xh(n, 0.0);
  for (int64_t k = 0; k < d; ++k)
    for (int64_t j = 0; j < n; ++j) {
      xr[j] += x[k] * w.w_xr[k * n + j];
      xz[j] += x[k] * w.w_xz[k * n + j];
      xh[j] += x[k] * w.w_xh[k * n + j];
    }
  for (int64_t k = 0; k < n; ++k)
    for (int64_t j = 0; j < n; ++j) {
      hr[j] += h_prev[k] * w.w_hr[k * n + j];
      hz[j] += h_prev[k] * w.w_hz[k * n + j];
    }
  std::vector<double> r(n), z(n);
  for (int64_t j = 0; j < n; ++j) {
    r[j] = 1.0 / (1.0 + std::exp(-((xr[j] + hr[j]) + w.b_r[j])));
    z[j] = 1.0 / (1.0 + std::exp(-((xz[j] + hz[j]) + w.b_z[j])));
  }
  std::vector<double> rh(n), hh(n, 0.0);
  for (int64_t j = 0; j < n; ++j) rh[j] = r[j] * h_prev[j];
  for (int64_t k = 0; k < n; ++k)
    for (int64_t j = 0; j < n; ++j) hh[j] += rh[k] * w.w_hh[k * n + j];
  for (int64_t j = 0; j < n; ++j) {
    const double hc = std::tanh((xh[j] + hh[j]) + w.b_h[j]);
    h_out[j] = z[j] * h_prev[j] + (1.0 - z[j]) * hc;
  }
}

// ---------------------------------------------------------------------------
// exhaustive edit distance

// Walks every alignment path (match/substitute, delete, insert) without
// memoization; fine for the <= 6-word sequences it is used on.
inline int enumerate_alignments(const std::vector<std::string>& ref,
                                const std::vector<std::string>& hyp, size_t i,
                                size_t j) {
  if (i == ref.size()) return static_cast<int>(hyp.size() - j);
  if (j == hyp.size()) return static_cast<int>(ref.size() - i);
  int best = enumerate_alignments(ref, hyp, i + 1, j + 1) + (ref[i] == hyp[j] ? 0 : 1);
  best = std::min(best, enumerate_alignments(ref, hyp, i + 1, j) + 1);
  best = std::min(best, enumerate_alignments(ref, hyp, i, j + 1) + 1);
  return best;
}

inline int min_edits_oracle(const std::vector<std::string>& ref,
                            const std::vector<std::string>& hyp) {
  return enumerate_alignments(ref, hyp, 0, 0);
}

}  // namespace oracles
