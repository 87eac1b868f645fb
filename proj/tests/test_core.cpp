// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <omp.h>

#include <filesystem>
#include <random>

#include "avsr/checkpoint.hpp"
#include "avsr/error.hpp"
#include "avsr/kernels.hpp"
#include "avsr/nn.hpp"
#include "avsr/ops.hpp"
#include "oracles.hpp"

using namespace avsr;
namespace fs = std::filesystem;

TEST_SUITE("tensor") {
  TEST_CASE("shape and data invariants") {
    Tensor t = Tensor::zeros({2, 3});
    CHECK(t.numel() == 6);
    CHECK_THROWS_AS(Tensor::from_data({2, 3}, {1.0, 2.0}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor::zeros({-1}), ShapeError);
  }

  TEST_CASE("grad present iff requires_grad") {
    Tensor a = Tensor::zeros({3}, true);
    CHECK(a.grad().size() == 3);
    Tensor b = Tensor::zeros({3});
    CHECK_THROWS_AS(b.grad(), ContractError);
  }

  TEST_CASE("backward requires scalar") {
    Tensor a = Tensor::zeros({2, 2}, true);
    CHECK_THROWS_AS(backward(a), ContractError);
  }

  TEST_CASE("sum gradient is ones; repeated calls accumulate") {
    Tensor x = Tensor::from_data({4}, {1.0, -2.0, 0.5, 3.0}, true);
    Tensor loss = ops::sum(x);
    loss.backward();
    for (double g : x.grad()) CHECK(g == 1.0);
    loss.backward();
    for (double g : x.grad()) CHECK(g == 2.0);
  }

  TEST_CASE("grad of sum(x*x) is 2x") {
    Tensor x = Tensor::from_data({3}, {1.0, -2.0, 0.5}, true);
    Tensor loss = ops::sum(ops::mul(x, x));
    loss.backward();
    for (int i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(2.0 * x.data()[i]));
  }

  TEST_CASE("deep graphs tear down without stack overflow") {
    Tensor x = Tensor::from_data({8}, std::vector<double>(8, 0.01), true);
    Tensor h = x;
    for (int i = 0; i < 60000; ++i) h = ops::scale(h, 1.0);
    CHECK(h.numel() == 8);
  }
}

TEST_SUITE("matmul") {
  TEST_CASE("identity") {
    Tensor i2 = Tensor::from_data({2, 2}, {1, 0, 0, 1});
    Tensor m = Tensor::from_data({2, 2}, {2, 3, 4, 5});
    Tensor y = ops::matmul(i2, m);
    CHECK(y.data()[0] == 2.0);
    CHECK(y.data()[1] == 3.0);
    CHECK(y.data()[2] == 4.0);
    CHECK(y.data()[3] == 5.0);
  }

  TEST_CASE("1x2 by 2x1") {
    Tensor a = Tensor::from_data({1, 2}, {1, 2});
    Tensor b = Tensor::from_data({2, 1}, {3, 4});
    CHECK(ops::matmul(a, b).item() == 11.0);
  }

  TEST_CASE("shape mismatch names both shapes") {
    Tensor a = Tensor::zeros({2, 3});
    Tensor b = Tensor::zeros({4, 2});
    try {
      ops::matmul(a, b);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("[2,3]") != std::string::npos);
      CHECK(msg.find("[4,2]") != std::string::npos);
    }
  }

  TEST_CASE("gradient matches finite differences on 4x5 by 5x3") {
    std::mt19937_64 rng(11);
    Tensor a = oracles::random_tensor({4, 5}, rng);
    Tensor b = oracles::random_tensor({5, 3}, rng);
    auto fn = [&] { return ops::sum(ops::matmul(a, b)); };
    auto res = oracles::grad_check(fn, {{"a", a}, {"b", b}}, rng);
    CHECK(res.max_rel < 1e-6);
  }
}

TEST_SUITE("kernels") {
  TEST_CASE("openmp matches serial reference") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1, 1);

    SUBCASE("matmul") {
      const int64_t m = 17, k = 23, n = 13;
      std::vector<double> a(m * k), b(k * n), y1(m * n), y2(m * n);
      for (auto& x : a) x = u(rng);
      for (auto& x : b) x = u(rng);
      kernels::ref::matmul(a.data(), b.data(), y1.data(), m, k, n);
      kernels::matmul(a.data(), b.data(), y2.data(), m, k, n);
      for (int64_t i = 0; i < m * n; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
    }

    SUBCASE("conv1d variants") {
      for (int variant = 0; variant < 4; ++variant) {
        kernels::Conv1dGeom g;
        g.in_ch = 3;
        g.out_ch = 4;
        g.in_len = 21;
        g.kernel = 3;
        if (variant == 1) {
          g.dilation = 2;
          g.pad_lo = 4;
        }
        if (variant == 2) {
          g.stride = 2;
          g.pad_lo = 1;
          g.pad_hi = 1;
        }
        if (variant == 3) {
          g.transposed = true;
          g.stride = 2;
          g.pad_lo = 1;
        }
        std::vector<double> x(g.in_ch * g.in_len), w(g.out_ch * g.in_ch * g.kernel);
        for (auto& v : x) v = u(rng);
        for (auto& v : w) v = u(rng);
        const auto o = static_cast<size_t>(g.out_ch * g.out_len());
        std::vector<double> y1(o), y2(o);
        kernels::ref::conv1d(g, x.data(), w.data(), y1.data());
        kernels::conv1d(g, x.data(), w.data(), y2.data());
        for (size_t i = 0; i < o; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));

        std::vector<double> gx1(x.size(), 0.0), gx2(x.size(), 0.0);
        kernels::ref::conv1d_grad_x(g, y1.data(), w.data(), gx1.data());
        kernels::conv1d_grad_x(g, y1.data(), w.data(), gx2.data());
        for (size_t i = 0; i < x.size(); ++i)
          CHECK(gx1[i] == doctest::Approx(gx2[i]).epsilon(1e-12));

        std::vector<double> gw1(w.size(), 0.0), gw2(w.size(), 0.0);
        kernels::ref::conv1d_grad_w(g, y1.data(), x.data(), gw1.data());
        kernels::conv1d_grad_w(g, y1.data(), x.data(), gw2.data());
        for (size_t i = 0; i < w.size(); ++i)
          CHECK(gw1[i] == doctest::Approx(gw2[i]).epsilon(1e-12));
      }
    }

    SUBCASE("conv3d") {
      kernels::Conv3dGeom g;
      g.in_ch = 2;
      g.out_ch = 3;
      g.t = 4;
      g.h = 7;
      g.w = 6;
      g.kt = 3;
      g.kh = 3;
      g.kw = 3;
      g.pt = 1;
      g.ph = 1;
      g.pw = 1;
      g.sh = 2;
      g.sw = 2;
      std::vector<double> x(g.in_ch * g.t * g.h * g.w), w(g.out_ch * g.in_ch * 27);
      for (auto& v : x) v = u(rng);
      for (auto& v : w) v = u(rng);
      const auto o = static_cast<size_t>(g.out_ch * g.out_t() * g.out_h() * g.out_w());
      std::vector<double> y1(o), y2(o);
      kernels::ref::conv3d(g, x.data(), w.data(), y1.data());
      kernels::conv3d(g, x.data(), w.data(), y2.data());
      for (size_t i = 0; i < o; ++i) CHECK(y1[i] == doctest::Approx(y2[i]).epsilon(1e-12));
    }
  }

  TEST_CASE("thread count does not change bits") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1, 1);
    const int64_t m = 31, k = 17, n = 29;
    std::vector<double> a(m * k), b(k * n), y1(m * n), y2(m * n);
    for (auto& x : a) x = u(rng);
    for (auto& x : b) x = u(rng);
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    kernels::matmul(a.data(), b.data(), y1.data(), m, k, n);
    omp_set_num_threads(saved > 1 ? saved : 2);
    kernels::matmul(a.data(), b.data(), y2.data(), m, k, n);
    omp_set_num_threads(saved);
    for (int64_t i = 0; i < m * n; ++i) CHECK(y1[i] == y2[i]);
  }
}

TEST_SUITE("conv ops") {
  TEST_CASE("kernel size 1 is identity") {
    Tensor x = Tensor::from_data({1, 3}, {1, 2, 3});
    Tensor w = Tensor::from_data({1, 1, 1}, {1.0});
    Tensor y = ops::conv1d(x, w, 1, 1, false, false);
    CHECK(y.data()[0] == 1.0);
    CHECK(y.data()[1] == 2.0);
    CHECK(y.data()[2] == 3.0);
  }

  TEST_CASE("causal impulse response, K=2") {
    Tensor x = Tensor::from_data({1, 4}, {1, 0, 0, 0});
    Tensor w = Tensor::from_data({1, 1, 2}, {1, 1});
    Tensor y = ops::conv1d(x, w, 1, 1, true, false);
    CHECK(y.dim(1) == 4);
    CHECK(y.data()[0] == 1.0);
    CHECK(y.data()[1] == 1.0);
    CHECK(y.data()[2] == 0.0);
    CHECK(y.data()[3] == 0.0);
  }

  TEST_CASE("causal dilated conv leaves the past untouched") {
    std::mt19937_64 rng(3);
    Tensor w = oracles::random_tensor({2, 2, 3}, rng, false);
    Tensor zero = Tensor::zeros({2, 8});
    std::vector<double> data(16, 0.0);
    data[2] = 1.0;  // impulse at t=2 in channel 0
    Tensor pulse = Tensor::from_data({2, 8}, data);
    Tensor y0 = ops::conv1d(zero, w, 1, 2, true, false);
    Tensor y1 = ops::conv1d(pulse, w, 1, 2, true, false);
    for (int64_t c = 0; c < 2; ++c)
      for (int64_t t = 0; t < 2; ++t)
        CHECK(y0.at({c, t}) == y1.at({c, t}));
    // and the impulse does show up from t=2 on
    bool changed = false;
    for (int64_t c = 0; c < 2; ++c)
      for (int64_t t = 2; t < 8; ++t) changed |= y0.at({c, t}) != y1.at({c, t});
    CHECK(changed);
  }

  TEST_CASE("transposed conv upsamples by the stride") {
    std::mt19937_64 rng(4);
    Tensor x = oracles::random_tensor({3, 6}, rng, false);
    Tensor w = oracles::random_tensor({2, 3, 3}, rng, false);
    Tensor y = ops::conv1d(x, w, 2, 1, false, true);
    CHECK(y.dim(0) == 2);
    CHECK(y.dim(1) == 12);
  }

  TEST_CASE("input shorter than kernel span raises a dimension error") {
    Tensor x = Tensor::zeros({1, 3});
    Tensor w = Tensor::zeros({1, 1, 5});
    CHECK_THROWS_AS(ops::conv1d(x, w, 1, 1, false, false), ShapeError);
  }

  TEST_CASE("causal+transposed is rejected") {
    Tensor x = Tensor::zeros({1, 4});
    Tensor w = Tensor::zeros({1, 1, 3});
    CHECK_THROWS_AS(ops::conv1d(x, w, 2, 1, true, true), ConfigError);
  }

  TEST_CASE("conv1d gradients vs finite differences") {
    std::mt19937_64 rng(12);
    for (bool transposed : {false, true}) {
      Tensor x = oracles::random_tensor({2, 7}, rng);
      Tensor w = oracles::random_tensor({3, 2, 3}, rng);
      Tensor b = oracles::random_tensor({3}, rng);
      auto fn = [&] {
        ops::Conv1dOpts opts;
        opts.stride = transposed ? 2 : 1;
        opts.dilation = 1;
        opts.pad_lo = 1;
        opts.pad_hi = transposed ? 0 : 1;
        opts.transposed = transposed;
        Tensor y = ops::conv1d(x, w, b, opts);
        return ops::sum(ops::mul(y, y));
      };
      auto res = oracles::grad_check(fn, {{"x", x}, {"w", w}, {"b", b}}, rng);
      CHECK(res.max_rel < 1e-6);
    }
  }

  TEST_CASE("conv3d stem shape: [1,T,112,112] -> [64,T,56,56]") {
    kernels::Conv3dGeom g;
    g.in_ch = 1;
    g.out_ch = 64;
    g.t = 5;
    g.h = 112;
    g.w = 112;
    g.kt = 5;
    g.kh = 7;
    g.kw = 7;
    g.st = 1;
    g.sh = 2;
    g.sw = 2;
    g.pt = 2;
    g.ph = 3;
    g.pw = 3;
    CHECK(g.out_t() == 5);
    CHECK(g.out_h() == 56);
    CHECK(g.out_w() == 56);
  }

  TEST_CASE("conv3d zero input gives zero output") {
    Tensor x = Tensor::zeros({2, 3, 5, 5});
    std::mt19937_64 rng(8);
    Tensor w = oracles::random_tensor({4, 2, 3, 3, 3}, rng, false);
    ops::Conv3dOpts opts;
    opts.pt = 1;
    opts.ph = 1;
    opts.pw = 1;
    Tensor y = ops::conv3d(x, w, Tensor(), opts);
    for (double v : y.data()) CHECK(v == 0.0);
  }

  TEST_CASE("conv3d gradient vs finite differences on a 1x3x9x9 toy") {
    std::mt19937_64 rng(13);
    Tensor x = oracles::random_tensor({1, 3, 9, 9}, rng);
    Tensor w = oracles::random_tensor({2, 1, 3, 3, 3}, rng);
    auto fn = [&] {
      ops::Conv3dOpts opts;
      opts.pt = 1;
      opts.ph = 1;
      opts.pw = 1;
      opts.sh = 2;
      opts.sw = 2;
      Tensor y = ops::conv3d(x, w, Tensor(), opts);
      return ops::sum(ops::mul(y, y));
    };
    auto res = oracles::grad_check(fn, {{"x", x}, {"w", w}}, rng);
    CHECK(res.max_rel < 1e-5);
  }
}

TEST_SUITE("elementwise ops") {
  TEST_CASE("sigmoid(0) = 0.5") {
    CHECK(ops::sigmoid(Tensor::scalar(0.0)).item() == 0.5);
  }

  TEST_CASE("l1_loss(x,x) = 0") {
    std::mt19937_64 rng(2);
    Tensor x = oracles::random_tensor({5}, rng, false);
    CHECK(ops::l1_loss(x, x).item() == 0.0);
  }

  TEST_CASE("cross entropy of uniform logits is ln(classes)") {
    Tensor logits = Tensor::zeros({1, 3}, true);
    const double loss = ops::cross_entropy(logits, {1}, 0.1).item();
    CHECK(loss == doctest::Approx(std::log(3.0)).epsilon(1e-12));
  }

  TEST_CASE("cross entropy with smoothing matches closed form") {
    // logits [a,b,c], target 0, eps: loss = lse - (1-e)a - e/3 (a+b+c)
    Tensor logits = Tensor::from_data({1, 3}, {0.2, -0.4, 1.1}, true);
    const double eps = 0.1;
    const double lse = std::log(std::exp(0.2) + std::exp(-0.4) + std::exp(1.1));
    const double want = lse - (1 - eps) * 0.2 - eps / 3.0 * (0.2 - 0.4 + 1.1);
    CHECK(ops::cross_entropy(logits, {0}, eps).item() == doctest::Approx(want).epsilon(1e-12));
  }

  TEST_CASE("cross entropy rejects bad smoothing") {
    Tensor logits = Tensor::zeros({1, 3});
    CHECK_THROWS_AS(ops::cross_entropy(logits, {0}, -0.1), ConfigError);
    CHECK_THROWS_AS(ops::cross_entropy(logits, {0}, 1.5), ConfigError);
  }

  TEST_CASE("dropout p outside [0,1] rejected; eval is identity") {
    std::mt19937_64 rng(6);
    Tensor x = oracles::random_tensor({4, 4}, rng, false);
    CHECK_THROWS_AS(ops::dropout(x, -0.2, true, rng), ConfigError);
    Tensor y = ops::dropout(x, 0.5, false, rng);
    for (int64_t i = 0; i < x.numel(); ++i) CHECK(y.data()[i] == x.data()[i]);
  }

  TEST_CASE("concat then split recovers both operands") {
    std::mt19937_64 rng(7);
    Tensor a = oracles::random_tensor({3, 2}, rng, false);
    Tensor b = oracles::random_tensor({3, 4}, rng, false);
    Tensor c = ops::concat({a, b}, 1);
    auto parts = ops::split(c, 1, {2, 4});
    for (int64_t i = 0; i < a.numel(); ++i) CHECK(parts[0].data()[i] == a.data()[i]);
    for (int64_t i = 0; i < b.numel(); ++i) CHECK(parts[1].data()[i] == b.data()[i]);
  }

  TEST_CASE("elementwise and reduction gradients vs finite differences") {
    std::mt19937_64 rng(21);
    // keep relu/maxpool inputs away from their kinks
    Tensor x = oracles::random_tensor({3, 6}, rng, true, 0.2, 1.4);
    Tensor y = oracles::random_tensor({3, 6}, rng, true, -1.4, -0.2);

    auto check = [&](const char* name, std::function<Tensor()> fn) {
      auto res = oracles::grad_check(fn, {{"x", x}, {"y", y}}, rng);
      INFO(name, ": worst ", res.worst_leaf, " analytic ", res.worst_analytic,
           " numeric ", res.worst_numeric);
      CHECK(res.max_rel < 1e-4);
    };

    check("relu+mul", [&] { return ops::sum(ops::relu(ops::mul(x, y))); });
    check("sigmoid", [&] { return ops::sum(ops::sigmoid(x)); });
    check("tanh", [&] { return ops::sum(ops::tanh_op(y)); });
    check("softmax", [&] { return ops::sum(ops::mul(ops::softmax(x), x)); });
    check("l1", [&] { return ops::l1_loss(x, y); });
    check("mean_rows", [&] { return ops::sum(ops::mul(ops::mean_rows(x), ops::mean_rows(y))); });
    check("transpose", [&] { return ops::sum(ops::mul(ops::transpose2d(x), ops::transpose2d(y))); });
    check("ce", [&] {
      return ops::cross_entropy(ops::mul(x, y), {1, 0, 3}, 0.1);
    });
  }

  TEST_CASE("weight norm gradient vs finite differences") {
    std::mt19937_64 rng(22);
    Tensor v = oracles::random_tensor({3, 4}, rng, true, 0.3, 1.0);
    Tensor g = oracles::random_tensor({3}, rng, true, 0.5, 1.5);
    Tensor probe = oracles::random_tensor({3, 4}, rng, false);
    auto fn = [&] { return ops::sum(ops::mul(ops::weight_norm(v, g), probe)); };
    auto res = oracles::grad_check(fn, {{"v", v}, {"g", g}}, rng);
    CHECK(res.max_rel < 1e-5);
  }

  TEST_CASE("weight norm rows have norm g") {
    std::mt19937_64 rng(23);
    Tensor v = oracles::random_tensor({2, 5}, rng, false, 0.2, 1.0);
    Tensor g = Tensor::from_data({2}, {2.0, 0.5});
    Tensor w = ops::weight_norm(v, g);
    for (int64_t o = 0; o < 2; ++o) {
      double s = 0.0;
      for (int64_t i = 0; i < 5; ++i) s += w.at({o, i}) * w.at({o, i});
      CHECK(std::sqrt(s) == doctest::Approx(g.data()[o]).epsilon(1e-12));
    }
  }

  TEST_CASE("batch norm gradient vs finite differences (train and eval)") {
    std::mt19937_64 rng(24);
    for (bool training : {true, false}) {
      Tensor x = oracles::random_tensor({3, 8}, rng);
      Tensor gamma = oracles::random_tensor({3}, rng, true, 0.5, 1.5);
      Tensor beta = oracles::random_tensor({3}, rng);
      Tensor probe = oracles::random_tensor({3, 8}, rng, false);
      std::vector<double> rm(3, 0.1), rv(3, 0.9);
      auto fn = [&] {
        std::vector<double> rm_copy = rm, rv_copy = rv;
        Tensor y = ops::batch_norm(x, gamma, beta, rm_copy, rv_copy, training);
        return ops::sum(ops::mul(y, probe));
      };
      auto res = oracles::grad_check(fn, {{"x", x}, {"gamma", gamma}, {"beta", beta}}, rng);
      INFO("training=", training);
      CHECK(res.max_rel < 1e-4);
    }
  }

  TEST_CASE("batch norm updates running stats only in training") {
    Tensor x = Tensor::from_data({1, 4}, {1.0, 2.0, 3.0, 4.0});
    Tensor gamma = Tensor::full({1}, 1.0);
    Tensor beta = Tensor::zeros({1});
    std::vector<double> rm(1, 0.0), rv(1, 1.0);
    ops::batch_norm(x, gamma, beta, rm, rv, true);
    CHECK(rm[0] == doctest::Approx(0.25));  // momentum 0.1 toward mean 2.5
    const double rm_after = rm[0];
    ops::batch_norm(x, gamma, beta, rm, rv, false);
    CHECK(rm[0] == rm_after);
  }
}

TEST_SUITE("composite backward") {
  TEST_CASE("conv -> bn -> relu -> linear chain matches finite differences") {
    std::mt19937_64 rng(31);
    Tensor x = oracles::random_tensor({2, 10}, rng);
    Tensor w = oracles::random_tensor({3, 2, 3}, rng);
    Tensor gamma = oracles::random_tensor({3}, rng, true, 0.8, 1.2);
    Tensor beta = oracles::random_tensor({3}, rng, true, 0.3, 0.8);
    Tensor dense = oracles::random_tensor({3, 2}, rng);
    std::vector<double> rm(3, 0.0), rv(3, 1.0);
    auto fn = [&] {
      ops::Conv1dOpts opts;
      opts.pad_lo = 1;
      opts.pad_hi = 1;
      std::vector<double> rm_c = rm, rv_c = rv;
      Tensor h = ops::conv1d(x, w, Tensor(), opts);
      h = ops::batch_norm(h, gamma, beta, rm_c, rv_c, true);
      h = ops::relu(h);
      h = ops::matmul(ops::transpose2d(h), dense);
      return ops::mean(ops::mul(h, h));
    };
    auto res = oracles::grad_check(
        fn, {{"x", x}, {"w", w}, {"gamma", gamma}, {"beta", beta}, {"dense", dense}}, rng);
    CHECK(res.max_rel < 1e-4);
  }
}

TEST_SUITE("adam") {
  TEST_CASE("zero gradient leaves parameter unchanged") {
    nn::seed_all(1);
    nn::Parameter p;
    p.name = "w";
    p.value = Tensor::from_data({2}, {1.5, -0.5}, true);
    nn::Adam adam({&p}, 0.1);
    adam.step();
    CHECK(p.value.data()[0] == 1.5);
    CHECK(p.value.data()[1] == -0.5);
  }

  TEST_CASE("first step with unit gradient moves by about -lr") {
    nn::Parameter p;
    p.name = "w";
    p.value = Tensor::scalar(0.0, true);
    p.value.mutable_grad()[0] = 1.0;
    nn::Adam adam({&p}, 0.05);
    adam.step();
    CHECK(p.value.item() == doctest::Approx(-0.05).epsilon(1e-6));
  }

  TEST_CASE("rejects non-positive learning rate") {
    nn::Parameter p;
    p.value = Tensor::scalar(0.0, true);
    CHECK_THROWS_AS(nn::Adam({&p}, 0.0), ConfigError);
  }

  TEST_CASE("converges on (w-3)^2 within 100 steps") {
    nn::Parameter p;
    p.name = "w";
    p.value = Tensor::scalar(0.0, true);
    nn::Adam adam({&p}, 0.3);
    for (int i = 0; i < 100; ++i) {
      adam.zero_grad();
      p.value.mutable_grad()[0] = 2.0 * (p.value.item() - 3.0);
      adam.step();
    }
    CHECK(std::abs(p.value.item() - 3.0) < 1e-2);
  }

  TEST_CASE("frozen parameters are skipped") {
    nn::Parameter p;
    p.name = "w";
    p.value = Tensor::scalar(1.0, true);
    p.frozen = true;
    p.value.mutable_grad()[0] = 5.0;
    nn::Adam adam({&p}, 0.1);
    adam.step();
    CHECK(p.value.item() == 1.0);
  }
}

TEST_SUITE("plateau lr") {
  TEST_CASE("halves on plateau and respects the floor") {
    nn::PlateauLr sched(1e-4, 5e-6, 2);
    CHECK(sched.update(1.0) == 1e-4);   // improvement (from inf)
    CHECK(sched.update(1.0) == 1e-4);   // no improvement #1
    CHECK(sched.update(1.0) == 5e-5);   // no improvement #2 -> halve
    double lr = 5e-5;
    for (int i = 0; i < 40; ++i) lr = sched.update(1.0);
    CHECK(lr == 5e-6);  // clamped at the floor
  }
}

TEST_SUITE("checkpoint") {
  TEST_CASE("module round trip is bit exact") {
    nn::seed_all(77);
    nn::Linear a(6, 4);
    std::vector<nn::Parameter*> pa = a.parameters();
    const fs::path path = fs::temp_directory_path() / "avsr_test_linear.ckpt";
    checkpoint::save_model(path, a, {{"phase", "test"}});

    nn::seed_all(78);  // different init
    nn::Linear b(6, 4);
    auto meta = checkpoint::load_model(path, b);
    CHECK(meta["phase"] == "test");
    std::vector<nn::Parameter*> pb = b.parameters();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i]->name == pb[i]->name);
      for (int64_t j = 0; j < pa[i]->value.numel(); ++j)
        CHECK(pa[i]->value.data()[j] == pb[i]->value.data()[j]);
    }
    fs::remove(path);
  }

  TEST_CASE("wrong magic raises a version error") {
    const fs::path path = fs::temp_directory_path() / "avsr_test_bogus.ckpt";
    std::ofstream(path) << "NOTACKPT garbage";
    CHECK_THROWS_AS(checkpoint::load_archive(path), VersionError);
    fs::remove(path);
  }

  TEST_CASE("shape mismatch raises a version error") {
    nn::seed_all(79);
    nn::Linear a(6, 4);
    const fs::path path = fs::temp_directory_path() / "avsr_test_shape.ckpt";
    checkpoint::save_model(path, a, {});
    nn::Linear b(6, 5);
    CHECK_THROWS_AS(checkpoint::load_model(path, b), VersionError);
    fs::remove(path);
  }

  TEST_CASE("buffers are persisted") {
    nn::seed_all(80);
    nn::BatchNorm bn1(3);
    Tensor x = Tensor::from_data({3, 4}, std::vector<double>(12, 2.0));
    bn1.forward(x);  // stats move away from defaults
    const fs::path path = fs::temp_directory_path() / "avsr_test_bn.ckpt";
    checkpoint::save_model(path, bn1, {});
    nn::BatchNorm bn2(3);
    checkpoint::load_model(path, bn2);
    auto b1 = bn1.buffers(), b2 = bn2.buffers();
    for (size_t i = 0; i < b1.size(); ++i)
      for (size_t j = 0; j < b1[i]->data.size(); ++j)
        CHECK(b1[i]->data[j] == b2[i]->data[j]);
    fs::remove(path);
  }
}
