#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "atgmoe/optimizer.hpp"
#include "atgmoe/param_store.hpp"
#include "atgmoe/tensor.hpp"
#include "test_support.hpp"

using namespace atgmoe;
using nc::Tensor;
using testsup::gradcheck;
using testsup::random_tensor;

TEST_CASE("softmax closed form and shift invariance") {
  auto x = Tensor<double>::from_data({2}, {0.0, std::log(3.0)});
  auto s = nc::softmax(x, 0);
  CHECK(s.values()[0] == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(s.values()[1] == doctest::Approx(0.75).epsilon(1e-12));

  Rng rng(7);
  auto y = random_tensor({5}, rng, false);
  auto shifted = nc::add(y, Tensor<double>::scalar(3.7));
  auto a = nc::softmax(y, 0), b = nc::softmax(shifted, 0);
  for (size_t i = 0; i < 5; ++i)
    CHECK(a.values()[i] == doctest::Approx(b.values()[i]).epsilon(1e-12));
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  auto x = random_tensor({4, 9}, rng, false, 3.0);
  auto s = nc::softmax(x, 1);
  for (int r = 0; r < 4; ++r) {
    double total = 0;
    for (int c = 0; c < 9; ++c) total += s.values()[static_cast<size_t>(r * 9 + c)];
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("matmul identity") {
  Rng rng(11);
  auto a = random_tensor({3, 4}, rng, false);
  std::vector<double> eye(16, 0.0);
  for (int i = 0; i < 4; ++i) eye[static_cast<size_t>(i * 4 + i)] = 1.0;
  auto id = Tensor<double>::from_data({4, 4}, eye);
  auto c = nc::matmul(a, id);
  for (size_t i = 0; i < a.values().size(); ++i) CHECK(c.values()[i] == a.values()[i]);
}

TEST_CASE("product rule backward") {
  auto x = Tensor<double>::scalar(3.0, true);
  auto y = Tensor<double>::scalar(5.0, true);
  auto z = nc::mul(x, y);
  nc::backward(z);
  CHECK(x.grads()[0] == doctest::Approx(5.0));
  CHECK(y.grads()[0] == doctest::Approx(3.0));
}

TEST_CASE("cross entropy gradient vanishes at confident correct logits") {
  auto logits = Tensor<double>::from_data({1, 4}, {30.0, -10.0, -10.0, -10.0}, true);
  auto loss = nc::cross_entropy_sum(logits, {0});
  nc::backward(loss);
  for (double g : logits.grads()) CHECK(std::abs(g) < 1e-9);
}

TEST_CASE("backward requires scalar loss") {
  auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
  CHECK_THROWS_AS(nc::backward(nc::scale(x, 2.0)), std::invalid_argument);
}

TEST_CASE("repeated backward accumulates") {
  auto x = Tensor<double>::scalar(2.0, true);
  auto y = nc::mul(x, x);
  nc::backward(y);
  nc::backward(y);
  CHECK(x.grads()[0] == doctest::Approx(8.0));  // 2 * dy/dx
}

TEST_CASE("shape mismatch diagnostics name both shapes") {
  auto a = Tensor<double>::zeros({2, 3});
  auto b = Tensor<double>::zeros({4, 5});
  try {
    nc::matmul(a, b);
    FAIL("expected throw");
  } catch (const std::invalid_argument& e) {
    std::string msg = e.what();
    CHECK(msg.find("[2, 3]") != std::string::npos);
    CHECK(msg.find("[4, 5]") != std::string::npos);
  }
}

TEST_CASE("softmax over empty axis is an error") {
  auto x = Tensor<double>::zeros({3, 0});
  CHECK_THROWS(nc::softmax(x, 1));
}

TEST_CASE("gradient of softmax dot weight matches finite differences") {
  // spec oracle: sum softmax(x) . w at random x (dim 7)
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(100 + seed);
    auto w = random_tensor({7}, rng, false);
    double err = gradcheck(
        [&](const Tensor<double>& x) { return nc::mul(nc::softmax(x, 0), w); }, {7}, rng);
    CHECK(err < 1e-4);
  }
}

TEST_CASE("elementwise and shape op gradcheck, 20 seeds") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(500 + seed);
    int64_t n = 2 + static_cast<int64_t>(rng.uniform_int(5));
    int64_t m = 2 + static_cast<int64_t>(rng.uniform_int(5));
    CHECK(gradcheck([](const Tensor<double>& x) { return nc::exp(x); }, {n, m}, rng) < 1e-4);
    CHECK(gradcheck([](const Tensor<double>& x) { return nc::sigmoid(x); }, {n, m}, rng) < 1e-4);
    CHECK(gradcheck([](const Tensor<double>& x) { return nc::gelu(x); }, {n, m}, rng) < 1e-4);
    CHECK(gradcheck([](const Tensor<double>& x) { return nc::sqrt(nc::exp(x)); }, {n}, rng) < 1e-4);
    CHECK(gradcheck([](const Tensor<double>& x) { return nc::log(nc::exp(x)); }, {n}, rng) < 1e-4);
    CHECK(gradcheck(
              [](const Tensor<double>& x) { return nc::mean(nc::mul(x, x), {0}); }, {n, m}, rng) <
          1e-4);
    CHECK(gradcheck([](const Tensor<double>& x) { return nc::transpose(x); }, {n, m}, rng) < 1e-4);
    CHECK(gradcheck(
              [m](const Tensor<double>& x) { return nc::slice(x, 1, 1, m - 1); }, {n, m}, rng) <
          1e-4);
    CHECK(gradcheck(
              [](const Tensor<double>& x) {
                return nc::concat({nc::relu(x), nc::sigmoid(x)}, 1);
              },
              {n, m}, rng) < 1e-4);
  }
}

TEST_CASE("matmul and broadcasting gradcheck") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(900 + seed);
    auto b = random_tensor({4, 3}, rng, false);
    CHECK(gradcheck([&](const Tensor<double>& x) { return nc::matmul(x, b); }, {2, 4}, rng) <
          1e-4);
    auto row = random_tensor({1, 5}, rng, false);
    CHECK(gradcheck([&](const Tensor<double>& x) { return nc::add(x, row); }, {3, 5}, rng) <
          1e-4);
    CHECK(gradcheck([&](const Tensor<double>& x) { return nc::mul(x, row); }, {3, 5}, rng) <
          1e-4);
    // broadcast on the gradient side too
    auto big = random_tensor({3, 5}, rng, false);
    CHECK(gradcheck([&](const Tensor<double>& x) { return nc::mul(big, x); }, {1, 5}, rng) <
          1e-4);
  }
}

TEST_CASE("softmax log_softmax layer_norm gradcheck") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1300 + seed);
    CHECK(gradcheck([](const Tensor<double>& x) { return nc::softmax(x, 1); }, {3, 6}, rng) <
          1e-4);
    CHECK(gradcheck([](const Tensor<double>& x) { return nc::log_softmax(x, 1); }, {3, 6}, rng) <
          1e-4);
    auto g = random_tensor({6}, rng, false);
    auto b = random_tensor({6}, rng, false);
    CHECK(gradcheck(
              [&](const Tensor<double>& x) { return nc::layer_norm(x, g, b); }, {4, 6}, rng) <
          1e-4);
    // gain/bias gradients
    auto x0 = random_tensor({4, 6}, rng, false);
    auto gl = random_tensor({6}, rng);
    auto loss = nc::sum(nc::layer_norm(x0, gl, b));
    nc::backward(loss);
    auto fd = testsup::finite_diff(
        [&](const std::vector<double>& vals) {
          auto gt = Tensor<double>::from_data({6}, vals, false);
          return nc::sum(nc::layer_norm(x0, gt, b)).item();
        },
        gl.values());
    CHECK(testsup::max_rel_err(gl.grads(), fd) < 1e-4);
  }
}

TEST_CASE("conv ops gradcheck") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(1700 + seed);
    auto w = random_tensor({2, 3, 2, 2}, rng, false);   // conv2d weight
    auto wt = random_tensor({3, 2, 4, 4}, rng, false);  // tconv weight
    auto bias = random_tensor({2}, rng, false);
    CHECK(gradcheck(
              [&](const Tensor<double>& x) { return nc::conv2d(x, w, bias, 2, 0); }, {3, 6, 6},
              rng) < 1e-4);
    CHECK(gradcheck(
              [&](const Tensor<double>& x) { return nc::conv_transpose2d(x, wt, bias, 2, 1); },
              {3, 3, 3}, rng) < 1e-4);
    // weight gradients
    auto x0 = random_tensor({3, 5, 5}, rng, false);
    auto wl = random_tensor({2, 3, 3, 3}, rng);
    auto loss = nc::sum(nc::conv2d(x0, wl, {}, 1, 1));
    nc::backward(loss);
    auto fd = testsup::finite_diff(
        [&](const std::vector<double>& vals) {
          auto wv = Tensor<double>::from_data({2, 3, 3, 3}, vals, false);
          return nc::sum(nc::conv2d(x0, wv, {}, 1, 1)).item();
        },
        wl.values());
    CHECK(testsup::max_rel_err(wl.grads(), fd) < 1e-4);
  }
}

TEST_CASE("embedding pick pooling gradcheck") {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(2100 + seed);
    std::vector<int64_t> ids = {1, 0, 3, 1};
    CHECK(gradcheck([&](const Tensor<double>& t) { return nc::embedding(t, ids); }, {5, 3},
                    rng) < 1e-4);
    std::vector<int64_t> picks = {2, 0, 1};
    CHECK(gradcheck([&](const Tensor<double>& t) { return nc::pick(t, picks); }, {3, 4}, rng) <
          1e-4);
    CHECK(gradcheck([](const Tensor<double>& t) { return nc::spatial_mean(t); }, {3, 4, 4},
                    rng) < 1e-4);
    CHECK(gradcheck([](const Tensor<double>& t) { return nc::spatial_max(t); }, {3, 4, 4}, rng) <
          1e-4);
  }
}

TEST_CASE("grid sample semantics and gradcheck") {
  // on-grid coordinates return the exact pixel
  std::vector<double> vals(2 * 3 * 4);
  for (size_t i = 0; i < vals.size(); ++i) vals[i] = static_cast<double>(i);
  auto fm = Tensor<double>::from_data({2, 3, 4}, vals);
  auto s = nc::grid_sample(fm, 2.0, 1.0);
  CHECK(s.values()[0] == doctest::Approx(vals[1 * 4 + 2]));
  CHECK(s.values()[1] == doctest::Approx(vals[12 + 1 * 4 + 2]));

  // constant field: any interior point returns the constant
  auto cf = Tensor<double>::full({1, 2, 2}, 7.5);
  CHECK(nc::grid_sample(cf, 0.5, 0.5).values()[0] == doctest::Approx(7.5));

  // random coords vs an independent 4-neighbor weighted sum
  Rng rng(4242);
  for (int trial = 0; trial < 50; ++trial) {
    double u = rng.uniform(0.0, 3.0), v = rng.uniform(0.0, 2.0);
    auto out = nc::grid_sample(fm, u, v);
    int x0 = static_cast<int>(std::floor(u)), y0 = static_cast<int>(std::floor(v));
    int x1 = std::min(x0 + 1, 3), y1 = std::min(y0 + 1, 2);
    double fu = u - x0, fv = v - y0;
    for (int c = 0; c < 2; ++c) {
      auto px = [&](int x, int y) { return vals[static_cast<size_t>(c * 12 + y * 4 + x)]; };
      double expect = (1 - fu) * (1 - fv) * px(x0, y0) + fu * (1 - fv) * px(x1, y0) +
                      (1 - fu) * fv * px(x0, y1) + fu * fv * px(x1, y1);
      CHECK(out.values()[static_cast<size_t>(c)] == doctest::Approx(expect).epsilon(1e-6));
    }
  }

  // clamp-to-edge beyond bounds
  auto edge = nc::grid_sample(fm, -5.0, 99.0);
  CHECK(edge.values()[0] == doctest::Approx(vals[2 * 4 + 0]));

  CHECK_THROWS(nc::grid_sample(Tensor<double>::zeros({2, 0, 4}), 0, 0));

  for (uint64_t seed = 0; seed < 20; ++seed) {
    Rng r2(3100 + seed);
    double u = r2.uniform(0.0, 3.0), v = r2.uniform(0.0, 2.0);
    CHECK(gradcheck([&](const Tensor<double>& t) { return nc::grid_sample(t, u, v); }, {2, 3, 4},
                    r2) < 1e-4);
  }
}

TEST_CASE("backward determinism is bit exact") {
  Rng rng(777);
  auto run = [&](uint64_t seed) {
    Rng r(seed);
    auto x = random_tensor({6, 6}, r);
    auto w = random_tensor({6, 6}, r);
    auto loss = nc::sum(nc::mul(nc::softmax(nc::matmul(x, w), 1), nc::sigmoid(x)));
    nc::backward(loss);
    return std::make_pair(x.grads(), w.grads());
  };
  auto [g1, h1] = run(42);
  auto [g2, h2] = run(42);
  CHECK(std::memcmp(g1.data(), g2.data(), g1.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(h1.data(), h2.data(), h1.size() * sizeof(double)) == 0);
  (void)rng;
}

TEST_CASE("no-grad guard suppresses graph construction") {
  auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
  nc::NoGradGuard guard;
  auto y = nc::sum(nc::mul(x, x));
  CHECK_FALSE(y.requires_grad());
}

TEST_CASE("optimizer warm-up and convergence") {
  Rng rng(5);
  nc::ParamStore<double> store;
  auto x = store.add("x", {16}, rng, 1.0);
  std::vector<double> target(16);
  for (auto& t : target) t = rng.normal(0.0, 1.0);
  auto target_t = Tensor<double>::from_data({16}, target);

  nc::OptimizerConfig cfg;
  cfg.base_lr = 0.05;
  cfg.warmup_steps = 10;
  cfg.trust_ratio = true;
  nc::Optimizer<double> opt(store, cfg);

  // step 0: effective lr 0, parameters unchanged
  auto before = x.values();
  {
    store.zero_grad();
    auto d = nc::sub(x, target_t);
    nc::backward(nc::sum(nc::mul(d, d)));
    opt.step();
  }
  CHECK(x.values() == before);

  // zero gradient leaves parameters unchanged (moments only decay)
  {
    store.zero_grad();
    auto frozen = x.values();
    opt.step();
    CHECK(x.values() == frozen);
  }

  auto dist = [&]() {
    double s = 0;
    for (size_t i = 0; i < 16; ++i) s += (x.values()[i] - target[i]) * (x.values()[i] - target[i]);
    return std::sqrt(s);
  };
  double d0 = dist();
  for (int i = 0; i < 200; ++i) {
    store.zero_grad();
    auto d = nc::sub(x, target_t);
    nc::backward(nc::sum(nc::mul(d, d)));
    opt.step();
  }
  CHECK(dist() < 0.1 * d0);
}

TEST_CASE("optimizer rejects non-finite gradients") {
  Rng rng(6);
  nc::ParamStore<double> store;
  auto x = store.add("x", {2}, rng, 1.0);
  auto bad = nc::log(nc::sub(x, x));  // log(0) = -inf
  nc::backward(nc::sum(bad));
  nc::OptimizerConfig cfg;
  nc::Optimizer<double> opt(store, cfg);
  CHECK_THROWS_AS(opt.step(), std::runtime_error);
}

TEST_CASE("checkpoint round trip validates shapes") {
  Rng rng(9);
  nc::ParamStore<float> store;
  auto a = store.add("layer.w", {3, 4}, rng, 0.02);
  auto b = store.add("layer.b", {4}, rng, 0.0);
  (void)b;
  auto path = std::string("/tmp/atgmoe_test_ckpt.bin");
  store.save(path, {{"epoch", 3}});

  nc::ParamStore<float> store2;
  auto a2 = store2.add("layer.w", {3, 4}, rng, 0.02);
  auto b2 = store2.add("layer.b", {4}, rng, 0.0);
  (void)b2;
  auto meta = store2.load(path);
  CHECK(meta.at("epoch").get<int>() == 3);
  CHECK(a2.values() == a.values());

  nc::ParamStore<float> bad;
  bad.add("layer.w", {4, 3}, rng, 0.02);
  bad.add("layer.b", {4}, rng, 0.0);
  CHECK_THROWS(bad.load(path));
}
