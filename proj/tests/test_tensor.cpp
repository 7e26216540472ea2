#include <doctest.h>

#include <cmath>
#include <numeric>

#include "adamct/blocks.hpp"
#include "adamct/gradcheck.hpp"
#include "adamct/tensor.hpp"
#include "oracles.hpp"

using namespace adamct;

namespace {

template <typename T>
Tensor<T> make(Shape shape, std::vector<T> data, bool tracked = false) {
  return Tensor<T>::from_data(std::move(shape), std::move(data), tracked);
}

}  // namespace

TEST_CASE("matmul identity and selection") {
  auto i2 = make<float>({2, 2}, {1, 0, 0, 1});
  auto m = make<float>({2, 2}, {1, 2, 3, 4});
  auto out = matmul<float>(nullptr, i2, m);
  CHECK(out.at(0, 0) == 1.0f);
  CHECK(out.at(0, 1) == 2.0f);
  CHECK(out.at(1, 0) == 3.0f);
  CHECK(out.at(1, 1) == 4.0f);

  auto row = make<float>({1, 2}, {1, 0});
  auto col = make<float>({2, 1}, {2, 5});
  CHECK(matmul<float>(nullptr, row, col).value() == 2.0f);
}

TEST_CASE("matmul matches the triple-loop oracle") {
  RngState rng(42);
  auto a = oracles::random_tensor<double>({3, 4}, rng);
  auto b = oracles::random_tensor<double>({4, 2}, rng);
  auto out = matmul<double>(nullptr, a, b);
  const auto ref = oracles::matmul_ref<double>(
      {a.data().begin(), a.data().end()}, {b.data().begin(), b.data().end()},
      3, 4, 2);
  for (Index i = 0; i < ref.size(); ++i) {
    CHECK(out.at(i) == doctest::Approx(ref[i]).epsilon(1e-6));
  }
}

TEST_CASE("matmul rejects mismatched shapes naming both") {
  auto a = make<float>({2, 3}, std::vector<float>(6, 1.0f));
  auto b = make<float>({2, 2}, std::vector<float>(4, 1.0f));
  CHECK_THROWS_WITH_AS(matmul<float>(nullptr, a, b),
                       doctest::Contains("[2x3]"), ShapeError);
}

TEST_CASE("activation fixed points") {
  auto x = make<double>({1, 1}, {0.0});
  CHECK(activation<double>(nullptr, x, ActKind::kSigmoid).value() == 0.5);

  auto u = make<double>({1, 3}, {1.0, 1.0, 1.0});
  auto sm = activation<double>(nullptr, u, ActKind::kSoftmaxLastAxis);
  for (Index j = 0; j < 3; ++j) {
    CHECK(sm.at(j) == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  }

  CHECK_THROWS_AS(act_kind_from_string("step"), ConfigError);
}

TEST_CASE("gelu matches the quadrature oracle") {
  for (double v : {-2.5, -1.0, -0.3, 0.0, 0.7, 1.0, 2.0}) {
    auto x = make<double>({1, 1}, {v});
    const double got = activation<double>(nullptr, x, ActKind::kGelu).value();
    CHECK(got == doctest::Approx(oracles::gelu_quadrature(v)).epsilon(1e-4));
  }
}

TEST_CASE("softmax rows sum to one and stay positive") {
  RngState rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    const Index n = 1 + rng.uniform_below(6);
    const Index d = 1 + rng.uniform_below(8);
    auto x = oracles::random_tensor<double>({n, d}, rng, -30.0, 30.0);
    auto y = activation<double>(nullptr, x, ActKind::kSoftmaxLastAxis);
    for (Index i = 0; i < n; ++i) {
      double row = 0.0;
      for (Index j = 0; j < d; ++j) {
        CHECK(y.at(i * d + j) > 0.0);
        row += y.at(i * d + j);
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("layer_norm rows") {
  auto gamma = Tensor<double>::full({3}, 1.0);
  auto beta = Tensor<double>::zeros({3});

  auto constant = make<double>({1, 3}, {4.0, 4.0, 4.0});
  auto out = layer_norm<double>(nullptr, constant, gamma, beta, 1e-5);
  for (Index j = 0; j < 3; ++j) CHECK(out.at(j) == 0.0);

  auto pm = make<double>({1, 2}, {1.0, -1.0});
  auto g2 = Tensor<double>::full({2}, 1.0);
  auto b2 = Tensor<double>::zeros({2});
  auto out2 = layer_norm<double>(nullptr, pm, g2, b2, 1e-12);
  CHECK(out2.at(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(out2.at(1) == doctest::Approx(-1.0).epsilon(1e-4));
}

TEST_CASE("layer_norm output statistics on random rows") {
  RngState rng(11);
  const Index n = 4, d = 8;
  auto x = oracles::random_tensor<double>({n, d}, rng, -2.0, 2.0);
  auto gamma = Tensor<double>::full({d}, 1.0);
  auto beta = Tensor<double>::zeros({d});
  auto y = layer_norm<double>(nullptr, x, gamma, beta, 1e-5);
  for (Index i = 0; i < n; ++i) {
    double mean = 0.0, var = 0.0;
    for (Index j = 0; j < d; ++j) mean += y.at(i * d + j);
    mean /= d;
    for (Index j = 0; j < d; ++j) {
      var += (y.at(i * d + j) - mean) * (y.at(i * d + j) - mean);
    }
    var /= d;
    CHECK(std::abs(mean) < 1e-6);
    CHECK(std::abs(var - 1.0) < 1e-3);
  }
}

TEST_CASE("dropout semantics") {
  RngState rng(3);
  auto x = oracles::random_tensor<float>({4, 4}, rng);

  SUBCASE("rate zero and eval mode are bit-identical to the input") {
    auto train0 = dropout<float>(nullptr, x, 0.0f, Mode::kTrain, &rng);
    CHECK(train0.storage_id() == x.storage_id());
    auto ev = dropout<float>(nullptr, x, 0.9f, Mode::kEval, &rng);
    CHECK(ev.storage_id() == x.storage_id());
  }

  SUBCASE("rate >= 1 rejected") {
    CHECK_THROWS_AS(dropout<float>(nullptr, x, 1.0f, Mode::kTrain, &rng),
                    ConfigError);
  }

  SUBCASE("survivor fraction and mean at rate 0.5") {
    const Index n = 100000;
    auto big = Tensor<double>::full({n, 1}, 1.0);
    RngState drop_rng(99);
    auto out = dropout<double>(nullptr, big, 0.5, Mode::kTrain, &drop_rng);
    Index survivors = 0;
    double total = 0.0;
    for (Index i = 0; i < n; ++i) {
      if (out.at(i) != 0.0) ++survivors;
      total += out.at(i);
    }
    const double fraction = static_cast<double>(survivors) / n;
    CHECK(std::abs(fraction - 0.5) < 0.01);
    CHECK(std::abs(total / n - 1.0) < 0.02);  // inverted scaling keeps the mean
  }

  SUBCASE("identical seeds give bit-identical masks") {
    RngState a(123), b(123);
    auto ya = dropout<float>(nullptr, x, 0.3f, Mode::kTrain, &a);
    auto yb = dropout<float>(nullptr, x, 0.3f, Mode::kTrain, &b);
    for (Index i = 0; i < x.numel(); ++i) {
      CHECK(ya.at(i) == yb.at(i));
    }
  }

  SUBCASE("backward scales kept coordinates only") {
    Tape<float> tape;
    auto tracked = x.clone();
    tracked.set_tracked(true);
    RngState drop_rng(5);
    auto y = dropout<float>(&tape, tracked, 0.5f, Mode::kTrain, &drop_rng);
    auto loss = sum<float>(&tape, y);
    tape.backward(loss);
    for (Index i = 0; i < tracked.numel(); ++i) {
      CHECK(tracked.grad()[i] == (y.at(i) != 0.0f ? 2.0f : 0.0f));
    }
  }
}

TEST_CASE("mean_pool") {
  auto x = make<double>({2, 2}, {1, 3, 5, 7});
  auto per_row = mean_pool<double>(nullptr, x, 1);
  CHECK(per_row.at(0) == 2.0);
  CHECK(per_row.at(1) == 6.0);

  std::vector<std::uint8_t> pick_one = {0, 1};
  auto row = mean_pool<double>(nullptr, x, 0, pick_one);
  CHECK(row.at(0) == 5.0);
  CHECK(row.at(1) == 7.0);

  std::vector<std::uint8_t> none = {0, 0};
  CHECK_THROWS_AS(mean_pool<double>(nullptr, x, 0, none), DataError);
}

TEST_CASE("mean_pool matches the masked-sum oracle") {
  RngState rng(17);
  const Index n = 6, d = 4;
  auto x = oracles::random_tensor<double>({n, d}, rng);
  std::vector<std::uint8_t> mask = {1, 0, 1, 1, 0, 1};
  auto pooled = mean_pool<double>(nullptr, x, 0, mask);
  const auto ref = oracles::masked_col_mean_ref<double>(
      {x.data().begin(), x.data().end()}, n, d, mask);
  for (Index j = 0; j < d; ++j) {
    CHECK(pooled.at(j) == doctest::Approx(ref[j]).epsilon(1e-6));
  }
}

TEST_CASE("backward basics") {
  SUBCASE("sum gives unit gradients") {
    Tape<double> tape;
    auto x = Tensor<double>::from_data({2, 3}, {1, 2, 3, 4, 5, 6}, true);
    auto loss = sum<double>(&tape, x);
    tape.backward(loss);
    for (Index i = 0; i < 6; ++i) CHECK(x.grad()[i] == 1.0);
  }

  SUBCASE("square at 3 gives 6") {
    Tape<double> tape;
    auto x = Tensor<double>::scalar(3.0, true);
    auto loss = mul<double>(&tape, x, x);
    tape.backward(loss);
    CHECK(x.grad()[0] == 6.0);
  }

  SUBCASE("fan-out accumulates additively") {
    Tape<double> tape;
    auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
    auto loss = sum<double>(&tape, add<double>(&tape, x, x));
    tape.backward(loss);
    CHECK(x.grad()[0] == 2.0);
    CHECK(x.grad()[1] == 2.0);
  }

  SUBCASE("non-scalar loss rejected") {
    Tape<double> tape;
    auto x = Tensor<double>::from_data({2}, {1.0, 2.0}, true);
    auto y = add<double>(&tape, x, x);
    CHECK_THROWS_AS(tape.backward(y), ShapeError);
  }
}

TEST_CASE("grad_check on closed forms") {
  SUBCASE("x squared at 3") {
    auto x = Tensor<double>::scalar(3.0, true);
    std::vector<NamedParam<double>> params = {{"x", x}};
    RngState rng(1);
    auto report = grad_check<double>(
        [&](Tape<double>& tape) { return mul<double>(&tape, x, x); }, params,
        1e-5, 0, rng);
    CHECK(report.max_rel_err < 1e-8);
  }

  SUBCASE("layer_norm composed with sum") {
    RngState rng(2);
    auto x = oracles::random_tensor<double>({3, 5}, rng, -1.0, 1.0, true);
    auto gamma = oracles::random_tensor<double>({5}, rng, 0.5, 1.5, true);
    auto beta = oracles::random_tensor<double>({5}, rng, -0.5, 0.5, true);
    std::vector<NamedParam<double>> params = {
        {"x", x}, {"gamma", gamma}, {"beta", beta}};
    auto report = grad_check<double>(
        [&](Tape<double>& tape) {
          return sum<double>(&tape,
                             layer_norm<double>(&tape, x, gamma, beta, 1e-5));
        },
        params, 1e-5, 0, rng);
    CHECK(report.max_rel_err < 1e-6);
  }
}

// Every differentiable op against central differences, random shapes up to
// 8x8, 100 sampled coordinates per tensor, 64-bit.
TEST_CASE("grad_check across the op set") {
  RngState rng(2024);
  const auto run = [&](const char* name, auto&& f,
                       std::vector<NamedParam<double>> params) {
    auto report = grad_check<double>(f, params, 1e-5, 100, rng);
    INFO(name << " worst tensor " << report.worst_tensor);
    CHECK(report.max_rel_err < 1e-5);
  };

  for (int trial = 0; trial < 3; ++trial) {
    const Index n = 2 + rng.uniform_below(7);  // 2..8
    const Index d = 2 + rng.uniform_below(7);
    auto x = oracles::random_tensor<double>({n, d}, rng, -1.0, 1.0, true);
    auto w = oracles::random_tensor<double>({d, n}, rng, -1.0, 1.0, true);
    auto b = oracles::random_tensor<double>({n}, rng, -0.5, 0.5, true);

    run("matmul+bias",
        [&](Tape<double>& tape) {
          return sum<double>(
              &tape, add_row_bias<double>(&tape, matmul<double>(&tape, x, w), b));
        },
        {{"x", x}, {"w", w}, {"b", b}});

    run("matmul_nt",
        [&](Tape<double>& tape) {
          return sum<double>(&tape, matmul_nt<double>(&tape, x, x));
        },
        {{"x", x}});

    for (ActKind kind : {ActKind::kRelu, ActKind::kGelu, ActKind::kSwish,
                         ActKind::kTanh, ActKind::kSigmoid,
                         ActKind::kSoftmaxLastAxis}) {
      run(to_string(kind).c_str(),
          [&](Tape<double>& tape) {
            auto act = activation<double>(&tape, x, kind);
            // A non-uniform weighting makes softmax gradients non-trivial.
            return sum<double>(&tape, mul<double>(&tape, act, x));
          },
          {{"x", x}});
    }

    auto s = oracles::random_tensor<double>({n}, rng, 0.1, 0.9, true);
    run("scale_rows",
        [&](Tape<double>& tape) {
          return sum<double>(&tape, scale_rows<double>(&tape, x, s));
        },
        {{"x", x}, {"s", s}});

    auto alpha = Tensor<double>::scalar(0.37, true);
    run("scalar mix",
        [&](Tape<double>& tape) {
          auto lhs = scale_by_scalar<double>(&tape, x, alpha);
          auto rhs =
              scale_by_scalar<double>(&tape, x, one_minus<double>(&tape, alpha));
          return sum<double>(&tape, mul<double>(&tape, add<double>(&tape, lhs, rhs), x));
        },
        {{"x", x}, {"alpha", alpha}});

    std::vector<std::uint8_t> mask(n, 1);
    if (n > 2) mask[1] = 0;
    run("mean_pool axis0",
        [&](Tape<double>& tape) {
          auto pooled = mean_pool<double>(&tape, x, 0, mask);
          return sum<double>(&tape, mul<double>(&tape, pooled, pooled));
        },
        {{"x", x}});
    run("mean_pool axis1 + place + slice",
        [&](Tape<double>& tape) {
          auto z = mean_pool<double>(&tape, x, 1, mask);
          auto placed = place_segment<double>(&tape, z, n + 3, 2);
          auto row = reshape<double>(&tape, placed, {Index(1), n + 3});
          auto sliced = slice_cols<double>(&tape, row, 2, n);
          return sum<double>(&tape, mul<double>(&tape, sliced, sliced));
        },
        {{"x", x}});

    run("cross_entropy",
        [&](Tape<double>& tape) {
          auto row = take_row<double>(&tape, x, 0);
          return cross_entropy<double>(&tape, row, d - 1);
        },
        {{"x", x}});

    const Index kernel = 3;
    auto filters =
        oracles::random_tensor<double>({d, kernel * d}, rng, -0.6, 0.6, true);
    auto cbias = oracles::random_tensor<double>({d}, rng, -0.2, 0.2, true);
    run("conv1d",
        [&](Tape<double>& tape) {
          auto c = conv1d<double>(&tape, x, filters, cbias, kernel, 1);
          return sum<double>(&tape, mul<double>(&tape, c, c));
        },
        {{"x", x}, {"filters", filters}, {"bias", cbias}});

    auto q = oracles::random_tensor<double>({n, d}, rng, -1.0, 1.0, true);
    auto kk = oracles::random_tensor<double>({n, d}, rng, -1.0, 1.0, true);
    auto v = oracles::random_tensor<double>({n, d}, rng, -1.0, 1.0, true);
    auto cm = causal_mask<double>(n);
    std::vector<std::uint8_t> keys(n, 1);
    run("scaled_dot_attention",
        [&](Tape<double>& tape) {
          auto o = scaled_dot_attention<double>(&tape, q, kk, v, cm, keys,
                                                1.0 / std::sqrt(double(d)));
          return sum<double>(&tape, mul<double>(&tape, o, o));
        },
        {{"q", q}, {"k", kk}, {"v", v}});
  }
}

TEST_CASE("rng determinism and bounds") {
  RngState a(555), b(555);
  for (int i = 0; i < 1000; ++i) {
    CHECK(a.next_u64() == b.next_u64());
  }
  RngState c(556);
  CHECK(a.child(1).next_u64() != a.child(2).next_u64());
  for (int i = 0; i < 1000; ++i) {
    CHECK(c.uniform_below(17) < 17);
    const double u = c.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
