#include <cmath>
#include <cstring>

#include "doctest.h"
#include "dpcc/autodiff/checkpoint.hpp"
#include "dpcc/autodiff/grad_check.hpp"
#include "dpcc/autodiff/mlp.hpp"
#include "dpcc/autodiff/ops.hpp"
#include "dpcc/error.hpp"
#include "dpcc/random.hpp"

using namespace dpcc;
using namespace dpcc::ad;

namespace {

Tensor random_leaf(Shape shape, Rng& rng, double lo = -2.0, double hi = 2.0) {
  std::vector<double> v(numel(shape));
  for (double& x : v) x = rng.uniform(lo, hi);
  return Tensor::from(std::move(shape), std::move(v), true);
}

// Random fixed projection so every output element contributes to the scalar.
Tensor project(const Tensor& y, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> w(y.numel());
  for (double& x : w) x = rng.uniform(-1.0, 1.0);
  return sum_all(mul(y, Tensor::from(y.shape(), std::move(w))));
}

void check_primitive(const char* name,
                     const std::function<Tensor(const std::vector<Tensor>&)>& op,
                     const std::vector<Shape>& shapes, double lo = -2.0,
                     double hi = 2.0) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(seed);
    std::vector<Tensor> inputs;
    for (const auto& s : shapes) inputs.push_back(random_leaf(s, rng, lo, hi));
    auto report = grad_check([&] { return project(op(inputs), seed + 100); },
                             inputs, 1e-6, 1e-5);
    INFO(name << " seed " << seed << " err " << report.max_rel_error);
    CHECK(report.passed);
  }
}

}  // namespace

TEST_CASE("matmul with identity returns the left operand") {
  auto a = Tensor::from({2, 2}, {1, 2, 3, 4});
  auto eye = Tensor::from({2, 2}, {1, 0, 0, 1});
  auto c = matmul(a, eye);
  CHECK(c.shape() == Shape{2, 2});
  CHECK(std::vector<double>(c.data().begin(), c.data().end()) ==
        std::vector<double>{1, 2, 3, 4});
}

TEST_CASE("softmax of equal logits is uniform") {
  auto y = softmax(Tensor::from({3}, {0, 0, 0}), 0);
  for (double v : y.data()) CHECK(v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("relu zeroes negatives") {
  auto y = relu(Tensor::from({3}, {-1, 2, -3}));
  CHECK(std::vector<double>(y.data().begin(), y.data().end()) ==
        std::vector<double>{0, 2, 0});
}

TEST_CASE("shape mismatch names the op and both shapes") {
  auto a = Tensor::zeros({2, 3});
  auto b = Tensor::zeros({2, 3});
  try {
    matmul(a, b);
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("matmul") != std::string::npos);
    CHECK(msg.find("[2,3]") != std::string::npos);
  }
  CHECK_THROWS_AS(add(Tensor::zeros({2, 3}), Tensor::zeros({2})), ShapeError);
  // Leading-batch broadcast is the one implicit expansion.
  CHECK_NOTHROW(add(Tensor::zeros({2, 3}), Tensor::zeros({3})));
}

TEST_CASE("log and sqrt clamp nonpositive inputs") {
  auto x = Tensor::from({3}, {0.0, -1.0, 4.0}, true);
  auto l = log(x);
  CHECK(l.at(0) == doctest::Approx(std::log(1e-12)));
  CHECK(l.at(1) == doctest::Approx(std::log(1e-12)));
  auto s = ad::sqrt(x);
  CHECK(s.at(0) == doctest::Approx(1e-6));
  CHECK(s.at(2) == doctest::Approx(2.0));
  backward(sum_all(add(l, s)));
  CHECK(x.grad()[0] == 0.0);
  CHECK(x.grad()[2] == doctest::Approx(0.25 + 0.25));
}

TEST_CASE("backward of sum gives ones") {
  auto x = Tensor::from({3}, {4, 5, 6}, true);
  backward(sum_all(x));
  CHECK(x.grad() == std::vector<double>{1, 1, 1});
}

TEST_CASE("backward of sum of squares gives 2x") {
  auto x = Tensor::from({3}, {1, 2, 3}, true);
  backward(sum_all(mul(x, x)));
  CHECK(x.grad() == std::vector<double>{2, 4, 6});
}

TEST_CASE("softmax sums to one so its gradient vanishes") {
  auto x = Tensor::from({3}, {0.3, -1.2, 2.0}, true);
  backward(sum_all(softmax(x, 0)));
  for (double g : x.grad()) CHECK(std::fabs(g) < 1e-10);
}

TEST_CASE("backward rejects non-scalar roots and accumulates across calls") {
  auto x = Tensor::from({2}, {1, 2}, true);
  CHECK_THROWS_AS(backward(scale(x, 2.0)), ShapeError);
  auto root = sum_all(scale(x, 3.0));
  backward(root);
  backward(root);
  CHECK(x.grad() == std::vector<double>{6, 6});
}

TEST_CASE("diamond graph accumulates both paths") {
  Rng rng(7);
  auto x = random_leaf({4}, rng);
  auto f = [&] {
    auto shared = tanh(x);
    return sum_all(add(mul(shared, shared), ad::exp(shared)));
  };
  auto report = grad_check(f, {x}, 1e-6, 1e-6);
  CHECK(report.passed);
  // d/dx [t^2 + e^t] = (2t + e^t)(1 - t^2)
  x.zero_grad();
  backward(f());
  for (std::size_t i = 0; i < 4; ++i) {
    const double t = std::tanh(x.at(i));
    CHECK(x.grad()[i] == doctest::Approx((2 * t + std::exp(t)) * (1 - t * t)));
  }
}

TEST_CASE("every primitive matches central differences") {
  check_primitive("matmul", [](auto& in) { return matmul(in[0], in[1]); },
                  {{3, 4}, {4, 2}});
  check_primitive("add", [](auto& in) { return add(in[0], in[1]); },
                  {{3, 4}, {3, 4}});
  check_primitive("add-bcast", [](auto& in) { return add(in[0], in[1]); },
                  {{3, 4}, {4}});
  check_primitive("sub", [](auto& in) { return sub(in[0], in[1]); },
                  {{3, 4}, {4}});
  check_primitive("mul", [](auto& in) { return mul(in[0], in[1]); },
                  {{2, 3, 2}, {3, 2}});
  check_primitive("div", [](auto& in) { return div(in[0], add_scalar(abs(in[1]), 0.5)); },
                  {{3, 4}, {3, 4}});
  check_primitive("scale", [](auto& in) { return scale(in[0], -1.7); }, {{5}});
  check_primitive("relu", [](auto& in) { return relu(in[0]); }, {{4, 3}});
  check_primitive("sigmoid", [](auto& in) { return sigmoid(in[0]); }, {{4, 3}});
  check_primitive("tanh", [](auto& in) { return ad::tanh(in[0]); }, {{4, 3}});
  check_primitive("softplus", [](auto& in) { return softplus(in[0]); }, {{4, 3}});
  check_primitive("exp", [](auto& in) { return ad::exp(in[0]); }, {{4, 3}});
  check_primitive("log", [](auto& in) { return ad::log(in[0]); }, {{4, 3}}, 0.1, 2.0);
  check_primitive("sqrt", [](auto& in) { return ad::sqrt(in[0]); }, {{4, 3}}, 0.1, 2.0);
  check_primitive("abs", [](auto& in) { return ad::abs(in[0]); }, {{4, 3}});
  check_primitive("square", [](auto& in) { return square(in[0]); }, {{4, 3}});
  check_primitive("clamp", [](auto& in) { return clamp(in[0], -1.0, 1.0); }, {{4, 3}});
  check_primitive("softmax0", [](auto& in) { return softmax(in[0], 0); }, {{4, 3}});
  check_primitive("softmax1", [](auto& in) { return softmax(in[0], 1); }, {{2, 4, 3}});
  check_primitive("sum", [](auto& in) { return sum(in[0], 1); }, {{2, 4, 3}});
  check_primitive("mean", [](auto& in) { return mean(in[0], 0); }, {{4, 3}});
  check_primitive("l2norm", [](auto& in) { return l2norm(in[0], 1); }, {{4, 3}});
  check_primitive("concat", [](auto& in) { return concat({in[0], in[1]}, 1); },
                  {{3, 2}, {3, 4}});
  check_primitive("reshape", [](auto& in) { return reshape(in[0], {3, 4}); }, {{2, 6}});
  check_primitive("transpose", [](auto& in) { return transpose(in[0]); }, {{2, 5}});
  check_primitive("gather",
                  [](auto& in) { return gather_rows(in[0], {2, 0, 2, 1}); },
                  {{3, 4}});
  check_primitive("broadcast",
                  [](auto& in) { return broadcast_to(in[0], {4, 3}); }, {{4, 1}});
  check_primitive("broadcast-lead",
                  [](auto& in) { return broadcast_to(in[0], {2, 5}); }, {{1, 5}});
}

TEST_CASE("grad_check of sum(W x) reports tiny error") {
  Rng rng(3);
  auto w = random_leaf({3, 4}, rng);
  auto x = random_leaf({4, 1}, rng);
  auto report = grad_check([&] { return sum_all(matmul(w, x)); }, {w, x}, 1e-4, 1e-6);
  CHECK(report.max_rel_error < 1e-6);
  CHECK(report.checked == 16);
}

TEST_CASE("forward values are bit-identical with identical seeds") {
  auto run = [] {
    Rng rng(42);
    ParameterStore store;
    auto mlp = make_mlp(store, "m", {4, 8, 8}, rng);
    auto x = random_leaf({5, 4}, rng);
    auto y = mlp.forward(x);
    return std::vector<double>(y.data().begin(), y.data().end());
  };
  const auto a = run();
  const auto b = run();
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("mlp contracts") {
  Rng rng(1);
  SUBCASE("zero weights broadcast the bias") {
    ParameterStore store;
    auto mlp = make_mlp(store, "z", {3, 2}, rng);
    std::fill(mlp.layers[0].weight.mutable_data().begin(),
              mlp.layers[0].weight.mutable_data().end(), 0.0);
    mlp.layers[0].bias.mutable_data()[0] = 0.5;
    mlp.layers[0].bias.mutable_data()[1] = -2.0;
    auto y = mlp.forward(random_leaf({4, 3}, rng));
    for (std::size_t i = 0; i < 4; ++i) {
      CHECK(y.at(i, 0) == 0.5);
      CHECK(y.at(i, 1) == -2.0);
    }
  }
  SUBCASE("identity weight with linear activation is the identity") {
    ParameterStore store;
    auto mlp = make_mlp(store, "id", {3, 3}, rng);
    auto w = mlp.layers[0].weight.mutable_data();
    for (std::size_t i = 0; i < 9; ++i) w[i] = (i % 4 == 0) ? 1.0 : 0.0;
    auto x = random_leaf({4, 3}, rng);
    auto y = mlp.forward(x);
    for (std::size_t i = 0; i < x.numel(); ++i) CHECK(y.at(i) == x.at(i));
  }
  SUBCASE("two layers 4->8->8 give [N,8]") {
    ParameterStore store;
    auto mlp = make_mlp(store, "two", {4, 8, 8}, rng);
    CHECK(mlp.forward(random_leaf({6, 4}, rng)).shape() == Shape{6, 8});
    CHECK_THROWS_AS(mlp.forward(random_leaf({6, 5}, rng)), ShapeError);
  }
  SUBCASE("initialization bounds") {
    ParameterStore store;
    auto mlp = make_mlp(store, "init", {16, 4}, rng);
    for (double v : mlp.layers[0].weight.data()) CHECK(std::fabs(v) <= 0.25);
    for (double v : mlp.layers[0].bias.data()) CHECK(v == 0.0);
  }
}

TEST_CASE("parameter names are unique") {
  ParameterStore store;
  store.create_zeros("a", {2});
  CHECK_THROWS_AS(store.create_zeros("a", {3}), ArgumentError);
}

TEST_CASE("checkpoint header and round trip") {
  Rng rng(5);
  ParameterStore store;
  make_mlp(store, "enc", {3, 4}, rng);
  store.set_buffer("frozen.table", {3}, {1, 2, 3});
  const auto bytes = serialize_checkpoint(store, "codec.stages=3\n");
  REQUIRE(bytes.size() > 10);
  CHECK(std::string(bytes.begin(), bytes.begin() + 4) == "DPCC");
  CHECK(bytes[4] == 1);
  CHECK(bytes[5] == 0);
  CHECK(bytes[6] == 3);  // parameter count, little-endian u32
  CHECK(bytes[7] == 0);

  const Checkpoint ck = parse_checkpoint(bytes);
  CHECK(ck.config_text == "codec.stages=3\n");
  REQUIRE(ck.entries.size() == 3);
  CHECK(ck.entries[2].name == "frozen.table");
  CHECK_FALSE(ck.entries[2].trainable);

  ParameterStore other;
  Rng rng2(99);
  make_mlp(other, "enc", {3, 4}, rng2);
  load_checkpoint(ck, other);
  CHECK(serialize_checkpoint(other, "codec.stages=3\n") == bytes);

  auto truncated = bytes;
  truncated.resize(truncated.size() - 5);
  CHECK_THROWS_AS(parse_checkpoint(truncated), DecodeError);
}

TEST_CASE("grad_check can skip coordinates sitting on a kink") {
  const Tensor x = Tensor::from({3}, {0.0, 0.5, -0.7}, true);
  auto f = [&] { return ad::sum_all(ad::relu(x)); };
  ad::GradCheckOptions opt;
  const auto strict = ad::grad_check(f, {x}, 1e-6, 1e-4, opt);
  CHECK_FALSE(strict.passed);
  opt.skip_kinks = true;
  const auto lenient = ad::grad_check(f, {x}, 1e-6, 1e-4, opt);
  CHECK(lenient.passed);
  CHECK(lenient.skipped == 1);
  CHECK(lenient.checked == 2);
}
