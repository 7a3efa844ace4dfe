#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "qfta/tensor.hpp"
#include "testutil.hpp"

using namespace qfta;
using testutil::check_gradient;
using testutil::random_tensor;

TEST_CASE("relu, softmax, matmul forward values") {
  Tape tape;
  Var x = tape.constant(Tensor::vec({-1.0, 0.0, 2.0}));
  const Tensor relu = tape.value(tape.relu(x));
  CHECK(relu.data == std::vector<double>{0.0, 0.0, 2.0});

  Var s = tape.constant(Tensor::vec({0.0, 0.0}));
  const Tensor sm = tape.value(tape.softmax(s));
  CHECK(sm.data[0] == doctest::Approx(0.5));
  CHECK(sm.data[1] == doctest::Approx(0.5));

  // identity times an arbitrary 3x3
  Tensor eye = Tensor::zeros({3, 3});
  for (int i = 0; i < 3; ++i) eye.at(i, i) = 1.0;
  Rng rng(7);
  const Tensor a = random_tensor({3, 3}, rng);
  Var prod = tape.matmul(tape.constant(eye), tape.constant(a));
  CHECK(tape.value(prod).data == a.data);
}

TEST_CASE("grad of sum of squares is 2x") {
  Tape tape;
  Var x = tape.input(Tensor::vec({1.0, 2.0, 3.0}));
  Var loss = tape.sum(tape.mul(x, x));
  const Tensor g = tape.grad(loss, x);
  CHECK(g.data == std::vector<double>{2.0, 4.0, 6.0});
}

TEST_CASE("grad of a constant w.r.t. an unrelated input is zero") {
  Tape tape;
  Var x = tape.input(Tensor::vec({1.0, 2.0}));
  Var c = tape.constant(Tensor::scalar(5.0));
  Var out = tape.mul_scalar(c, 2.0);
  const Tensor g = tape.grad(out, x);
  CHECK(g.data == std::vector<double>{0.0, 0.0});
}

TEST_CASE("backward requires a scalar output") {
  Tape tape;
  Var x = tape.input(Tensor::vec({1.0, 2.0}));
  CHECK_THROWS_AS(tape.backward(x), ContractError);
}

TEST_CASE("shape mismatches raise shape errors naming the op") {
  Tape tape;
  Var a = tape.constant(Tensor::vec({1.0, 2.0}));
  Var b = tape.constant(Tensor::vec({1.0, 2.0, 3.0}));
  CHECK_THROWS_WITH_AS(tape.add(a, b),
                       doctest::Contains("add"), ShapeError);
  Var m = tape.constant(Tensor::zeros({2, 3}));
  CHECK_THROWS_AS(tape.matmul(m, m), ShapeError);
}

TEST_CASE("log of a non-positive value is a domain error") {
  Tape tape;
  Var x = tape.constant(Tensor::vec({1.0, 0.0}));
  CHECK_THROWS_AS(tape.log(x), DomainError);
}

TEST_CASE("cosine similarity gradient matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    const Tensor av = random_tensor({8}, rng);
    const Tensor bv = random_tensor({8}, rng);
    auto cosine = [&](const Tensor& a_in) {
      Tape tape;
      Var a = tape.input(a_in);
      Var b = tape.constant(bv);
      Var num = tape.dot(a, b);
      Var den = tape.mul(tape.l2_norm(a), tape.l2_norm(b));
      return tape.scalar_value(tape.div(num, den));
    };
    Tape tape;
    Var a = tape.input(av);
    Var b = tape.constant(bv);
    Var cos = tape.div(tape.dot(a, b),
                       tape.mul(tape.l2_norm(a), tape.l2_norm(b)));
    const Tensor g = tape.grad(cos, a);
    const double err =
        check_gradient([&](const Tensor& t) { return cosine(t); }, av, g, rng,
                       8);
    CHECK(err <= 1e-6);
  }
}

TEST_CASE("every primitive passes finite-difference checks") {
  Rng rng(13);

  auto check_unary = [&](auto make, const Tensor& x, double tol = 1e-4) {
    Tape tape;
    Var in = tape.input(x);
    Var out = make(tape, in);
    Var loss = tape.sum(out);
    const Tensor g = tape.grad(loss, in);
    auto f = [&](const Tensor& t) {
      Tape tp;
      Var i2 = tp.input(t);
      return tp.scalar_value(tp.sum(make(tp, i2)));
    };
    const double err = check_gradient(f, x, g, rng);
    CHECK(err <= tol);
  };

  for (int trial = 0; trial < 5; ++trial) {
    const Tensor v = random_tensor({9}, rng);
    Tensor vpos = v;
    for (double& x : vpos.data) x = std::abs(x) + 0.5;

    check_unary([](Tape& t, Var a) { return t.relu(a); }, v);
    check_unary([](Tape& t, Var a) { return t.sigmoid(a); }, v);
    check_unary([](Tape& t, Var a) { return t.exp(a); }, v);
    check_unary([](Tape& t, Var a) { return t.log(a); }, vpos);
    check_unary([](Tape& t, Var a) { return t.sqrt(a); }, vpos);
    check_unary([](Tape& t, Var a) { return t.pow(a, 3.0); }, vpos);
    check_unary([](Tape& t, Var a) { return t.abs(a); }, v);
    check_unary([](Tape& t, Var a) { return t.softmax(a); }, v);
    check_unary([](Tape& t, Var a) { return t.logsumexp(a); }, v);
    check_unary([](Tape& t, Var a) { return t.l2_norm(a); }, v);
    check_unary([](Tape& t, Var a) { return t.max_all(a); }, v);
    check_unary([](Tape& t, Var a) { return t.maximum(a, 0.25); }, v);
    check_unary([](Tape& t, Var a) { return t.interp1d(a, {0.5, 3.25, 7.9}); },
                v);
    check_unary(
        [](Tape& t, Var a) { return t.gather(a, {0, 2, 2, 5}); }, v);
    check_unary([](Tape& t, Var a) { return t.slice(a, 2, 7); }, v);

    const Tensor m = random_tensor({4, 6}, rng);
    check_unary([](Tape& t, Var a) { return t.sum_axis0(a); }, m);
    check_unary([](Tape& t, Var a) { return t.mean_axis0(a); }, m);
    check_unary([](Tape& t, Var a) { return t.max_axis(a, 0); }, m);
    check_unary([](Tape& t, Var a) { return t.max_axis(a, 1); }, m);
    check_unary([](Tape& t, Var a) { return t.transpose(a); }, m);
    check_unary(
        [](Tape& t, Var a) { return t.row_interp(a, {0.0, 1.5, 2.75}); }, m);
    check_unary([](Tape& t, Var a) { return t.frames(a, 3, 2); },
                random_tensor({11}, rng));
  }

  // binary ops: check both operands
  for (int trial = 0; trial < 5; ++trial) {
    const Tensor a = random_tensor({7}, rng);
    const Tensor b = random_tensor({7}, rng, 1.0);
    Tensor bsafe = b;
    for (double& x : bsafe.data) x = std::abs(x) + 0.5;

    auto check_pair = [&](auto make, const Tensor& av, const Tensor& bv) {
      Tape tape;
      Var ina = tape.input(av);
      Var inb = tape.input(bv);
      Var loss = tape.sum(make(tape, ina, inb));
      tape.backward(loss);
      const Tensor ga = tape.grad_of(ina);
      const Tensor gb = tape.grad_of(inb);
      auto fa = [&](const Tensor& t) {
        Tape tp;
        return tp.scalar_value(
            tp.sum(make(tp, tp.input(t), tp.constant(bv))));
      };
      auto fb = [&](const Tensor& t) {
        Tape tp;
        return tp.scalar_value(
            tp.sum(make(tp, tp.constant(av), tp.input(t))));
      };
      CHECK(check_gradient(fa, av, ga, rng) <= 1e-4);
      CHECK(check_gradient(fb, bv, gb, rng) <= 1e-4);
    };

    check_pair([](Tape& t, Var x, Var y) { return t.add(x, y); }, a, b);
    check_pair([](Tape& t, Var x, Var y) { return t.sub(x, y); }, a, b);
    check_pair([](Tape& t, Var x, Var y) { return t.mul(x, y); }, a, b);
    check_pair([](Tape& t, Var x, Var y) { return t.div(x, y); }, a, bsafe);
    check_pair([](Tape& t, Var x, Var y) { return t.dot(x, y); }, a, b);
    check_pair([](Tape& t, Var x, Var y) { return t.concat(x, y); }, a, b);
    check_pair([](Tape& t, Var x, Var y) { return t.conv1d_full(x, y); }, a,
               b);
    check_pair([](Tape& t, Var x, Var y) { return t.conv1d_same(x, y); }, a,
               b);
    check_pair([](Tape& t, Var x, Var y) { return t.conv1d_causal(x, y); }, a,
               b);

    const Tensor ma = random_tensor({3, 5}, rng);
    const Tensor mb = random_tensor({5, 4}, rng);
    check_pair([](Tape& t, Var x, Var y) { return t.matmul(x, y); }, ma, mb);
    const Tensor mc = random_tensor({4, 5}, rng);
    check_pair([](Tape& t, Var x, Var y) { return t.matmul_nt(x, y); }, ma,
               mc);
    const Tensor rowv = random_tensor({5}, rng);
    check_pair([](Tape& t, Var x, Var y) { return t.mul_rows(x, y); }, ma,
               rowv);
    check_pair([](Tape& t, Var x, Var y) { return t.add_rows(x, y); }, ma,
               rowv);
  }
}

TEST_CASE("backward of a sum of subgraphs equals the sum of backwards") {
  Rng rng(17);
  const Tensor xv = random_tensor({6}, rng);

  auto grad_of = [&](auto make_loss) {
    Tape tape;
    Var x = tape.input(xv);
    return tape.grad(make_loss(tape, x), x);
  };

  const Tensor ga =
      grad_of([](Tape& t, Var x) { return t.sum(t.mul(x, x)); });
  const Tensor gb =
      grad_of([](Tape& t, Var x) { return t.logsumexp(x); });
  const Tensor gsum = grad_of([](Tape& t, Var x) {
    return t.add(t.sum(t.mul(x, x)), t.logsumexp(x));
  });
  for (size_t i = 0; i < xv.data.size(); ++i)
    CHECK(gsum.data[i] ==
          doctest::Approx(ga.data[i] + gb.data[i]).epsilon(1e-12));
}

TEST_CASE("gradients accumulate across reuse of the same input") {
  Tape tape;
  Var x = tape.input(Tensor::scalar(3.0));
  // f = x * x + 2x -> f' = 2x + 2 = 8
  Var f = tape.add(tape.mul(x, x), tape.mul_scalar(x, 2.0));
  const Tensor g = tape.grad(f, x);
  CHECK(g.data[0] == doctest::Approx(8.0));
}
