#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "hfusion/mlp.hpp"
#include "hfusion/rng.hpp"

using namespace hfusion;

namespace {

Mlp identity_net(int dim) {
  Mlp net;
  Layer l;
  l.w = Mat(dim, dim);
  for (int i = 0; i < dim; ++i) l.w(i, i) = 1.0;
  l.b.assign(dim, 0.0);
  l.act = Act::identity;
  net.layers.push_back(l);
  return net;
}

Mat random_mat(int r, int c, Rng& rng, double scale = 1.0) {
  Mat m(r, c);
  for (double& v : m.data) v = rng.normal() * scale;
  return m;
}

}  // namespace

TEST_CASE("identity layer reproduces its input") {
  Rng rng(0);
  const Mat x = random_mat(4, 3, rng);
  CHECK(forward(identity_net(3), x) == x);
}

TEST_CASE("relu layer zeroes an all-negative batch") {
  Mlp net = identity_net(3);
  net.layers[0].act = Act::relu;
  Mat x(2, 3);
  for (double& v : x.data) v = -1.5;
  const Mat y = forward(net, x);
  for (double v : y.data) CHECK(v == 0.0);
}

TEST_CASE("two-layer forward matches straight-line recomputation") {
  Rng rng(0);
  Mlp net = make_mlp({3, 4, 2}, rng);
  const Mat x = random_mat(5, 3, rng);
  const Mat y = forward(net, x);

  // independent recomputation, scalar loops only
  for (int n = 0; n < x.rows; ++n) {
    double h[4];
    for (int j = 0; j < 4; ++j) {
      double z = net.layers[0].b[j];
      for (int k = 0; k < 3; ++k) z += net.layers[0].w(j, k) * x(n, k);
      h[j] = z > 0 ? z : 0;
    }
    for (int j = 0; j < 2; ++j) {
      double z = net.layers[1].b[j];
      for (int k = 0; k < 4; ++k) z += net.layers[1].w(j, k) * h[k];
      CHECK(y(n, j) == Catch::Approx(z).epsilon(1e-14));
    }
  }
}

TEST_CASE("forward rejects bad input") {
  Rng rng(1);
  Mlp net = make_mlp({3, 2}, rng);
  Mat wrong(2, 4);
  CHECK_THROWS_AS(forward(net, wrong), Error);
  Mat bad(1, 3);
  bad(0, 1) = std::nan("");
  try {
    forward(net, bad);
    FAIL("expected NonFiniteInput");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::non_finite_input);
  }
}

TEST_CASE("forward is pure") {
  Rng rng(2);
  Mlp net = make_mlp({6, 8, 4}, rng);
  const Mat x = random_mat(3, 6, rng);
  CHECK(forward(net, x) == forward(net, x));
}

TEST_CASE("zero output gradient gives zero parameter gradients") {
  Rng rng(3);
  Mlp net = make_mlp({3, 4, 2}, rng);
  Tape tape;
  const Mat x = random_mat(5, 3, rng);
  forward(net, x, &tape);
  const Grads g = backward(net, tape, Mat(5, 2));
  for (const auto& gw : g.w)
    for (double v : gw.data) CHECK(v == 0.0);
  for (const auto& gb : g.b)
    for (double v : gb) CHECK(v == 0.0);
}

TEST_CASE("single linear layer gradient is output_grad^T * input") {
  Rng rng(4);
  Mlp net = make_mlp({3, 2}, rng);
  Tape tape;
  const Mat x = random_mat(6, 3, rng);
  forward(net, x, &tape);
  const Mat og = random_mat(6, 2, rng);
  const Grads g = backward(net, tape, og);
  for (int o = 0; o < 2; ++o)
    for (int i = 0; i < 3; ++i) {
      double expect = 0.0;
      for (int n = 0; n < 6; ++n) expect += og(n, o) * x(n, i);
      CHECK(g.w[0](o, i) == Catch::Approx(expect).epsilon(1e-14));
    }
}

TEST_CASE("backward matches finite differences on a relu net") {
  Rng rng(5);
  Mlp net = make_mlp({4, 6, 3}, rng);
  const Mat x = random_mat(7, 4, rng);
  const Mat w = random_mat(7, 3, rng);  // fixed weighting of outputs

  auto loss = [&](const Mlp& m) {
    Tape tape;
    const Mat y = forward(m, x, &tape);
    double v = 0.0;
    for (size_t i = 0; i < y.data.size(); ++i) v += y.data[i] * w.data[i];
    return std::make_pair(v, backward(m, tape, w));
  };
  CHECK(finite_diff_check(net, loss, 1e-5, 80, 17) < 1e-4);
}

TEST_CASE("tape mismatch is detected") {
  Rng rng(6);
  Mlp net = make_mlp({3, 4, 2}, rng);
  Mlp other = make_mlp({3, 5, 2}, rng);
  Tape tape;
  forward(net, random_mat(2, 3, rng), &tape);
  try {
    backward(other, tape, Mat(2, 2));
    FAIL("expected TapeMismatch");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::tape_mismatch);
  }
}

TEST_CASE("plain sgd step without momentum or decay") {
  Rng rng(7);
  Mlp net = make_mlp({2, 2}, rng);
  const Mlp before = net;
  OptimState opt = make_optim(net, 0.1, 0.0, 0.0);
  Grads g = zero_grads(net);
  for (double& v : g.w[0].data) v = 1.0;
  sgd_step(net, g, opt);
  for (size_t i = 0; i < net.layers[0].w.data.size(); ++i)
    CHECK(net.layers[0].w.data[i] ==
          Catch::Approx(before.layers[0].w.data[i] - 0.1).epsilon(1e-15));
}

TEST_CASE("zero gradient and zero decay leave parameters unchanged") {
  Rng rng(8);
  Mlp net = make_mlp({3, 3}, rng);
  const Mlp before = net;
  OptimState opt = make_optim(net, 0.5, 0.9, 0.0);
  sgd_step(net, zero_grads(net), opt);
  CHECK(net == before);
}

TEST_CASE("momentum recurrence matches a hand-computed scalar sequence") {
  // scalar parameter p0 = 1, grad = 2 each step, lr = 0.1, momentum = 0.9:
  //   v1 = 2,          p1 = 1 - 0.2   = 0.8
  //   v2 = 0.9*2 + 2,  p2 = 0.8 - 0.38 = 0.42
  Mlp net;
  Layer l;
  l.w = Mat(1, 1);
  l.w(0, 0) = 1.0;
  l.b.assign(1, 0.0);
  net.layers.push_back(l);
  OptimState opt = make_optim(net, 0.1, 0.9, 0.0);
  Grads g = zero_grads(net);
  g.w[0](0, 0) = 2.0;
  sgd_step(net, g, opt);
  CHECK(net.layers[0].w(0, 0) == Catch::Approx(0.8).epsilon(1e-15));
  sgd_step(net, g, opt);
  CHECK(net.layers[0].w(0, 0) == Catch::Approx(0.42).epsilon(1e-15));
}

TEST_CASE("weight decay folds into the gradient") {
  Mlp net;
  Layer l;
  l.w = Mat(1, 1);
  l.w(0, 0) = 2.0;
  l.b.assign(1, 0.0);
  net.layers.push_back(l);
  OptimState opt = make_optim(net, 0.1, 0.0, 0.5);
  sgd_step(net, zero_grads(net), opt);
  // v = 0 + 0 + 0.5*2 = 1; p = 2 - 0.1 = 1.9
  CHECK(net.layers[0].w(0, 0) == Catch::Approx(1.9).epsilon(1e-15));
}

TEST_CASE("finite_diff_check on an exactly quadratic loss") {
  Rng rng(9);
  Mlp net = make_mlp({4, 4, 3}, rng);
  auto loss = [](const Mlp& m) {
    double v = 0.0;
    Grads g;
    for (const auto& l : m.layers) {
      Mat gw(l.w.rows, l.w.cols);
      Vec gb(l.b.size(), 0.0);
      for (size_t i = 0; i < l.w.data.size(); ++i) {
        v += 0.5 * l.w.data[i] * l.w.data[i];
        gw.data[i] = l.w.data[i];
      }
      for (size_t i = 0; i < l.b.size(); ++i) {
        v += 0.5 * l.b[i] * l.b[i];
        gb[i] = l.b[i];
      }
      g.w.push_back(std::move(gw));
      g.b.push_back(std::move(gb));
    }
    return std::make_pair(v, g);
  };
  CHECK(finite_diff_check(net, loss, 1e-5, 50, 3) < 1e-7);
}

TEST_CASE("same seed builds identical networks") {
  Rng a(123), b(123);
  const Mlp na = make_mlp({5, 8, 4}, a);
  const Mlp nb = make_mlp({5, 8, 4}, b);
  CHECK(na == nb);
}
