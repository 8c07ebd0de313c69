#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <stdexcept>

#include "beamtrack/neural.hpp"

using namespace beamtrack;

namespace {

double squared_loss(const Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) {
  const Eigen::MatrixXd out = forward(net, x);
  return 0.5 * (out - target).squaredNorm();
}

// Central finite-difference check of d(squared loss)/d(params) against
// backpropagation. Returns the max relative error over all parameters.
double max_grad_error(Mlp& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& target) {
  ForwardCache cache;
  const Eigen::MatrixXd out = forward(net, x, &cache);
  const Gradients grads = backward(net, cache, out - target);

  double worst = 0.0;
  const double h = 1e-6;
  for (size_t l = 0; l < net.layers.size(); ++l) {
    auto probe = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double hi = squared_loss(net, x, target);
      param = saved - h;
      const double lo = squared_loss(net, x, target);
      param = saved;
      const double fd = (hi - lo) / (2.0 * h);
      const double denom = std::max(1e-6, std::abs(fd) + std::abs(analytic));
      worst = std::max(worst, std::abs(fd - analytic) / denom);
    };
    for (int i = 0; i < net.layers[l].w.rows(); ++i) {
      for (int j = 0; j < net.layers[l].w.cols(); ++j) {
        probe(net.layers[l].w(i, j), grads.dw[l](i, j));
      }
      probe(net.layers[l].b[i], grads.db[l][i]);
    }
  }
  return worst;
}

}  // namespace

TEST_CASE("forward pass matches a hand-computed network") {
  Mlp net;
  Layer l1;
  l1.w.resize(2, 2);
  l1.w << 1.0, 2.0, -1.0, 0.5;
  l1.b.resize(2);
  l1.b << 0.5, -1.0;
  l1.act = Activation::relu;
  Layer l2;
  l2.w.resize(1, 2);
  l2.w << 1.0, -2.0;
  l2.b.resize(1);
  l2.b << 0.25;
  l2.act = Activation::identity;
  net.layers = {l1, l2};

  Eigen::MatrixXd x(2, 2);
  x << 1.0, 2.0, -1.0, 1.0;
  const Eigen::MatrixXd out = forward(net, x);
  REQUIRE(out.rows() == 1);
  REQUIRE(out.cols() == 2);
  // column 0: pre1 = (-0.5, -2.5) -> relu (0, 0) -> 0.25
  CHECK(out(0, 0) == doctest::Approx(0.25));
  // column 1: pre1 = (4.5, -2.5) -> relu (4.5, 0) -> 4.5 + 0.25
  CHECK(out(0, 1) == doctest::Approx(4.75));
}

TEST_CASE("sigmoid output layer squashes into the unit interval") {
  Rng rng(3);
  Mlp net = make_mlp({3, 8, 2}, {Activation::relu, Activation::sigmoid}, rng);
  Eigen::MatrixXd x = Eigen::MatrixXd::Random(3, 16);
  const Eigen::MatrixXd out = forward(net, x);
  CHECK(out.minCoeff() > 0.0);
  CHECK(out.maxCoeff() < 1.0);
}

TEST_CASE("initialization stays within the fan-in bound") {
  Rng rng(5);
  const Mlp net = make_mlp({4, 200, 200, 10, 2},
                           {Activation::relu, Activation::relu, Activation::relu,
                            Activation::sigmoid},
                           rng);
  for (const Layer& layer : net.layers) {
    const double bound = 1.0 / std::sqrt(double(layer.w.cols()));
    CHECK(layer.w.cwiseAbs().maxCoeff() <= bound);
    CHECK(layer.b.cwiseAbs().maxCoeff() <= bound);
  }
}

TEST_CASE("backpropagation matches finite differences on small networks") {
  Rng rng(7);
  Mlp net = make_mlp({3, 5, 4, 2}, {Activation::relu, Activation::relu, Activation::sigmoid}, rng);
  Eigen::MatrixXd x(3, 4);
  x.setRandom();
  Eigen::MatrixXd target(2, 4);
  target.setRandom();
  CHECK(max_grad_error(net, x, target) < 1e-4);
}

TEST_CASE("backpropagation matches finite differences on an identity head") {
  Rng rng(9);
  Mlp net = make_mlp({6, 10, 1}, {Activation::relu, Activation::identity}, rng);
  Eigen::MatrixXd x(6, 3);
  x.setRandom();
  Eigen::MatrixXd target(1, 3);
  target.setRandom();
  CHECK(max_grad_error(net, x, target) < 1e-4);
}

TEST_CASE("input gradients chain through a composed network pair") {
  // Chain rule across two networks: d mean(Q(s, pi(s))) / d actor params via
  // the critic's input gradient, verified against finite differences.
  Rng rng(11);
  Mlp actor = make_mlp({4, 8, 6, 2},
                       {Activation::relu, Activation::relu, Activation::sigmoid}, rng);
  Mlp critic = make_mlp({6, 8, 1}, {Activation::relu, Activation::identity}, rng);
  Eigen::MatrixXd obs(4, 5);
  obs.setRandom();
  const int batch = int(obs.cols());

  auto objective = [&]() {
    const Eigen::MatrixXd actions = forward(actor, obs);
    Eigen::MatrixXd joint(6, batch);
    joint.topRows(4) = obs;
    joint.bottomRows(2) = actions;
    return forward(critic, joint).row(0).mean();
  };

  ForwardCache actor_cache;
  const Eigen::MatrixXd actions = forward(actor, obs, &actor_cache);
  Eigen::MatrixXd joint(6, batch);
  joint.topRows(4) = obs;
  joint.bottomRows(2) = actions;
  ForwardCache critic_cache;
  forward(critic, joint, &critic_cache);
  Eigen::MatrixXd dout = Eigen::MatrixXd::Constant(1, batch, 1.0 / batch);
  Eigen::MatrixXd djoint;
  backward(critic, critic_cache, dout, &djoint);
  const Gradients actor_grads = backward(actor, actor_cache, djoint.bottomRows(2));

  double worst = 0.0;
  const double h = 1e-6;
  for (size_t l = 0; l < actor.layers.size(); ++l) {
    for (int i = 0; i < actor.layers[l].w.rows(); ++i) {
      for (int j = 0; j < actor.layers[l].w.cols(); ++j) {
        double& param = actor.layers[l].w(i, j);
        const double saved = param;
        param = saved + h;
        const double hi = objective();
        param = saved - h;
        const double lo = objective();
        param = saved;
        const double fd = (hi - lo) / (2.0 * h);
        const double analytic = actor_grads.dw[l](i, j);
        const double denom = std::max(1e-6, std::abs(fd) + std::abs(analytic));
        worst = std::max(worst, std::abs(fd - analytic) / denom);
      }
    }
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("optimizer reproduces the reference adaptive-moment updates") {
  Mlp net;
  Layer l;
  l.w = Eigen::MatrixXd::Constant(1, 1, 0.5);
  l.b = Eigen::VectorXd::Zero(1);
  l.act = Activation::identity;
  net.layers = {l};
  AdamState opt = make_adam(net);

  double m = 0.0, v = 0.0, theta = 0.5;
  const double lr = 0.1, b1 = 0.9, b2 = 0.999, eps = 1e-8;
  for (int step = 1; step <= 3; ++step) {
    const double g = 1.0 + 0.5 * step;
    Gradients grads;
    grads.dw = {Eigen::MatrixXd::Constant(1, 1, g)};
    grads.db = {Eigen::VectorXd::Zero(1)};
    apply_gradients(net, opt, grads, lr);

    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, step));
    const double vhat = v / (1 - std::pow(b2, step));
    theta -= lr * mhat / (std::sqrt(vhat) + eps);
    CHECK(net.layers[0].w(0, 0) == doctest::Approx(theta).epsilon(1e-12));
  }
}

TEST_CASE("optimizer rejects non-finite gradients") {
  Rng rng(13);
  Mlp net = make_mlp({2, 3, 1}, {Activation::relu, Activation::identity}, rng);
  AdamState opt = make_adam(net);
  Gradients grads;
  grads.dw = {Eigen::MatrixXd::Zero(3, 2), Eigen::MatrixXd::Zero(1, 3)};
  grads.db = {Eigen::VectorXd::Zero(3), Eigen::VectorXd::Zero(1)};
  grads.dw[1](0, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_AS(apply_gradients(net, opt, grads, 0.01), std::runtime_error);
}

TEST_CASE("soft target blending mixes parameters by the configured rate") {
  Rng rng(15);
  Mlp online = make_mlp({2, 3, 1}, {Activation::relu, Activation::identity}, rng);
  Mlp target = make_mlp({2, 3, 1}, {Activation::relu, Activation::identity}, rng);
  const Eigen::MatrixXd before = target.layers[0].w;
  soft_update(target, online, 0.01);
  const Eigen::MatrixXd expected = 0.99 * before + 0.01 * online.layers[0].w;
  CHECK((target.layers[0].w - expected).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("networks round-trip bit-exactly through disk") {
  Rng rng(17);
  const Mlp net = make_mlp({4, 20, 10, 2},
                           {Activation::relu, Activation::relu, Activation::sigmoid}, rng);
  const auto path = (std::filesystem::temp_directory_path() / "beamtrack_net.bin").string();
  save_mlp(path, net);
  const Mlp loaded = load_mlp(path);
  REQUIRE(loaded.layers.size() == net.layers.size());
  for (size_t l = 0; l < net.layers.size(); ++l) {
    CHECK(loaded.layers[l].act == net.layers[l].act);
    CHECK((loaded.layers[l].w - net.layers[l].w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((loaded.layers[l].b - net.layers[l].b).cwiseAbs().maxCoeff() == 0.0);
  }
  std::filesystem::remove(path);
}

TEST_CASE("loading a corrupt checkpoint fails loudly") {
  const auto path = (std::filesystem::temp_directory_path() / "beamtrack_bad.bin").string();
  {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    const char junk[] = "not a network";
    std::fwrite(junk, 1, sizeof(junk), f);
    std::fclose(f);
  }
  CHECK_THROWS_AS(load_mlp(path), std::runtime_error);
  CHECK_THROWS_AS(load_mlp("/nonexistent/dir/net.bin"), std::runtime_error);
  std::filesystem::remove(path);
}
