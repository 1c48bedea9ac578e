#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <random>

#include "qtrack/nn/checkpoint.hpp"
#include "qtrack/nn/mlp.hpp"
#include "qtrack/nn/optim.hpp"

using namespace qtrack;

namespace {

/* Loss = c . f(x); gradient of this scalar against theta is checked against
 * central differences. */
double probe_loss(const nn::MlpSpec& spec, const Eigen::VectorXd& theta,
                  const Eigen::VectorXd& input, const Eigen::VectorXd& cot) {
  return cot.dot(nn::forward(spec, theta, input));
}

double max_rel_grad_error(const nn::MlpSpec& spec, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Eigen::VectorXd theta = nn::init_params(spec, seed);
  Eigen::VectorXd input(spec.input_dim());
  for (int i = 0; i < input.size(); ++i) input[i] = gauss(rng);
  Eigen::VectorXd cot(spec.output_dim());
  for (int i = 0; i < cot.size(); ++i) cot[i] = gauss(rng);

  const nn::BackwardResult g = nn::backward(spec, theta, input, cot);

  const double h = 1e-6;
  double worst = 0.0;
  std::uniform_int_distribution<int> pick(0, static_cast<int>(theta.size()) - 1);
  for (int trial = 0; trial < 60; ++trial) {
    const int k = pick(rng);
    Eigen::VectorXd tp = theta, tm = theta;
    tp[k] += h;
    tm[k] -= h;
    const double fd = (probe_loss(spec, tp, input, cot) - probe_loss(spec, tm, input, cot)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(g.dtheta[k]), 1e-8});
    worst = std::max(worst, std::abs(fd - g.dtheta[k]) / denom);
  }
  for (int k = 0; k < input.size(); ++k) {
    Eigen::VectorXd ip = input, im = input;
    ip[k] += h;
    im[k] -= h;
    const double fd = (probe_loss(spec, theta, ip, cot) - probe_loss(spec, theta, im, cot)) / (2 * h);
    const double denom = std::max({std::abs(fd), std::abs(g.dinput(k, 0)), 1e-8});
    worst = std::max(worst, std::abs(fd - g.dinput(k, 0)) / denom);
  }
  return worst;
}

}  // namespace

TEST_CASE("zero-weight tanh net maps everything to zero") {
  nn::MlpSpec spec{{3, 8, 2}, nn::Activation::Tanh};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(spec.param_count());
  Eigen::VectorXd out = nn::forward(spec, theta, Eigen::Vector3d(0.3, -1.2, 4.0));
  CHECK(out.norm() == 0.0);
}

TEST_CASE("identity-initialized linear layer reproduces its input") {
  nn::MlpSpec spec{{4, 4}};
  Eigen::VectorXd theta = Eigen::VectorXd::Zero(spec.param_count());
  auto lv = nn::layer_view(spec, theta, 0);
  lv.W = Eigen::Matrix4d::Identity();
  Eigen::VectorXd x(4);
  x << 0.5, -2.0, 3.25, 0.0;
  CHECK((nn::forward(spec, theta, x) - x).norm() == 0.0);
}

TEST_CASE("forward is bit-identical across repeated calls") {
  nn::MlpSpec spec{{5, 16, 16, 3}, nn::Activation::Tanh};
  Eigen::VectorXd theta = nn::init_params(spec, 42);
  Eigen::VectorXd x(5);
  x << 1.0, -0.5, 0.25, 2.0, -3.0;
  Eigen::VectorXd a = nn::forward(spec, theta, x);
  Eigen::VectorXd b = nn::forward(spec, theta, x);
  for (int i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("linear layer gradient is the outer product of cotangent and input") {
  nn::MlpSpec spec{{3, 2}};
  Eigen::VectorXd theta = nn::init_params(spec, 7);
  Eigen::Vector3d x(0.4, -1.1, 2.2);
  Eigen::Vector2d cot(1.5, -0.5);
  nn::BackwardResult g = nn::backward(spec, theta, x, cot);
  auto lv = nn::layer_view(spec, g.dtheta, 0);
  Eigen::MatrixXd expect = cot * x.transpose();
  CHECK((Eigen::MatrixXd(lv.W) - expect).cwiseAbs().maxCoeff() < 1e-14);
  CHECK((Eigen::VectorXd(lv.b) - cot).cwiseAbs().maxCoeff() < 1e-14);
}

TEST_CASE("zero cotangent produces zero gradients") {
  nn::MlpSpec spec{{3, 8, 2}, nn::Activation::Tanh};
  Eigen::VectorXd theta = nn::init_params(spec, 3);
  nn::BackwardResult g = nn::backward(spec, theta, Eigen::Vector3d(1, 2, 3), Eigen::Vector2d(0, 0));
  CHECK(g.dtheta.norm() == 0.0);
  CHECK(g.dinput.norm() == 0.0);
}

TEST_CASE("backward matches central differences on every deployed architecture") {
  // Shapes used by the metric, gain, actor, and critic nets.
  std::vector<nn::MlpSpec> specs = {
      {{13, 64, 64, 91}, nn::Activation::Tanh},
      {{13, 64, 64, 52}, nn::Activation::Tanh, nn::OutputTransform::ScaledTanh, 4.0},
      {{30, 128, 128, 8}, nn::Activation::Relu},
      {{38, 128, 128, 20}, nn::Activation::Relu},
      {{6, 32, 1}, nn::Activation::Tanh},
  };
  for (std::size_t i = 0; i < specs.size(); ++i) {
    CAPTURE(i);
    CHECK(max_rel_grad_error(specs[i], 1000 + i) < 1e-4);
  }
}

TEST_CASE("batched backward equals the sum of per-sample gradients") {
  nn::MlpSpec spec{{4, 12, 3}, nn::Activation::Tanh};
  Eigen::VectorXd theta = nn::init_params(spec, 11);
  std::mt19937_64 rng(12);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int B = 5;
  Eigen::MatrixXd X(4, B), C(3, B);
  for (int j = 0; j < B; ++j) {
    for (int i = 0; i < 4; ++i) X(i, j) = gauss(rng);
    for (int i = 0; i < 3; ++i) C(i, j) = gauss(rng);
  }
  nn::ForwardCache cache;
  nn::forward_batch(spec, theta, X, &cache);
  nn::BackwardResult batched = nn::backward_batch(spec, theta, cache, C);

  Eigen::VectorXd acc = Eigen::VectorXd::Zero(theta.size());
  for (int j = 0; j < B; ++j) acc += nn::backward(spec, theta, X.col(j), C.col(j)).dtheta;
  CHECK((batched.dtheta - acc).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("plain sgd leaves parameters alone on zero gradient or zero rate") {
  Eigen::VectorXd theta(2);
  theta << 1.0, -2.0;
  const Eigen::VectorXd theta0 = theta;

  nn::Optimizer opt;
  opt.rule = nn::UpdateRule::Sgd;
  opt.lr = 0.1;
  opt.step(theta, Eigen::VectorXd::Zero(2));
  CHECK((theta - theta0).norm() == 0.0);

  opt.lr = 0.0;
  opt.step(theta, Eigen::Vector2d(5.0, -3.0));
  CHECK((theta - theta0).norm() == 0.0);
}

TEST_CASE("plain sgd on a scalar quadratic converges monotonically") {
  // d/dt (t - 3)^2 = 2 (t - 3); rate 0.1 contracts the error by 0.8 per step.
  Eigen::VectorXd theta(1);
  theta << -5.0;
  nn::Optimizer opt;
  opt.rule = nn::UpdateRule::Sgd;
  opt.lr = 0.1;
  double prev = std::abs(theta[0] - 3.0);
  int steps = 0;
  while (std::abs(theta[0] - 3.0) > 1e-6 && steps < 200) {
    Eigen::VectorXd g(1);
    g << 2.0 * (theta[0] - 3.0);
    opt.step(theta, g);
    const double err = std::abs(theta[0] - 3.0);
    CHECK(err <= prev);
    prev = err;
    ++steps;
  }
  CHECK(std::abs(theta[0] - 3.0) <= 1e-6);
  CHECK(steps <= 200);
}

TEST_CASE("non-finite gradient skips the update and flags it") {
  Eigen::VectorXd theta(2);
  theta << 1.0, 2.0;
  const Eigen::VectorXd theta0 = theta;
  nn::Optimizer opt;
  Eigen::VectorXd g(2);
  g << std::numeric_limits<double>::quiet_NaN(), 1.0;
  opt.step(theta, g);
  CHECK((theta - theta0).norm() == 0.0);
  CHECK(opt.skipped_steps == 1);
}

TEST_CASE("adam updates are deterministic for a fixed seed and batch order") {
  nn::MlpSpec spec{{3, 8, 1}, nn::Activation::Tanh};
  auto run = [&] {
    Eigen::VectorXd theta = nn::init_params(spec, 5);
    nn::Optimizer opt;
    std::mt19937_64 rng(99);
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (int it = 0; it < 50; ++it) {
      Eigen::Vector3d x(gauss(rng), gauss(rng), gauss(rng));
      Eigen::VectorXd cot(1);
      cot << nn::forward(spec, theta, x)[0] - 1.0;
      opt.step(theta, nn::backward(spec, theta, x, cot).dtheta);
    }
    return theta;
  };
  Eigen::VectorXd a = run(), b = run();
  for (int i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);
}

TEST_CASE("checkpoint files round-trip specs and parameters exactly") {
  nn::Checkpoint ck;
  nn::MlpSpec spec{{13, 64, 64, 91}, nn::Activation::Tanh};
  ck.nets["metric"] = {spec, nn::init_params(spec, 21)};
  nn::MlpSpec spec2{{13, 32, 52}, nn::Activation::Tanh, nn::OutputTransform::ScaledTanh, 2.5};
  ck.nets["gain"] = {spec2, nn::init_params(spec2, 22)};
  ck.metadata_json = "{\"note\":\"round-trip\"}";

  const std::string path = "ck_roundtrip.bin";
  nn::save_checkpoint(path, ck);
  nn::Checkpoint back = nn::load_checkpoint(path);
  std::remove(path.c_str());
  std::remove((path + ".json").c_str());

  REQUIRE(back.nets.count("metric") == 1);
  REQUIRE(back.nets.count("gain") == 1);
  CHECK(back.nets["metric"].spec == spec);
  CHECK(back.nets["gain"].spec == spec2);
  CHECK((back.nets["metric"].theta - ck.nets["metric"].theta).norm() == 0.0);
  CHECK((back.nets["gain"].theta - ck.nets["gain"].theta).norm() == 0.0);
}

TEST_CASE("shape mismatches are rejected") {
  nn::MlpSpec spec{{3, 4, 2}, nn::Activation::Tanh};
  Eigen::VectorXd theta = nn::init_params(spec, 1);
  CHECK_THROWS(nn::forward(spec, theta, Eigen::Vector2d(1, 2)));
  CHECK_THROWS(nn::forward(spec, Eigen::VectorXd::Zero(3), Eigen::Vector3d(1, 2, 3)));
}
