#include "qtrack/nn/mlp.hpp"

#include <random>
#include <stdexcept>

namespace qtrack::nn {

int MlpSpec::param_count() const {
  int n = 0;
  for (int l = 0; l < num_layers(); ++l) n += widths[l + 1] * (widths[l] + 1);
  return n;
}

void MlpSpec::validate() const {
  if (widths.size() < 2) throw std::invalid_argument("mlp: need at least input and output width");
  for (int w : widths)
    if (w <= 0) throw std::invalid_argument("mlp: widths must be positive");
  if (output == OutputTransform::ScaledTanh && !(output_scale > 0.0))
    throw std::invalid_argument("mlp: output_scale must be positive");
}

static int layer_offset(const MlpSpec& spec, int layer) {
  int off = 0;
  for (int l = 0; l < layer; ++l) off += spec.widths[l + 1] * (spec.widths[l] + 1);
  return off;
}

LayerView layer_view(const MlpSpec& spec, const Eigen::VectorXd& theta, int layer) {
  const int rows = spec.widths[layer + 1], cols = spec.widths[layer];
  const int off = layer_offset(spec, layer);
  return {Eigen::Map<const Eigen::MatrixXd>(theta.data() + off, rows, cols),
          Eigen::Map<const Eigen::VectorXd>(theta.data() + off + rows * cols, rows)};
}

LayerViewMut layer_view(const MlpSpec& spec, Eigen::VectorXd& theta, int layer) {
  const int rows = spec.widths[layer + 1], cols = spec.widths[layer];
  const int off = layer_offset(spec, layer);
  return {Eigen::Map<Eigen::MatrixXd>(theta.data() + off, rows, cols),
          Eigen::Map<Eigen::VectorXd>(theta.data() + off + rows * cols, rows)};
}

Eigen::VectorXd init_params(const MlpSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  Eigen::VectorXd theta(spec.param_count());
  int off = 0;
  for (int l = 0; l < spec.num_layers(); ++l) {
    const int rows = spec.widths[l + 1], cols = spec.widths[l];
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (int i = 0; i < rows * (cols + 1); ++i) theta[off + i] = dist(rng);
    off += rows * (cols + 1);
  }
  return theta;
}

static Eigen::MatrixXd apply_act(Activation act, const Eigen::MatrixXd& z) {
  if (act == Activation::Tanh) return z.array().tanh();
  return z.array().max(0.0);
}

static Eigen::MatrixXd act_grad(Activation act, const Eigen::MatrixXd& z) {
  if (act == Activation::Tanh) {
    Eigen::MatrixXd t = z.array().tanh();
    return 1.0 - t.array().square();
  }
  return (z.array() > 0.0).cast<double>();
}

Eigen::MatrixXd forward_batch(const MlpSpec& spec, const Eigen::VectorXd& theta,
                              const Eigen::MatrixXd& input, ForwardCache* cache) {
  spec.validate();
  if (theta.size() != spec.param_count()) throw std::invalid_argument("mlp: theta size mismatch");
  if (input.rows() != spec.input_dim()) throw std::invalid_argument("mlp: input dim mismatch");

  const int L = spec.num_layers();
  if (cache) {
    cache->activations.assign(L + 1, Eigen::MatrixXd());
    cache->pre.assign(L, Eigen::MatrixXd());
    cache->activations[0] = input;
  }
  Eigen::MatrixXd a = input;
  for (int l = 0; l < L; ++l) {
    auto [W, b] = layer_view(spec, theta, l);
    Eigen::MatrixXd z = (W * a).colwise() + b;
    if (cache) cache->pre[l] = z;
    if (l + 1 < L) {
      a = apply_act(spec.activation, z);
    } else if (spec.output == OutputTransform::ScaledTanh) {
      a = spec.output_scale * z.array().tanh();
    } else {
      a = z;
    }
    if (cache) cache->activations[l + 1] = a;
  }
  return a;
}

Eigen::VectorXd forward(const MlpSpec& spec, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& input) {
  return forward_batch(spec, theta, input, nullptr).col(0);
}

BackwardResult backward_batch(const MlpSpec& spec, const Eigen::VectorXd& theta,
                              const ForwardCache& cache, const Eigen::MatrixXd& cotangent) {
  const int L = spec.num_layers();
  if (static_cast<int>(cache.pre.size()) != L)
    throw std::invalid_argument("mlp: cache does not match spec");

  BackwardResult out;
  out.dtheta = Eigen::VectorXd::Zero(theta.size());

  Eigen::MatrixXd delta;  // dLoss/dz for the current layer
  if (spec.output == OutputTransform::ScaledTanh) {
    Eigen::MatrixXd t = cache.pre[L - 1].array().tanh();
    delta = cotangent.array() * (spec.output_scale * (1.0 - t.array().square()));
  } else {
    delta = cotangent;
  }

  for (int l = L - 1; l >= 0; --l) {
    const int rows = spec.widths[l + 1], cols = spec.widths[l];
    const int off = layer_offset(spec, l);
    Eigen::Map<Eigen::MatrixXd> dW(out.dtheta.data() + off, rows, cols);
    Eigen::Map<Eigen::VectorXd> db(out.dtheta.data() + off + rows * cols, rows);
    dW = delta * cache.activations[l].transpose();
    db = delta.rowwise().sum();
    auto [W, b] = layer_view(spec, theta, l);
    (void)b;
    Eigen::MatrixXd da = W.transpose() * delta;
    if (l > 0) {
      delta = da.array() * act_grad(spec.activation, cache.pre[l - 1]).array();
    } else {
      out.dinput = da;
    }
  }
  return out;
}

BackwardResult backward(const MlpSpec& spec, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& input, const Eigen::VectorXd& cotangent) {
  ForwardCache cache;
  forward_batch(spec, theta, input, &cache);
  return backward_batch(spec, theta, cache, cotangent);
}

}  // namespace qtrack::nn
