#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

namespace qtrack::nn {

enum class Activation : std::uint8_t { Tanh = 0, Relu = 1 };
enum class OutputTransform : std::uint8_t { Identity = 0, ScaledTanh = 1 };

/* Fully connected net: widths = {in, hidden..., out}. Parameters live in one
 * flat vector so optimizers and finite-difference checks can treat the net as
 * a plain function R^P -> R^out. */
struct MlpSpec {
  std::vector<int> widths;
  Activation activation = Activation::Tanh;
  OutputTransform output = OutputTransform::Identity;
  double output_scale = 1.0;

  int num_layers() const { return static_cast<int>(widths.size()) - 1; }
  int input_dim() const { return widths.front(); }
  int output_dim() const { return widths.back(); }
  int param_count() const;
  void validate() const;

  bool operator==(const MlpSpec&) const = default;
};

/* Views of one layer's weights inside the flat parameter vector. */
struct LayerView {
  Eigen::Map<const Eigen::MatrixXd> W;
  Eigen::Map<const Eigen::VectorXd> b;
};
struct LayerViewMut {
  Eigen::Map<Eigen::MatrixXd> W;
  Eigen::Map<Eigen::VectorXd> b;
};

LayerView layer_view(const MlpSpec& spec, const Eigen::VectorXd& theta, int layer);
LayerViewMut layer_view(const MlpSpec& spec, Eigen::VectorXd& theta, int layer);

/* Fan-in scaled uniform init, deterministic for a given seed. */
Eigen::VectorXd init_params(const MlpSpec& spec, std::uint64_t seed);

/* Cached intermediates from a forward pass; one column per batch sample. */
struct ForwardCache {
  std::vector<Eigen::MatrixXd> activations;  // activations[0] = input
  std::vector<Eigen::MatrixXd> pre;          // pre[l] = W_l a_l + b_l
};

Eigen::MatrixXd forward_batch(const MlpSpec& spec, const Eigen::VectorXd& theta,
                              const Eigen::MatrixXd& input, ForwardCache* cache = nullptr);

Eigen::VectorXd forward(const MlpSpec& spec, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& input);

struct BackwardResult {
  Eigen::VectorXd dtheta;
  Eigen::MatrixXd dinput;
};

/* Reverse pass for the batch that produced `cache`. `cotangent` holds
 * dLoss/dOutput per column; dtheta accumulates over the batch. */
BackwardResult backward_batch(const MlpSpec& spec, const Eigen::VectorXd& theta,
                              const ForwardCache& cache, const Eigen::MatrixXd& cotangent);

BackwardResult backward(const MlpSpec& spec, const Eigen::VectorXd& theta,
                        const Eigen::VectorXd& input, const Eigen::VectorXd& cotangent);

}  // namespace qtrack::nn
