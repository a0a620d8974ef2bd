#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "homeofit/poly.hpp"

namespace homeofit {

enum class Activation {
  kLipSwish,
  /// Linear residual branches; used to check gradients against a hand-derived chain rule.
  kIdentity,
};

/// x * sigmoid(beta * x) / 1.1, Lipschitz constant at most 1 for every beta > 0.
double lipswish(double x, double beta) noexcept;

struct InvResNetConfig {
  int dim = 1;
  int n_blocks = 15;
  int width = 8;
  /// Lipschitz budget of each residual branch, in (0, 1).
  double lipschitz = 0.97;
  Activation activation = Activation::kLipSwish;
  std::uint64_t seed = 0;
  /// Factor on the initial weights and bias of the last layer of each
  /// residual branch; small values start the network near the identity.
  double init_gain = 1.0;
  /// Per-axis input domain, mapped affinely onto [-1, 1] before the blocks.
  /// Empty means [-1, 1] on every axis.
  std::vector<Interval> domain;
};

/// Activations retained by a forward pass for a later `backward` call.
struct ForwardCache {
  struct Block {
    Eigen::MatrixXd input;  // D x P
    Eigen::MatrixXd pre1;   // width x P
    Eigen::MatrixXd pre2;   // width x P
    Eigen::MatrixXd gate1;  // sigmoid(beta1 * pre1); empty for the identity activation
    Eigen::MatrixXd gate2;
  };
  std::vector<Block> blocks;
  Eigen::MatrixXd latent;   // D x P, output of the last block
  std::uint64_t generation = 0;

  bool empty() const noexcept { return blocks.empty(); }
  long size() const noexcept { return latent.cols(); }
};

/// Invertible residual network x -> x + g_k(x), k = 1..n_blocks, where each
/// g_k = W3 act(W2 act(W1 x + b1) + b2) + b3 is a contraction.
///
/// The raw trainable weights V are kept in `params()`. The weights actually
/// used are W = V * min(1, c^(1/3) / sigma(V)), refreshed by
/// `spectral_normalize`. The input is mapped from the domain onto [-1, 1]
/// and the output is q = from_unit(exp(s) * z + t) per axis with trainable
/// s and t, so a net with zero weights is the identity map.
class InvResNet {
 public:
  /// Scaled-uniform initialization followed by spectral normalization.
  /// Throws kPrecondition for an invalid configuration.
  static InvResNet init(const InvResNetConfig& config);

  const InvResNetConfig& config() const noexcept { return config_; }
  int dim() const noexcept { return config_.dim; }
  int n_blocks() const noexcept { return config_.n_blocks; }
  int width() const noexcept { return config_.width; }
  double lipschitz() const noexcept { return config_.lipschitz; }

  /// Flattened raw parameters. Layout per block: V1, b1, V2, b2, V3, b3
  /// (column-major), beta1, beta2; then log-scales and shifts of the output map.
  std::span<const double> params() const noexcept { return params_; }
  std::size_t n_params() const noexcept { return params_.size(); }
  /// Replaces all raw parameters and renormalizes with one power iteration.
  void set_params(std::span<const double> values);
  /// Write access; call `spectral_normalize` afterwards.
  std::span<double> mutable_params() noexcept {
    ++generation_;
    return params_;
  }

  /// Offsets of the output log-scales and shifts inside `params()`.
  std::size_t log_scale_offset() const noexcept;
  std::size_t shift_offset() const noexcept { return log_scale_offset() + static_cast<std::size_t>(dim()); }

  /// Sets every weight, bias, log-scale and shift to zero.
  void zero_weights();

  /// Refreshes the normalized weights using `n_power_iters` warm-started
  /// power iterations per layer. Also clamps beta to at least 1e-3.
  void spectral_normalize(int n_power_iters = 1);
  /// Power iteration until the estimates settle (relative change below 1e-12).
  void normalize_to_convergence();

  /// Current normalization factor min(1, c^(1/3)/sigma) of layer `layer` (0..2) of `block`.
  double layer_scale(int block, int layer) const;
  /// Normalized weight matrix actually used in the forward pass.
  const Eigen::MatrixXd& layer_weight(int block, int layer) const;

  /// Columns of `x` (D x P) mapped through the network.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x) const;
  Eigen::VectorXd forward_point(std::span<const double> x) const;
  /// Forward pass that also records the activations for `backward`.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, ForwardCache& cache) const;

  /// Residual branch of one block in the unit-scaled latent space.
  Eigen::MatrixXd residual(int block, const Eigen::MatrixXd& z) const;

  /// Inverse by per-block fixed-point iteration in reverse order, stopping
  /// when the update is below tol * (1 - c) / c. Throws ConvergenceError
  /// after 200 iterations in any block. `iterations`, if given, receives the
  /// total number of iterations.
  Eigen::MatrixXd inverse(const Eigen::MatrixXd& q, double tol = 1e-10, int* iterations = nullptr) const;

  /// Gradient of sum(upstream .* forward(x)) with respect to `params()`,
  /// treating the normalization factors as constants. Throws kUsage if the
  /// cache is empty or stale.
  std::vector<double> backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const;

  /// Versioned JSON checkpoint with configuration, raw parameters, power
  /// vectors and normalization state.
  std::string to_json() const;
  /// Throws ParseError on malformed or incompatible input.
  static InvResNet from_json(std::string_view text);

 private:
  struct Layer {
    std::size_t weight_offset = 0;
    std::size_t bias_offset = 0;
    int rows = 0;
    int cols = 0;
    Eigen::VectorXd power_u;  // left singular vector estimate
    Eigen::MatrixXd weight;   // normalized
    double scale = 1.0;
  };
  struct Block {
    Layer layers[3];
    std::size_t beta_offset = 0;
  };

  explicit InvResNet(const InvResNetConfig& config);
  Eigen::Map<const Eigen::MatrixXd> raw_weight(const Layer& layer) const;
  Eigen::Map<const Eigen::VectorXd> bias(const Layer& layer) const;
  double beta(const Block& block, int which) const { return params_[block.beta_offset + static_cast<std::size_t>(which)]; }
  void normalize_layer(Layer& layer, int n_power_iters);
  Eigen::MatrixXd to_unit(const Eigen::MatrixXd& x) const;
  Eigen::MatrixXd output_map(const Eigen::MatrixXd& z) const;
  /// Activation of `pre`; stores sigmoid(beta * pre) in `gate` for LipSwish.
  Eigen::MatrixXd activate(const Eigen::MatrixXd& pre, double beta, Eigen::MatrixXd& gate) const;
  Eigen::MatrixXd block_residual(const Block& block, const Eigen::MatrixXd& z, ForwardCache::Block* record) const;

  InvResNetConfig config_;
  std::vector<double> params_;
  std::vector<Block> blocks_;
  std::uint64_t generation_ = 1;
};

}  // namespace homeofit
