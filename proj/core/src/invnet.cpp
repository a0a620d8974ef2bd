#include "homeofit/invnet.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <sstream>

#include "homeofit/errors.hpp"
#include "homeofit/rng.hpp"
#include "json.hpp"

namespace homeofit {
namespace {

constexpr int kCheckpointVersion = 1;
constexpr double kMinBeta = 1e-3;
constexpr int kMaxFixedPointIterations = 200;

double sigmoid(double z) noexcept {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

void require_finite(const Eigen::MatrixXd& m, const char* where) {
  if (!m.allFinite()) throw Error(ErrorCode::kNumeric, std::string("non-finite values in ") + where);
}

}  // namespace

double lipswish(double x, double beta) noexcept { return x * sigmoid(beta * x) / 1.1; }

InvResNet::InvResNet(const InvResNetConfig& config) : config_(config) {
  if (config_.dim < 1) throw Error(ErrorCode::kPrecondition, "network dimension must be positive");
  if (config_.n_blocks < 0) throw Error(ErrorCode::kPrecondition, "block count must be nonnegative");
  if (config_.width < 1) throw Error(ErrorCode::kPrecondition, "hidden width must be positive");
  if (!(config_.init_gain >= 0.0) || !std::isfinite(config_.init_gain)) {
    throw Error(ErrorCode::kPrecondition, "initial gain must be finite and nonnegative");
  }
  if (!(config_.lipschitz > 0.0 && config_.lipschitz < 1.0)) {
    throw Error(ErrorCode::kPrecondition, "Lipschitz budget must lie in (0, 1)");
  }
  if (config_.domain.empty()) config_.domain.assign(static_cast<std::size_t>(config_.dim), Interval{});
  if (config_.domain.size() != static_cast<std::size_t>(config_.dim)) {
    throw Error(ErrorCode::kPrecondition, "domain must have one interval per dimension");
  }
  for (const auto& iv : config_.domain) {
    if (!(iv.lo < iv.hi)) throw Error(ErrorCode::kPrecondition, "degenerate input domain");
  }

  const int d = config_.dim, w = config_.width;
  const int shapes[3][2] = {{w, d}, {w, w}, {d, w}};
  std::size_t offset = 0;
  blocks_.resize(static_cast<std::size_t>(config_.n_blocks));
  for (auto& block : blocks_) {
    for (int l = 0; l < 3; ++l) {
      Layer& layer = block.layers[l];
      layer.rows = shapes[l][0];
      layer.cols = shapes[l][1];
      layer.weight_offset = offset;
      offset += static_cast<std::size_t>(layer.rows * layer.cols);
      layer.bias_offset = offset;
      offset += static_cast<std::size_t>(layer.rows);
    }
    block.beta_offset = offset;
    offset += 2;
  }
  offset += 2 * static_cast<std::size_t>(d);
  params_.assign(offset, 0.0);
}

std::size_t InvResNet::log_scale_offset() const noexcept {
  return params_.size() - 2 * static_cast<std::size_t>(dim());
}

InvResNet InvResNet::init(const InvResNetConfig& config) {
  InvResNet net(config);
  CounterRng weights_rng = CounterRng(config.seed).split(1);
  CounterRng power_rng = CounterRng(config.seed).split(2);
  for (auto& block : net.blocks_) {
    for (auto& layer : block.layers) {
      const double gain = &layer == &block.layers[2] ? config.init_gain : 1.0;
      const double bound = gain / std::sqrt(static_cast<double>(layer.cols));
      const std::size_t n = static_cast<std::size_t>(layer.rows * layer.cols);
      for (std::size_t i = 0; i < n; ++i) net.params_[layer.weight_offset + i] = weights_rng.uniform(-bound, bound);
      for (int i = 0; i < layer.rows; ++i) {
        net.params_[layer.bias_offset + static_cast<std::size_t>(i)] = weights_rng.uniform(-bound, bound);
      }
      layer.power_u.resize(layer.rows);
      for (int i = 0; i < layer.rows; ++i) layer.power_u(i) = power_rng.normal();
      layer.power_u.normalize();
    }
    net.params_[block.beta_offset] = 1.0;
    net.params_[block.beta_offset + 1] = 1.0;
  }
  // Enough iterations that the initial weights already satisfy the budget.
  net.spectral_normalize(20);
  return net;
}

void InvResNet::set_params(std::span<const double> values) {
  if (values.size() != params_.size()) throw Error(ErrorCode::kPrecondition, "parameter count mismatch");
  std::copy(values.begin(), values.end(), params_.begin());
  ++generation_;
  spectral_normalize(1);
}

void InvResNet::zero_weights() {
  std::fill(params_.begin(), params_.end(), 0.0);
  for (auto& block : blocks_) {
    params_[block.beta_offset] = 1.0;
    params_[block.beta_offset + 1] = 1.0;
  }
  ++generation_;
  spectral_normalize(1);
}

Eigen::Map<const Eigen::MatrixXd> InvResNet::raw_weight(const Layer& layer) const {
  return {params_.data() + layer.weight_offset, layer.rows, layer.cols};
}

Eigen::Map<const Eigen::VectorXd> InvResNet::bias(const Layer& layer) const {
  return {params_.data() + layer.bias_offset, layer.rows};
}

void InvResNet::normalize_layer(Layer& layer, int n_power_iters) {
  const Eigen::MatrixXd v_raw = raw_weight(layer);
  const double target = std::cbrt(config_.lipschitz);
  double sigma = 0.0;
  if (v_raw.squaredNorm() > 0.0) {
    if (layer.power_u.size() != layer.rows || layer.power_u.squaredNorm() == 0.0) {
      layer.power_u = Eigen::VectorXd::Ones(layer.rows).normalized();
    }
    Eigen::VectorXd u = layer.power_u, v;
    for (int it = 0; it < n_power_iters; ++it) {
      v = v_raw.transpose() * u;
      const double nv = v.norm();
      if (nv == 0.0) break;
      v /= nv;
      u = v_raw * v;
      const double nu = u.norm();
      if (nu == 0.0) break;
      u /= nu;
    }
    v = v_raw.transpose() * u;
    sigma = v.norm();
    layer.power_u = u;
  }
  layer.scale = sigma > target ? target / sigma : 1.0;
  layer.weight = layer.scale * v_raw;
}

void InvResNet::spectral_normalize(int n_power_iters) {
  if (n_power_iters < 1) throw Error(ErrorCode::kPrecondition, "need at least one power iteration");
  for (auto& block : blocks_) {
    params_[block.beta_offset] = std::max(params_[block.beta_offset], kMinBeta);
    params_[block.beta_offset + 1] = std::max(params_[block.beta_offset + 1], kMinBeta);
    for (auto& layer : block.layers) normalize_layer(layer, n_power_iters);
  }
  ++generation_;
}

void InvResNet::normalize_to_convergence() {
  const double target = std::cbrt(config_.lipschitz);
  for (auto& block : blocks_) {
    for (auto& layer : block.layers) {
      const Eigen::MatrixXd v_raw = raw_weight(layer);
      Eigen::JacobiSVD<Eigen::MatrixXd> svd(v_raw, Eigen::ComputeThinU);
      const double sigma = svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
      if (sigma > 0.0) {
        Eigen::VectorXd u = svd.matrixU().col(0);
        if (u.dot(layer.power_u) < 0.0) u = -u;
        layer.power_u = u;
      }
      layer.scale = sigma > target ? target / sigma : 1.0;
      layer.weight = layer.scale * v_raw;
    }
  }
  ++generation_;
}

double InvResNet::layer_scale(int block, int layer) const {
  return blocks_.at(static_cast<std::size_t>(block)).layers[layer].scale;
}

const Eigen::MatrixXd& InvResNet::layer_weight(int block, int layer) const {
  return blocks_.at(static_cast<std::size_t>(block)).layers[layer].weight;
}

Eigen::MatrixXd InvResNet::to_unit(const Eigen::MatrixXd& x) const {
  if (x.rows() != dim()) throw Error(ErrorCode::kPrecondition, "input has the wrong dimension");
  Eigen::MatrixXd z(x.rows(), x.cols());
  for (int k = 0; k < dim(); ++k) {
    const Interval& iv = config_.domain[static_cast<std::size_t>(k)];
    z.row(k) = (x.row(k).array() - iv.center()) / iv.half_width();
  }
  return z;
}

Eigen::MatrixXd InvResNet::output_map(const Eigen::MatrixXd& z) const {
  Eigen::MatrixXd q(z.rows(), z.cols());
  for (int k = 0; k < dim(); ++k) {
    const Interval& iv = config_.domain[static_cast<std::size_t>(k)];
    const double s = std::exp(params_[log_scale_offset() + static_cast<std::size_t>(k)]);
    const double t = params_[shift_offset() + static_cast<std::size_t>(k)];
    q.row(k) = iv.center() + iv.half_width() * (s * z.row(k).array() + t);
  }
  return q;
}

Eigen::MatrixXd InvResNet::activate(const Eigen::MatrixXd& pre, double beta, Eigen::MatrixXd& gate) const {
  if (config_.activation == Activation::kIdentity) return pre;
  gate = (1.0 + (-beta * pre.array()).exp()).inverse().matrix();
  return (pre.array() * gate.array() / 1.1).matrix();
}

Eigen::MatrixXd InvResNet::block_residual(const Block& block, const Eigen::MatrixXd& z,
                                          ForwardCache::Block* record) const {
  const Layer* l = block.layers;
  Eigen::MatrixXd gate1, gate2;
  Eigen::MatrixXd pre1 = (l[0].weight * z).colwise() + bias(l[0]);
  const Eigen::MatrixXd h1 = activate(pre1, beta(block, 0), gate1);
  Eigen::MatrixXd pre2 = (l[1].weight * h1).colwise() + bias(l[1]);
  const Eigen::MatrixXd h2 = activate(pre2, beta(block, 1), gate2);
  Eigen::MatrixXd g = (l[2].weight * h2).colwise() + bias(l[2]);
  if (record != nullptr) {
    record->input = z;
    record->pre1 = std::move(pre1);
    record->pre2 = std::move(pre2);
    record->gate1 = std::move(gate1);
    record->gate2 = std::move(gate2);
  }
  return g;
}

Eigen::MatrixXd InvResNet::residual(int block, const Eigen::MatrixXd& z) const {
  return block_residual(blocks_.at(static_cast<std::size_t>(block)), z, nullptr);
}

Eigen::MatrixXd InvResNet::forward(const Eigen::MatrixXd& x) const {
  Eigen::MatrixXd z = to_unit(x);
  for (const auto& block : blocks_) z += block_residual(block, z, nullptr);
  Eigen::MatrixXd q = output_map(z);
  require_finite(q, "network forward pass");
  return q;
}

Eigen::VectorXd InvResNet::forward_point(std::span<const double> x) const {
  Eigen::MatrixXd col(dim(), 1);
  if (x.size() != static_cast<std::size_t>(dim())) throw Error(ErrorCode::kPrecondition, "point has the wrong dimension");
  for (int k = 0; k < dim(); ++k) col(k, 0) = x[static_cast<std::size_t>(k)];
  return forward(col).col(0);
}

Eigen::MatrixXd InvResNet::forward(const Eigen::MatrixXd& x, ForwardCache& cache) const {
  cache.blocks.assign(blocks_.size(), {});
  Eigen::MatrixXd z = to_unit(x);
  for (std::size_t b = 0; b < blocks_.size(); ++b) z += block_residual(blocks_[b], z, &cache.blocks[b]);
  cache.latent = z;
  cache.generation = generation_;
  Eigen::MatrixXd q = output_map(z);
  require_finite(q, "network forward pass");
  return q;
}

Eigen::MatrixXd InvResNet::inverse(const Eigen::MatrixXd& q, double tol, int* iterations) const {
  if (q.rows() != dim()) throw Error(ErrorCode::kPrecondition, "input has the wrong dimension");
  Eigen::MatrixXd y(q.rows(), q.cols());
  for (int k = 0; k < dim(); ++k) {
    const Interval& iv = config_.domain[static_cast<std::size_t>(k)];
    const double s = std::exp(params_[log_scale_offset() + static_cast<std::size_t>(k)]);
    const double t = params_[shift_offset() + static_cast<std::size_t>(k)];
    y.row(k) = ((q.row(k).array() - iv.center()) / iv.half_width() - t) / s;
  }
  const double c = config_.lipschitz;
  const double stop = tol * (1.0 - c) / c;
  int total = 0;
  for (auto it = blocks_.rbegin(); it != blocks_.rend(); ++it) {
    Eigen::MatrixXd x = y;
    bool done = false;
    for (int n = 0; n < kMaxFixedPointIterations; ++n) {
      Eigen::MatrixXd next = y - block_residual(*it, x, nullptr);
      const double change = (next - x).lpNorm<Eigen::Infinity>();
      x = std::move(next);
      ++total;
      if (!std::isfinite(change)) throw Error(ErrorCode::kNumeric, "non-finite values in fixed-point inverse");
      if (change <= stop) {
        done = true;
        break;
      }
    }
    if (!done) {
      const double last = (y - block_residual(*it, x, nullptr) - x).lpNorm<Eigen::Infinity>();
      throw ConvergenceError("fixed-point inverse exceeded 200 iterations in a block", last);
    }
    y = std::move(x);
  }
  if (iterations != nullptr) *iterations = total;
  Eigen::MatrixXd out(y.rows(), y.cols());
  for (int k = 0; k < dim(); ++k) {
    const Interval& iv = config_.domain[static_cast<std::size_t>(k)];
    out.row(k) = iv.center() + iv.half_width() * y.row(k).array();
  }
  return out;
}

std::vector<double> InvResNet::backward(const ForwardCache& cache, const Eigen::MatrixXd& upstream) const {
  if (cache.empty() && !blocks_.empty()) throw Error(ErrorCode::kUsage, "backward called without a forward cache");
  if (cache.generation != generation_) {
    throw Error(ErrorCode::kUsage, "forward cache is stale; parameters changed since the forward pass");
  }
  if (upstream.rows() != dim() || upstream.cols() != cache.size()) {
    throw Error(ErrorCode::kPrecondition, "upstream gradient shape does not match the cache");
  }
  std::vector<double> grad(params_.size(), 0.0);

  // Output map.
  Eigen::MatrixXd dz(upstream.rows(), upstream.cols());
  for (int k = 0; k < dim(); ++k) {
    const Interval& iv = config_.domain[static_cast<std::size_t>(k)];
    const double s = std::exp(params_[log_scale_offset() + static_cast<std::size_t>(k)]);
    dz.row(k) = iv.half_width() * s * upstream.row(k);
    grad[log_scale_offset() + static_cast<std::size_t>(k)] = dz.row(k).dot(cache.latent.row(k));
    grad[shift_offset() + static_cast<std::size_t>(k)] = iv.half_width() * upstream.row(k).sum();
  }

  const bool identity = config_.activation == Activation::kIdentity;
  auto add_weight_grad = [&](const Layer& layer, const Eigen::MatrixXd& dpre, const Eigen::MatrixXd& input) {
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + layer.weight_offset, layer.rows, layer.cols);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + layer.bias_offset, layer.rows);
    // Reduce into aligned temporaries: evaluating straight into the maps lets
    // the summation order depend on where the gradient buffer was allocated.
    const Eigen::MatrixXd prod = dpre * input.transpose();
    const Eigen::VectorXd bsum = dpre.rowwise().sum();
    gw += layer.scale * prod;
    gb += bsum;
  };
  // Returns d(out)/d(pre) and accumulates d/d(beta), with sg the cached gate.
  auto through_activation = [&](const Eigen::MatrixXd& dout, const Eigen::MatrixXd& pre, const Eigen::MatrixXd& sg,
                                double b, std::size_t beta_index) -> Eigen::MatrixXd {
    if (identity) return dout;
    const Eigen::ArrayXXd ds = sg.array() * (1.0 - sg.array());
    grad[beta_index] += (dout.array() * pre.array().square() * ds).sum() / 1.1;
    return (dout.array() * (sg.array() + b * pre.array() * ds) / 1.1).matrix();
  };
  auto activated = [&](const Eigen::MatrixXd& pre, const Eigen::MatrixXd& sg) -> Eigen::MatrixXd {
    if (identity) return pre;
    return (pre.array() * sg.array() / 1.1).matrix();
  };

  for (std::size_t b = blocks_.size(); b-- > 0;) {
    const Block& block = blocks_[b];
    const ForwardCache::Block& rec = cache.blocks[b];
    const Layer* l = block.layers;
    const Eigen::MatrixXd h1 = activated(rec.pre1, rec.gate1);
    const Eigen::MatrixXd h2 = activated(rec.pre2, rec.gate2);
    // dz is the gradient with respect to the block output, which also flows
    // straight through the skip connection.
    add_weight_grad(l[2], dz, h2);
    const Eigen::MatrixXd dh2 = l[2].weight.transpose() * dz;
    const Eigen::MatrixXd dpre2 = through_activation(dh2, rec.pre2, rec.gate2, beta(block, 1), block.beta_offset + 1);
    add_weight_grad(l[1], dpre2, h1);
    const Eigen::MatrixXd dh1 = l[1].weight.transpose() * dpre2;
    const Eigen::MatrixXd dpre1 = through_activation(dh1, rec.pre1, rec.gate1, beta(block, 0), block.beta_offset);
    add_weight_grad(l[0], dpre1, rec.input);
    dz.noalias() += l[0].weight.transpose() * dpre1;
  }
  return grad;
}

std::string InvResNet::to_json() const {
  nlohmann::json j;
  j["format"] = "homeofit-invresnet";
  j["version"] = kCheckpointVersion;
  j["dim"] = config_.dim;
  j["n_blocks"] = config_.n_blocks;
  j["width"] = config_.width;
  j["lipschitz"] = config_.lipschitz;
  j["init_gain"] = config_.init_gain;
  j["activation"] = config_.activation == Activation::kLipSwish ? "lipswish" : "identity";
  j["seed"] = config_.seed;
  nlohmann::json domain = nlohmann::json::array();
  for (const auto& iv : config_.domain) domain.push_back({iv.lo, iv.hi});
  j["domain"] = domain;
  j["params"] = params_;
  nlohmann::json power = nlohmann::json::array();
  for (const auto& block : blocks_) {
    for (const auto& layer : block.layers) {
      power.push_back(std::vector<double>(layer.power_u.data(), layer.power_u.data() + layer.power_u.size()));
    }
  }
  j["power_vectors"] = power;
  nlohmann::json scales = nlohmann::json::array();
  for (const auto& block : blocks_) {
    for (const auto& layer : block.layers) scales.push_back(layer.scale);
  }
  j["layer_scales"] = scales;
  return j.dump(1);
}

InvResNet InvResNet::from_json(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("checkpoint is not valid JSON: ") + e.what(), 0);
  }
  try {
    if (j.at("format").get<std::string>() != "homeofit-invresnet") throw ParseError("not a network checkpoint", 0);
    if (j.at("version").get<int>() != kCheckpointVersion) throw ParseError("unsupported checkpoint version", 0);
    InvResNetConfig config;
    config.dim = j.at("dim").get<int>();
    config.n_blocks = j.at("n_blocks").get<int>();
    config.width = j.at("width").get<int>();
    config.lipschitz = j.at("lipschitz").get<double>();
    config.init_gain = j.value("init_gain", 1.0);
    const std::string act = j.at("activation").get<std::string>();
    if (act != "lipswish" && act != "identity") throw ParseError("unknown activation '" + act + "'", 0);
    config.activation = act == "lipswish" ? Activation::kLipSwish : Activation::kIdentity;
    config.seed = j.at("seed").get<std::uint64_t>();
    for (const auto& iv : j.at("domain")) config.domain.push_back({iv.at(0).get<double>(), iv.at(1).get<double>()});
    InvResNet net(config);
    const auto params = j.at("params").get<std::vector<double>>();
    if (params.size() != net.params_.size()) throw ParseError("checkpoint parameter count mismatch", 0);
    net.params_ = params;
    const auto& power = j.at("power_vectors");
    const auto scales = j.at("layer_scales").get<std::vector<double>>();
    if (power.size() != 3 * net.blocks_.size() || scales.size() != power.size()) {
      throw ParseError("checkpoint normalization state has the wrong size", 0);
    }
    std::size_t k = 0;
    for (auto& block : net.blocks_) {
      for (auto& layer : block.layers) {
        const auto u = power.at(k).get<std::vector<double>>();
        if (u.size() != static_cast<std::size_t>(layer.rows)) throw ParseError("power vector has the wrong size", 0);
        layer.power_u = Eigen::Map<const Eigen::VectorXd>(u.data(), layer.rows);
        layer.scale = scales[k];
        layer.weight = layer.scale * net.raw_weight(layer);
        ++k;
      }
    }
    ++net.generation_;
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("malformed checkpoint: ") + e.what(), 0);
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kParse) throw;
    throw ParseError(std::string("invalid checkpoint: ") + e.what(), 0);
  }
}

}  // namespace homeofit
