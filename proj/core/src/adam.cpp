#include "homeofit/adam.hpp"

#include <cmath>
#include <numbers>

#include "homeofit/errors.hpp"

namespace homeofit {

AdamState::AdamState(std::size_t n_params, AdamHyper hyper) : hyper_(hyper), m_(n_params, 0.0), v_(n_params, 0.0) {
  if (!(hyper_.lr > 0.0) || !(hyper_.beta1 >= 0.0 && hyper_.beta1 < 1.0) ||
      !(hyper_.beta2 >= 0.0 && hyper_.beta2 < 1.0) || !(hyper_.eps > 0.0)) {
    throw Error(ErrorCode::kPrecondition, "invalid Adam hyperparameters");
  }
}

void AdamState::update(std::span<double> params, std::span<const double> grad, double lr) {
  if (params.size() != m_.size() || grad.size() != m_.size()) {
    throw Error(ErrorCode::kPrecondition, "Adam state and parameter vector differ in length");
  }
  ++step_;
  const double c1 = 1.0 - std::pow(hyper_.beta1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(hyper_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = hyper_.beta1 * m_[i] + (1.0 - hyper_.beta1) * grad[i];
    v_[i] = hyper_.beta2 * v_[i] + (1.0 - hyper_.beta2) * grad[i] * grad[i];
    params[i] -= lr * (m_[i] / c1) / (std::sqrt(v_[i] / c2) + hyper_.eps);
  }
}

double cosine_lr(long step, long total, double lr_max, double lr_min) noexcept {
  if (total <= 0 || step >= total) return lr_min;
  const double t = static_cast<double>(step) / static_cast<double>(total);
  return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(std::numbers::pi * t));
}

}  // namespace homeofit
