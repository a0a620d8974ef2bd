#pragma once

#include <span>
#include <vector>

namespace homeofit {

struct AdamHyper {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias-corrected moments. The learning rate of each step is
/// passed to `update` so that schedules stay outside the optimizer.
class AdamState {
 public:
  AdamState(std::size_t n_params, AdamHyper hyper = {});

  /// One step: params -= lr * mhat / (sqrt(vhat) + eps).
  void update(std::span<double> params, std::span<const double> grad, double lr);
  void update(std::span<double> params, std::span<const double> grad) { update(params, grad, hyper_.lr); }

  const AdamHyper& hyper() const noexcept { return hyper_; }
  long step() const noexcept { return step_; }
  std::span<const double> first_moment() const noexcept { return m_; }
  std::span<const double> second_moment() const noexcept { return v_; }

 private:
  AdamHyper hyper_;
  long step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

/// lr_min + (lr_max - lr_min) * (1 + cos(pi * step / total)) / 2, constant
/// at lr_min once step >= total.
double cosine_lr(long step, long total, double lr_max, double lr_min) noexcept;

}  // namespace homeofit
