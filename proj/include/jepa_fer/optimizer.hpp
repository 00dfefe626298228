#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "jepa_fer/tensor.hpp"

namespace jepa_fer {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

/// A trainable tensor handle plus whether decoupled weight decay applies.
struct ParamRef {
  std::string name;
  Tensor tensor;
  bool decay = true;
};

struct OptimizerState {
  std::vector<std::vector<float>> first_moment;
  std::vector<std::vector<float>> second_moment;
  std::uint64_t step = 0;
  AdamWConfig config;
};

/// Adaptive moments with bias correction and decoupled weight decay:
///   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + wd * p)
class AdamW {
 public:
  AdamW(std::vector<ParamRef> params, AdamWConfig config);

  /// Applies one update from the current grads. Every parameter must hold a
  /// gradient.
  void step();
  void zero_grad();

  void set_lr(double lr) { state_.config.lr = lr; }
  double lr() const { return state_.config.lr; }
  const OptimizerState& state() const { return state_; }
  OptimizerState& mutable_state() { return state_; }
  const std::vector<ParamRef>& params() const { return params_; }

 private:
  std::vector<ParamRef> params_;
  OptimizerState state_;
};

}  // namespace jepa_fer
