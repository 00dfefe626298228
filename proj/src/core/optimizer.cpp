#include "jepa_fer/optimizer.hpp"

#include <cmath>

#include "jepa_fer/error.hpp"

namespace jepa_fer {

AdamW::AdamW(std::vector<ParamRef> params, AdamWConfig config) : params_(std::move(params)) {
  if (!(config.lr >= 0) || !(config.eps > 0) || config.beta1 < 0 || config.beta1 >= 1 ||
      config.beta2 < 0 || config.beta2 >= 1 || config.weight_decay < 0) {
    throw ConfigError("AdamW: invalid hyperparameters");
  }
  state_.config = config;
  for (const auto& p : params_) {
    if (!p.tensor.requires_grad()) {
      throw UsageError("AdamW: parameter '" + p.name + "' does not require grad");
    }
    state_.first_moment.emplace_back(p.tensor.numel(), 0.0f);
    state_.second_moment.emplace_back(p.tensor.numel(), 0.0f);
  }
}

void AdamW::step() {
  for (const auto& p : params_) {
    if (!p.tensor.has_grad()) throw UsageError("AdamW: missing gradient for '" + p.name + "'");
  }
  const auto& c = state_.config;
  state_.step += 1;
  const double t = static_cast<double>(state_.step);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto& tensor = params_[i].tensor;
    auto values = tensor.mutable_values();
    const auto grad = tensor.grad();
    auto& m = state_.first_moment[i];
    auto& v = state_.second_moment[i];
    const double decay = params_[i].decay ? c.weight_decay : 0.0;
    for (std::size_t j = 0; j < values.size(); ++j) {
      const double g = grad[j];
      const double mj = c.beta1 * m[j] + (1.0 - c.beta1) * g;
      const double vj = c.beta2 * v[j] + (1.0 - c.beta2) * g * g;
      m[j] = static_cast<float>(mj);
      v[j] = static_cast<float>(vj);
      const double update = (mj / bc1) / (std::sqrt(vj / bc2) + c.eps) + decay * values[j];
      values[j] = static_cast<float>(values[j] - c.lr * update);
    }
  }
}

void AdamW::zero_grad() {
  for (auto& p : params_) p.tensor.clear_grad();
}

}  // namespace jepa_fer
