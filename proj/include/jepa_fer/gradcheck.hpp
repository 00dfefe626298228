#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "jepa_fer/tensor.hpp"

namespace jepa_fer {

using ScalarFn64 = std::function<Tensor64(const std::vector<Tensor64>&)>;

/// Central differences (f(x+h) - f(x-h)) / 2h for every input element,
/// evaluated with recording disabled.
std::vector<std::vector<double>> numeric_gradient(const ScalarFn64& fn,
                                                  const std::vector<Tensor64>& inputs,
                                                  double h = 1e-5);

/// Gradients from one backward sweep over fresh leaf copies of `inputs`.
std::vector<std::vector<double>> analytic_gradient(const ScalarFn64& fn,
                                                   const std::vector<Tensor64>& inputs);

/// ||a - n|| / max(||a||, ||n||) over all inputs jointly.
double relative_error(const std::vector<std::vector<double>>& analytic,
                      const std::vector<std::vector<double>>& numeric);

double gradcheck_rel_error(const ScalarFn64& fn, const std::vector<Tensor64>& inputs,
                           double h = 1e-5);

struct GradCheckResult {
  std::string name;
  double max_rel_error = 0.0;  // worst over all seeds
  std::size_t trials = 0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Randomized check of every differentiable primitive, `trials` seeds each.
std::vector<GradCheckResult> primitive_gradcheck_suite(std::uint64_t seed, std::size_t trials = 20,
                                                       double tolerance = 1e-4);

}  // namespace jepa_fer
