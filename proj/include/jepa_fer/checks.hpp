#pragma once

#include <cstdint>
#include <vector>

#include "jepa_fer/gradcheck.hpp"

namespace jepa_fer {

/// Finite-difference checks of whole model compositions in 64-bit, with every
/// parameter as a checked input:
///   encoder2_probe: 2-block encoder -> attentive probe -> cross-entropy
///   encoder2_predictor: visible-token encoder -> predictor -> masked L1
std::vector<GradCheckResult> model_gradcheck_suite(std::uint64_t seed, std::size_t trials = 2,
                                                   double tolerance = 1e-4);

}  // namespace jepa_fer
