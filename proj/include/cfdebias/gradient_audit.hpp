#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cfdebias/embedding_store.hpp"

namespace cfdebias {

struct GradientCheck {
    std::string name;
    double max_relative_error = 0.0;
    Index parameters = 0;
    bool passed = false;
};

/// Central finite differences against every analytic gradient in the model,
/// on a seeded 10-word fixture (3 pairs, 4 neutral words).
///
/// Checked: L_se, L_ge, L_di on the adversary, L_di reversed into the
/// encoder, L_re, the full L_ld, L_mo, L_mi, L_la and L_ka.
std::vector<GradientCheck> gradient_audit(std::uint64_t seed, double tolerance = 1e-4, double h = 1e-6);

} // namespace cfdebias
