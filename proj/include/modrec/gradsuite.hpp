#pragma once

#include <string>
#include <vector>

#include "modrec/arch.hpp"

namespace modrec {

struct GradCheckResult {
    std::string name;
    double max_rel_error = 0.0;
};

// Small architecture variants (width-16 frames, few filters) used for
// exhaustive finite-difference checks; wiring matches the full-size specs.
ArchitectureSpec tiny_spec(const std::string& id);

// Central-difference checks, in double, over every parameter coordinate of
// each layer type and each of the five architectures.
std::vector<GradCheckResult> gradient_check_suite(double eps = 1e-5);

}  // namespace modrec
