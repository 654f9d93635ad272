#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ser/config.hpp"

namespace ser {

struct GradCheckEntry {
    std::string tensor_name;
    double max_rel_error = 0.0;
};

struct GradCheckReport {
    ModelKind kind = ModelKind::mha2;
    std::vector<GradCheckEntry> entries;  // one per parameter tensor
    double max_rel_error = 0.0;
    double threshold = 1e-4;
    bool pass = false;

    std::string to_text() const;
};

// Builds a tiny model of the given variant (T_a <= 5, T_t <= 4, dims <= 8)
// and compares the analytic gradient of every parameter element against
// central finite differences with step 1e-5. Relative error uses
// |a - n| / max(|a|, |n|, 1e-6).
GradCheckReport gradcheck_model(ModelKind kind, std::uint64_t seed);

// All five variants.
std::vector<GradCheckReport> gradcheck_all(std::uint64_t seed);

}  // namespace ser
