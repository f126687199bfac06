#pragma once

#include <ostream>
#include <string>

#include "mtbr/dataio.hpp"

namespace mtbr {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;
inline constexpr int kExitNumeric = 3;

// Subcommands: dct, synth, train, eval, attention-report, gradcheck.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

// key=value synthesis recipe. Per-class keys (prevalence, informative_view,
// informative_modality) take one value for every class or a comma list of
// n_classes values.
SynthSpec parse_synth_spec(const std::string& text);

// Largest gradient-check error on a miniature instance of the named model
// ("multiview", "bimodal", "trimodal", "transformer").
struct GradcheckReport {
    double max_rel_error = 0.0;
    std::string worst_param;
};
GradcheckReport gradcheck_miniature(const std::string& model, std::uint64_t seed);

inline constexpr double kGradcheckStep = 1e-4;
inline constexpr double kGradcheckTolerance = 1e-4;

}  // namespace mtbr
