#pragma once

#include <string>

#include "floydwalk/config.hpp"
#include "floydwalk/report.hpp"

namespace floydwalk {

// Process exit statuses. Hypothesis-evidence failures are deliberately
// distinct from internal errors so scripted pipelines can tell "the math
// said no" from "the tool broke".
inline constexpr int kExitSuccess = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitHypothesisFails = 2;
inline constexpr int kExitInternalError = 3;

/// Runs one verb against a parsed config, filling `rep` and writing all
/// artifacts (report.json, CSV tables, exported tables) under cfg.out_dir.
/// Never throws: every failure is folded into the exit status and, when the
/// output directory is writable, into report.json. Verbs:
///   graph floyd green spectral walk lemma1 theorem1 dirichlet verify-all
int run_command(const std::string& verb, const ExperimentConfig& cfg, ExperimentReport& rep);

}  // namespace floydwalk
