#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cpo/evaluation.hpp"

namespace cpo {

struct CriterionResult {
    int id = 0;
    std::string name;
    bool pass = false;
    std::string details;
};

struct AcceptanceOptions {
    std::uint64_t master_seed = 7;
    int threads = 1;
    // Scratch directory for the determinism criterion's pipeline runs; a
    // temporary directory is used when empty.
    std::filesystem::path work_dir;
};

struct AcceptanceOutcome {
    std::vector<CriterionResult> criteria;
    std::vector<BiasVarianceReport> reports;  // Monte Carlo runs behind criteria 1-4

    bool all_pass() const;
};

// Runs the full acceptance suite at its pinned sizes and tolerances.
AcceptanceOutcome run_acceptance(const AcceptanceOptions& opts);

// One "PASS|FAIL <id> <name> — <details>" line per criterion.
std::string format_criterion(const CriterionResult& c);

}  // namespace cpo
