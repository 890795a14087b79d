#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "cpo/config.hpp"

namespace cpo {

// Canonical artifact locations inside an output directory.
struct RunPaths {
    std::filesystem::path out_dir;

    std::filesystem::path manifest() const { return out_dir / "manifest.json"; }
    std::filesystem::path dataset_r() const { return out_dir / "datasets" / "d_r.jsonl"; }
    std::filesystem::path dataset_fit() const { return out_dir / "datasets" / "d_fit.jsonl"; }
    std::filesystem::path dataset_o(const std::string& desc) const {
        return out_dir / "datasets" / ("d_o_" + desc + ".jsonl");
    }
    std::filesystem::path outcome_model(bool confounded) const {
        return out_dir / "models" / (confounded ? "ghat_confounded.txt" : "ghat.txt");
    }
    std::filesystem::path policy(const std::string& name) const {
        return out_dir / "models" / ("policy_" + name + ".txt");
    }
    std::filesystem::path trace(const std::string& name) const {
        return out_dir / "traces" / ("trace_" + name + ".csv");
    }
    std::filesystem::path results(const std::string& file) const { return out_dir / "results" / file; }
};

// Policy variant names produced by the full pipeline, in the fixed order used
// for matrices and seeds.
const std::vector<std::string>& pipeline_policy_names();

void cmd_simulate(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths);
void cmd_fit_outcome(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths);

// method: FT | CPO | DRCPO | OORLHF. variant "" trains the default; "2" a
// reseeded run (CPO only); "confounded" swaps in the confounded outcome model.
void cmd_train(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths,
               const std::string& method, const std::string& variant = "");

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths);

// simulate -> fit -> train all methods -> evaluate -> acceptance suite.
// Returns the number of failed acceptance criteria; sub-step failures are
// reported in report.md without aborting independent steps.
int cmd_reproduce_all(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths,
                      int threads);

}  // namespace cpo
