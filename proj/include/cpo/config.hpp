#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cpo/optimizer.hpp"
#include "cpo/policy.hpp"
#include "cpo/simulator.hpp"
#include "cpo/textspace.hpp"

namespace cpo {

struct PopulationSpec {
    int feature_order = 2;
    std::optional<std::vector<double>> values;  // explicit g_weights
    double random_scale = 0.4;                  // N(0, scale) weights when values absent
    double random_intercept = 1.0;
    double noise_sd = 1.0;
};

struct AssignmentSpec {
    std::string kind = "uniform";  // "uniform" | "random_logits" | "token_logits"
    int order = 1;
    double logit_scale = 0.3;
    std::vector<double> token_logits;  // per-token logit applied at every position
};

struct OutcomeModelSpec {
    int feature_order = 2;
    double lambda = 1e-6;
    std::string source = "randomized";  // "randomized" | "confounded"
    ConfounderSpec confounder{ConfounderSpec::Kind::Negation, 0.0, 0.0};
    int fit_n = 2000;  // size of the separate fitting experiment
};

// Method-level knobs; per-method overrides resolve onto these defaults.
struct TrainSpec {
    int order = 1;  // policy order for FT init and trained policies
    double mle_alpha = 0.5;
    int steps = 1500;
    int batch = 256;
    double learning_rate = 0.05;
    std::pair<double, double> adam_betas{0.9, 0.999};
    double adam_eps = 1e-8;
    bool use_adam = true;
    int m_per_step = 256;
    bool self_normalize = true;
    std::optional<double> clip_max;
    double kl_to_init_weight = 0.0;
    bool use_estimated_pR = false;  // mle-estimated density in the IPW term
    int pR_fit_samples = 50;
    double pR_fit_alpha = 1.0;

    TrainConfig to_train_config(Objective objective, std::uint64_t seed) const;
};

struct EvaluationSpec {
    int pairs = 2000;
    int replicates = 1000;
    std::string ci = "normal";  // "normal" | "wilson"
    bool plot_data = false;
};

struct ExperimentConfig {
    std::uint64_t master_seed = 1;
    Vocab vocab{3, 4};
    PopulationSpec population;
    AssignmentSpec assignment;
    int n = 5000;
    int m = 100000;
    OutcomeModelSpec outcome_model;
    TrainSpec train;                              // defaults
    std::map<std::string, TrainSpec> train_overrides;  // per method: FT/CPO/DRCPO/OORLHF
    EvaluationSpec evaluation;

    const TrainSpec& train_for(const std::string& method) const;
    Population build_population() const;
    Policy build_assignment() const;
    void validate() const;
};

ExperimentConfig load_experiment_config(const std::filesystem::path& path);
ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin = "<config>");

// FNV-1a hash of the config file bytes, as fixed-width hex.
std::string config_hash(const std::string& config_text);

}  // namespace cpo
