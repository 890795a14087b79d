#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpo/estimators.hpp"
#include "cpo/outcome_model.hpp"
#include "cpo/policy.hpp"
#include "cpo/simulator.hpp"

namespace cpo {

enum class Objective { CPO, DRCPO, OORLHF };

std::string objective_name(Objective o);
Objective objective_from_name(const std::string& name);

struct TrainConfig {
    Objective objective = Objective::CPO;
    int steps = 500;
    int batch = 256;          // minibatch of randomized rows, drawn with replacement
    double learning_rate = 0.05;
    std::pair<double, double> adam_betas{0.9, 0.999};
    double adam_eps = 1e-8;
    bool use_adam = true;     // false: plain gradient ascent
    WeightOptions weight_opts;
    int m_per_step = 256;     // fresh f0 draws per step (DRCPO / OORLHF)
    double kl_to_init_weight = 0.0;  // optional penalty toward the init policy
    std::uint64_t seed = 0;

    void validate() const;
};

struct TraceRow {
    int step = 0;
    double estimate = 0.0;
    std::optional<double> true_value;  // enumerated, when a population is supplied
    double grad_norm = 0.0;
};

using TrainTrace = std::vector<TraceRow>;

// Data sources; which ones are required depends on the objective.
struct TrainInputs {
    const LabeledDataset* ds = nullptr;  // randomized outcome data (CPO, DRCPO)
    const Policy* pR = nullptr;          // density for the IPW weights (CPO, DRCPO)
    const OutcomeModel* ghat = nullptr;  // outcome model (DRCPO, OORLHF)
    const Policy* f0 = nullptr;          // fixed reference policy (DRCPO, OORLHF)
};

// One step's frozen randomness: dataset rows and reference-policy draws.
struct StepBatch {
    std::vector<std::size_t> rows;
    std::vector<Text> draws;
};

StepBatch draw_step_batch(const TrainConfig& cfg, const TrainInputs& in, Rng& rng);

// Objective estimate on a frozen batch; pure in (policy, batch).
double objective_on_batch(const TrainConfig& cfg, const Policy& policy, const TrainInputs& in, const StepBatch& batch);

// Estimate and ascent gradient on a frozen batch. Self-normalized weights are
// treated as constants with respect to the parameters.
std::pair<double, ParamGrad> objective_gradient_on_batch(const TrainConfig& cfg, const Policy& policy,
                                                         const TrainInputs& in, const StepBatch& batch);

// Draws a batch with rng, then evaluates estimate and gradient.
std::pair<double, ParamGrad> objective_gradient(const TrainConfig& cfg, const Policy& policy, const TrainInputs& in,
                                                Rng& rng);

// Adam (or plain) gradient ascent on the chosen objective. Deterministic for a
// fixed config seed. The trace records the per-step minibatch estimate, the
// enumerated true value when pop_for_trace is given, and the gradient norm.
std::pair<Policy, TrainTrace> train(const TrainConfig& cfg, const Policy& init, const TrainInputs& in,
                                    const Population* pop_for_trace = nullptr);

}  // namespace cpo
