#include "cpo/optimizer.hpp"

#include <cmath>

#include "cpo/errors.hpp"
#include "cpo/util.hpp"

namespace cpo {

namespace {

bool needs_dataset(Objective o) { return o == Objective::CPO || o == Objective::DRCPO; }
bool needs_outcome_model(Objective o) { return o == Objective::DRCPO || o == Objective::OORLHF; }

void require_inputs(const TrainConfig& cfg, const TrainInputs& in) {
    if (needs_dataset(cfg.objective)) {
        if (!in.ds) throw MissingInput(objective_name(cfg.objective) + " requires a randomized dataset");
        if (!in.pR) throw MissingInput(objective_name(cfg.objective) + " requires a randomization density");
        if (in.ds->provenance.kind != Provenance::Kind::Randomized) {
            throw Error(objective_name(cfg.objective) + ": training dataset provenance must be Randomized");
        }
    }
    if (needs_outcome_model(cfg.objective)) {
        if (!in.ghat) throw MissingInput(objective_name(cfg.objective) + " requires an outcome model");
        if (!in.f0) throw MissingInput(objective_name(cfg.objective) + " requires a reference policy f0");
    }
}

// Weighted contributions for the IPW part of the objective; y_residual picks
// Y_i (CPO) or Y_i - ghat(X_i) (DRCPO).
struct IpwPart {
    std::vector<double> weights;
    std::vector<double> residuals;
};

IpwPart ipw_part(const TrainConfig& cfg, const Policy& policy, const TrainInputs& in, const StepBatch& batch) {
    IpwPart part;
    part.weights.reserve(batch.rows.size());
    part.residuals.reserve(batch.rows.size());
    std::vector<double> log_ratios(batch.rows.size());
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        const auto& s = in.ds->samples[batch.rows[i]];
        log_ratios[i] = policy.log_prob(s.text) - in.pR->log_prob(s.text);
    }
    part.weights = stabilize(log_ratios, cfg.weight_opts);
    for (std::size_t i = 0; i < batch.rows.size(); ++i) {
        const auto& s = in.ds->samples[batch.rows[i]];
        const double ghat = cfg.objective == Objective::DRCPO ? in.ghat->predict(s.text) : 0.0;
        part.residuals.push_back(s.outcome - ghat);
    }
    return part;
}

struct OutPart {
    std::vector<double> weights;
    std::vector<double> predictions;
};

OutPart out_part(const TrainConfig& cfg, const Policy& policy, const TrainInputs& in, const StepBatch& batch) {
    OutPart part;
    std::vector<double> log_ratios(batch.draws.size());
    for (std::size_t j = 0; j < batch.draws.size(); ++j) {
        log_ratios[j] = policy.log_prob(batch.draws[j]) - in.f0->log_prob(batch.draws[j]);
    }
    part.weights = stabilize(log_ratios, cfg.weight_opts);
    part.predictions.resize(batch.draws.size());
    for (std::size_t j = 0; j < batch.draws.size(); ++j) part.predictions[j] = in.ghat->predict(batch.draws[j]);
    return part;
}

}  // namespace

std::string objective_name(Objective o) {
    switch (o) {
        case Objective::CPO: return "CPO";
        case Objective::DRCPO: return "DRCPO";
        case Objective::OORLHF: return "OORLHF";
    }
    return "?";
}

Objective objective_from_name(const std::string& name) {
    if (name == "CPO" || name == "cpo") return Objective::CPO;
    if (name == "DRCPO" || name == "drcpo" || name == "DR-CPO" || name == "dr-cpo") return Objective::DRCPO;
    if (name == "OORLHF" || name == "oorlhf" || name == "OO-RLHF" || name == "oo-rlhf") return Objective::OORLHF;
    throw ConfigError("unknown objective \"" + name + "\" (expected CPO, DRCPO, or OORLHF)");
}

void TrainConfig::validate() const {
    if (steps < 1) throw ConfigError("train: steps must be >= 1");
    if (batch < 1) throw ConfigError("train: batch must be >= 1");
    if (!(learning_rate >= 0.0)) throw ConfigError("train: learning_rate must be >= 0");
    if (objective != Objective::CPO && m_per_step < 1) throw ConfigError("train: m_per_step must be >= 1");
    if (kl_to_init_weight < 0.0) throw ConfigError("train: kl_to_init_weight must be >= 0");
}

StepBatch draw_step_batch(const TrainConfig& cfg, const TrainInputs& in, Rng& rng) {
    StepBatch batch;
    if (needs_dataset(cfg.objective)) {
        std::uniform_int_distribution<std::size_t> pick(0, in.ds->samples.size() - 1);
        batch.rows.resize(static_cast<std::size_t>(cfg.batch));
        for (auto& r : batch.rows) r = pick(rng);
    }
    if (needs_outcome_model(cfg.objective)) {
        batch.draws = draw_reference_texts(*in.f0, cfg.m_per_step, rng);
    }
    return batch;
}

double objective_on_batch(const TrainConfig& cfg, const Policy& policy, const TrainInputs& in,
                          const StepBatch& batch) {
    require_inputs(cfg, in);
    double estimate = 0.0;
    if (needs_dataset(cfg.objective)) {
        const auto part = ipw_part(cfg, policy, in, batch);
        double s = 0.0;
        for (std::size_t i = 0; i < part.weights.size(); ++i) s += part.weights[i] * part.residuals[i];
        // divide, don't multiply by a reciprocal: estimates must agree bitwise
        // with the estimators module on a shared batch
        estimate += s / static_cast<double>(part.weights.size());
    }
    if (needs_outcome_model(cfg.objective)) {
        const auto part = out_part(cfg, policy, in, batch);
        double s = 0.0;
        for (std::size_t j = 0; j < part.weights.size(); ++j) s += part.weights[j] * part.predictions[j];
        estimate += s / static_cast<double>(part.weights.size());
    }
    return estimate;
}

std::pair<double, ParamGrad> objective_gradient_on_batch(const TrainConfig& cfg, const Policy& policy,
                                                         const TrainInputs& in, const StepBatch& batch) {
    require_inputs(cfg, in);
    ParamGrad grad(policy.num_params(), 0.0);
    double estimate = 0.0;

    if (needs_dataset(cfg.objective)) {
        const auto part = ipw_part(cfg, policy, in, batch);
        const double n = static_cast<double>(part.weights.size());
        double s = 0.0;
        for (std::size_t i = 0; i < part.weights.size(); ++i) {
            const double coeff = part.weights[i] * part.residuals[i];
            s += coeff;
            policy.accumulate_grad_log_prob(in.ds->samples[batch.rows[i]].text, coeff / n, grad);
        }
        estimate += s / n;
    }
    if (needs_outcome_model(cfg.objective)) {
        const auto part = out_part(cfg, policy, in, batch);
        const double m = static_cast<double>(part.weights.size());
        double s = 0.0;
        for (std::size_t j = 0; j < part.weights.size(); ++j) {
            const double coeff = part.weights[j] * part.predictions[j];
            s += coeff;
            policy.accumulate_grad_log_prob(batch.draws[j], coeff / m, grad);
        }
        estimate += s / m;
    }
    return {estimate, std::move(grad)};
}

std::pair<double, ParamGrad> objective_gradient(const TrainConfig& cfg, const Policy& policy, const TrainInputs& in,
                                                Rng& rng) {
    require_inputs(cfg, in);
    const auto batch = draw_step_batch(cfg, in, rng);
    return objective_gradient_on_batch(cfg, policy, in, batch);
}

std::pair<Policy, TrainTrace> train(const TrainConfig& cfg, const Policy& init, const TrainInputs& in,
                                    const Population* pop_for_trace) {
    cfg.validate();
    require_inputs(cfg, in);
    Policy policy = init;
    Rng rng(derive_seed(cfg.seed, /*purpose=*/0x7261696eULL));
    TrainTrace trace;
    trace.reserve(static_cast<std::size_t>(cfg.steps));

    const std::size_t p = policy.num_params();
    std::vector<double> adam_m(p, 0.0), adam_v(p, 0.0);
    const auto [beta1, beta2] = cfg.adam_betas;

    bool trace_truth = pop_for_trace != nullptr;
    if (trace_truth) {
        try {
            (void)pop_for_trace->vocab.space_size();
        } catch (const EnumerationTooLarge&) {
            trace_truth = false;
        }
    }

    for (int step = 1; step <= cfg.steps; ++step) {
        const auto batch = draw_step_batch(cfg, in, rng);
        auto [estimate, grad] = objective_gradient_on_batch(cfg, policy, in, batch);
        if (!std::isfinite(estimate)) {
            throw DivergenceDetected("objective estimate became non-finite at step " + std::to_string(step));
        }

        if (cfg.kl_to_init_weight > 0.0) {
            // Score-function estimate of -grad KL(P^f || P^init) on fresh draws
            // from the current policy.
            const int k = std::max(cfg.m_per_step, cfg.batch);
            for (int j = 0; j < k; ++j) {
                const Text x = policy.sample(rng);
                const double delta = policy.log_prob(x) - init.log_prob(x);
                policy.accumulate_grad_log_prob(x, -cfg.kl_to_init_weight * delta / static_cast<double>(k), grad);
            }
        }

        TraceRow row;
        row.step = step;
        row.estimate = estimate;
        row.grad_norm = l2_norm(grad);
        if (trace_truth) row.true_value = true_value(policy, *pop_for_trace);

        auto logits = policy.logits();
        if (cfg.use_adam) {
            const double bc1 = 1.0 - std::pow(beta1, step);
            const double bc2 = 1.0 - std::pow(beta2, step);
            for (std::size_t i = 0; i < p; ++i) {
                adam_m[i] = beta1 * adam_m[i] + (1.0 - beta1) * grad[i];
                adam_v[i] = beta2 * adam_v[i] + (1.0 - beta2) * grad[i] * grad[i];
                logits[i] += cfg.learning_rate * (adam_m[i] / bc1) / (std::sqrt(adam_v[i] / bc2) + cfg.adam_eps);
            }
        } else {
            for (std::size_t i = 0; i < p; ++i) logits[i] += cfg.learning_rate * grad[i];
        }
        trace.push_back(std::move(row));
    }
    return {std::move(policy), std::move(trace)};
}

}  // namespace cpo
