#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpo/estimators.hpp"
#include "cpo/optimizer.hpp"
#include "cpo/outcome_model.hpp"
#include "cpo/policy.hpp"
#include "cpo/simulator.hpp"

namespace cpo {

enum class CiMethod { Normal, Wilson };

// Oracle-judged preference comparison: a pair is won by the text with the
// higher population mean outcome; equal values (within 1e-12) tie for half a
// win each.
struct WinRateResult {
    int wins = 0;
    int ties = 0;
    int total = 0;
    double rate = 0.5;
    double ci_low = 0.0;
    double ci_high = 1.0;
};

WinRateResult win_rate_from_texts(std::span<const Text> texts_a, std::span<const Text> texts_b,
                                  const Population& pop, CiMethod ci = CiMethod::Normal);

WinRateResult win_rate(const Policy& policy_a, const Policy& policy_b, const Population& pop, int pairs, Rng& rng,
                       CiMethod ci = CiMethod::Normal);

struct RewardRow {
    std::string name;
    double v_dr = 0.0;
    double v_ipw = 0.0;
    double v_out = 0.0;
    double v_dr_raw = 0.0;
    double v_ipw_raw = 0.0;
    double v_out_raw = 0.0;
    std::optional<double> truth;  // enumerated V(f) when the population is known
};

// Evaluates every policy under the three value estimators with a fixed
// evaluation seed (identical policies produce identical rows). The `opts`
// columns are reported next to raw (unstabilized) ones.
std::vector<RewardRow> reward_table(const std::vector<std::pair<std::string, const Policy*>>& policies,
                                    const LabeledDataset& ds, const Policy& pR, const OutcomeModel& ghat,
                                    const Policy& f0, int m, const WeightOptions& opts, std::uint64_t eval_seed,
                                    const Population* pop = nullptr);

struct ImpactResult {
    std::string method;
    double impact = 0.0;  // win_rate(confounded vs clean) - 0.5
    double ci_low = 0.0;
    double ci_high = 0.0;
    WinRateResult raw;
};

// Confounding impact of a method: how much a confounded-outcome-model variant
// loses (negative) or gains against the clean variant of the same method.
ImpactResult confounding_impact(const std::string& method, const Policy& trained_confounded,
                                const Policy& trained_clean, const Population& pop, int pairs, Rng& rng,
                                CiMethod ci = CiMethod::Normal);

enum class EstimatorId { IPW, DR, OUT };

std::string estimator_name(EstimatorId id);

// One configured corner of the {density} x {outcome model} x {n, m, sigma}
// matrix on which replicate experiments are run.
struct Scenario {
    std::string id;
    Population pop;
    Policy assignment;                  // true randomization mechanism
    Policy target;                      // policy f being valued
    Policy f0;                          // reference policy for the outcome term
    std::shared_ptr<const Policy> density;  // density used by the estimator (true or estimated)
    std::shared_ptr<const OutcomeModel> ghat;  // required for DR / OUT
    int n = 1000;
    int m = 1000;
    WeightOptions opts;
};

struct BiasVarianceReport {
    std::string estimator;
    std::string scenario;
    int replicates = 0;
    double replicate_mean = 0.0;
    double true_value = 0.0;
    double bias = 0.0;
    double se_of_mean = 0.0;
    double replicate_variance = 0.0;
};

// R independent replicate datasets, one estimate each; bias is measured
// against the enumerated truth, never against another estimator.
BiasVarianceReport bias_variance_experiment(EstimatorId estimator, const Scenario& scenario, int R,
                                            std::uint64_t seed, int threads = 1);

// Replicate estimates backing a report; exposed for paired variance
// comparisons across estimators on identical replicate datasets.
std::vector<double> replicate_estimates(EstimatorId estimator, const Scenario& scenario, int R, std::uint64_t seed,
                                        int threads = 1);

}  // namespace cpo
