#include "cpo/evaluation.hpp"

#include <algorithm>
#include <cmath>

#include "cpo/errors.hpp"
#include "cpo/util.hpp"

namespace cpo {

namespace {

constexpr double kTieTolerance = 1e-12;
constexpr double kZ95 = 1.959963984540054;

void attach_ci(WinRateResult& r, CiMethod ci) {
    const double n = static_cast<double>(r.total);
    const double p = r.rate;
    if (ci == CiMethod::Normal) {
        const double half = kZ95 * std::sqrt(p * (1.0 - p) / n);
        r.ci_low = std::max(0.0, p - half);
        r.ci_high = std::min(1.0, p + half);
    } else {
        const double z2 = kZ95 * kZ95;
        const double denom = 1.0 + z2 / n;
        const double center = (p + z2 / (2.0 * n)) / denom;
        const double half = (kZ95 / denom) * std::sqrt(p * (1.0 - p) / n + z2 / (4.0 * n * n));
        r.ci_low = std::max(0.0, center - half);
        r.ci_high = std::min(1.0, center + half);
    }
}

}  // namespace

WinRateResult win_rate_from_texts(std::span<const Text> texts_a, std::span<const Text> texts_b,
                                  const Population& pop, CiMethod ci) {
    if (texts_a.size() != texts_b.size() || texts_a.empty()) throw Error("win_rate: paired text lists required");
    WinRateResult r;
    r.total = static_cast<int>(texts_a.size());
    for (std::size_t i = 0; i < texts_a.size(); ++i) {
        const double ga = pop.mean_outcome(texts_a[i]);
        const double gb = pop.mean_outcome(texts_b[i]);
        if (std::abs(ga - gb) <= kTieTolerance) {
            ++r.ties;
        } else if (ga > gb) {
            ++r.wins;
        }
    }
    r.rate = (static_cast<double>(r.wins) + 0.5 * static_cast<double>(r.ties)) / static_cast<double>(r.total);
    attach_ci(r, ci);
    return r;
}

WinRateResult win_rate(const Policy& policy_a, const Policy& policy_b, const Population& pop, int pairs, Rng& rng,
                       CiMethod ci) {
    if (pairs < 1) throw Error("win_rate: pairs must be >= 1");
    std::vector<Text> a, b;
    a.reserve(static_cast<std::size_t>(pairs));
    b.reserve(static_cast<std::size_t>(pairs));
    for (int i = 0; i < pairs; ++i) {
        a.push_back(policy_a.sample(rng));
        b.push_back(policy_b.sample(rng));
    }
    return win_rate_from_texts(a, b, pop, ci);
}

std::vector<RewardRow> reward_table(const std::vector<std::pair<std::string, const Policy*>>& policies,
                                    const LabeledDataset& ds, const Policy& pR, const OutcomeModel& ghat,
                                    const Policy& f0, int m, const WeightOptions& opts, std::uint64_t eval_seed,
                                    const Population* pop) {
    std::vector<RewardRow> rows;
    rows.reserve(policies.size());
    const WeightOptions raw{};  // no stabilization
    for (const auto& [name, policy] : policies) {
        RewardRow row;
        row.name = name;
        // Fixed per-row seed: identical policies yield identical rows.
        Rng rng_dr(derive_seed(eval_seed, seeds::kRewardTable, 0));
        Rng rng_out(derive_seed(eval_seed, seeds::kRewardTable, 1));
        Rng rng_dr_raw(derive_seed(eval_seed, seeds::kRewardTable, 0));
        Rng rng_out_raw(derive_seed(eval_seed, seeds::kRewardTable, 1));
        row.v_dr = v_dr(*policy, ds, pR, ghat, f0, m, rng_dr, opts).value;
        row.v_ipw = v_ipw(*policy, ds, pR, opts).value;
        row.v_out = v_out(*policy, f0, ghat, m, rng_out, opts).value;
        row.v_dr_raw = v_dr(*policy, ds, pR, ghat, f0, m, rng_dr_raw, raw).value;
        row.v_ipw_raw = v_ipw(*policy, ds, pR, raw).value;
        row.v_out_raw = v_out(*policy, f0, ghat, m, rng_out_raw, raw).value;
        if (pop) row.truth = true_value(*policy, *pop);
        rows.push_back(std::move(row));
    }
    return rows;
}

ImpactResult confounding_impact(const std::string& method, const Policy& trained_confounded,
                                const Policy& trained_clean, const Population& pop, int pairs, Rng& rng,
                                CiMethod ci) {
    ImpactResult res;
    res.method = method;
    res.raw = win_rate(trained_confounded, trained_clean, pop, pairs, rng, ci);
    res.impact = res.raw.rate - 0.5;
    res.ci_low = res.raw.ci_low - 0.5;
    res.ci_high = res.raw.ci_high - 0.5;
    return res;
}

std::string estimator_name(EstimatorId id) {
    switch (id) {
        case EstimatorId::IPW: return "v_ipw";
        case EstimatorId::DR: return "v_dr";
        case EstimatorId::OUT: return "v_out";
    }
    return "?";
}

std::vector<double> replicate_estimates(EstimatorId estimator, const Scenario& scenario, int R, std::uint64_t seed,
                                        int threads) {
    if (R < 1) throw Error("replicate_estimates: R must be >= 1");
    if ((estimator == EstimatorId::DR || estimator == EstimatorId::OUT) && !scenario.ghat) {
        throw MissingInput("scenario \"" + scenario.id + "\" has no outcome model");
    }
    const Policy& density = scenario.density ? *scenario.density : scenario.assignment;
    std::vector<double> estimates(static_cast<std::size_t>(R), 0.0);
    parallel_for(static_cast<std::size_t>(R), threads, [&](std::size_t r) {
        Rng rng(derive_seed(seed, seeds::kBiasVariance, r));
        switch (estimator) {
            case EstimatorId::IPW: {
                const auto ds = run_experiment(scenario.pop, scenario.assignment, scenario.n, rng);
                estimates[r] = v_ipw(scenario.target, ds, density, scenario.opts).value;
                break;
            }
            case EstimatorId::DR: {
                const auto ds = run_experiment(scenario.pop, scenario.assignment, scenario.n, rng);
                estimates[r] = v_dr(scenario.target, ds, density, *scenario.ghat, scenario.f0, scenario.m, rng,
                                    scenario.opts).value;
                break;
            }
            case EstimatorId::OUT:
                // needs no experimental data, only reference draws
                estimates[r] = v_out(scenario.target, scenario.f0, *scenario.ghat, scenario.m, rng,
                                     scenario.opts).value;
                break;
        }
    });
    return estimates;
}

BiasVarianceReport bias_variance_experiment(EstimatorId estimator, const Scenario& scenario, int R,
                                            std::uint64_t seed, int threads) {
    const auto estimates = replicate_estimates(estimator, scenario, R, seed, threads);
    BiasVarianceReport report;
    report.estimator = estimator_name(estimator);
    report.scenario = scenario.id;
    report.replicates = R;
    report.replicate_mean = mean(estimates);
    report.true_value = true_value(scenario.target, scenario.pop);
    report.bias = report.replicate_mean - report.true_value;
    report.replicate_variance = sample_variance(estimates);
    report.se_of_mean = std::sqrt(report.replicate_variance / static_cast<double>(R));
    return report;
}

}  // namespace cpo
