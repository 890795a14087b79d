#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cpo/outcome_model.hpp"
#include "cpo/policy.hpp"
#include "cpo/rng.hpp"
#include "cpo/simulator.hpp"

namespace cpo {

// Density-ratio handling. Ratios are always formed in log space and
// exponentiated once; clipping caps the ratio (not the log) from above and
// self-normalization divides weights by their sample mean (Hajek).
struct WeightOptions {
    bool self_normalize = false;
    std::optional<double> clip_max;

    std::string describe() const;
};

// Point estimate of a value functional with per-sample contributions.
// `per_sample` holds the main sum's contributions (the n-term for IPW/DR, the
// m-term for the outcome-only estimator); `per_sample_aux` holds the DR
// estimator's f0-draw term. value = mean(per_sample) [+ mean(per_sample_aux)].
struct ValueEstimate {
    std::string estimator;
    double value = 0.0;
    std::vector<double> per_sample;
    std::vector<double> per_sample_aux;
    double std_error = 0.0;
    std::string stabilization = "none";

    std::size_t n() const { return per_sample.size(); }
    std::size_t m() const { return per_sample_aux.size(); }
};

// Applies optional clip at log(clip_max), exponentiates, then optional
// self-normalization. With neither option, output is exp(input).
std::vector<double> stabilize(const std::vector<double>& log_ratios, const WeightOptions& opts);

// (1/n) sum_i exp(log P^f(X_i) - log pR(X_i)) * Y_i over a randomized dataset.
ValueEstimate v_ipw(const Policy& policy, const LabeledDataset& ds, const Policy& pR, const WeightOptions& opts = {});

// (1/m) sum_j exp(log P^f(X~_j) - log P^f0(X~_j)) * ghat(X~_j), X~ drawn from f0.
ValueEstimate v_out(const Policy& policy, const Policy& f0, const OutcomeModel& ghat, int m, Rng& rng,
                    const WeightOptions& opts = {});

// Doubly robust combination: IPW residual term plus outcome-model term, with
// independent standard errors summed in quadrature. Warns on stderr when ghat
// was fit on this same dataset (sample-splitting contract).
ValueEstimate v_dr(const Policy& policy, const LabeledDataset& ds, const Policy& pR, const OutcomeModel& ghat,
                   const Policy& f0, int m, Rng& rng, const WeightOptions& opts = {});

// Draws the f0 Monte Carlo texts used by v_out / v_dr; exposed so callers can
// reproduce the exact draw sequence.
std::vector<Text> draw_reference_texts(const Policy& f0, int m, Rng& rng);

}  // namespace cpo
