#include "cpo/estimators.hpp"

#include <cmath>
#include <iostream>
#include <sstream>

#include "cpo/errors.hpp"
#include "cpo/util.hpp"

namespace cpo {

namespace {

void require_randomized(const LabeledDataset& ds, const char* who) {
    if (ds.provenance.kind != Provenance::Kind::Randomized) {
        throw Error(std::string(who) + ": dataset provenance must be Randomized (got observational \"" +
                    ds.provenance.descriptor + "\"); fit an outcome model on observational data instead");
    }
}

// Log density of `text` under pR, rejecting overlap violations: a density that
// underflows to exactly zero cannot weight an observed sample.
double checked_log_pr(const Policy& pR, const Text& text) {
    const double lp = pR.log_prob(text);
    if (std::exp(lp) == 0.0) {
        throw ZeroSupport("randomization density is zero on an observed text (log density " + std::to_string(lp) + ")");
    }
    return lp;
}

void check_weights_finite(const std::vector<double>& w, const WeightOptions& opts, const char* who) {
    if (opts.clip_max) return;  // clipping bounds the ratios
    for (double x : w) {
        if (!std::isfinite(x)) {
            throw NonFiniteWeight(std::string(who) + ": density ratio overflowed; enable clipping or fix overlap");
        }
    }
}

double se_of_mean(const std::vector<double>& contrib) {
    if (contrib.size() < 2) return 0.0;
    return std::sqrt(sample_variance(contrib) / static_cast<double>(contrib.size()));
}

}  // namespace

std::string WeightOptions::describe() const {
    std::ostringstream out;
    if (!self_normalize && !clip_max) return "none";
    if (clip_max) out << "clip=" << *clip_max;
    if (self_normalize) {
        if (clip_max) out << "+";
        out << "self-normalized";
    }
    return out.str();
}

std::vector<double> stabilize(const std::vector<double>& log_ratios, const WeightOptions& opts) {
    if (opts.clip_max && !(*opts.clip_max > 0.0)) throw Error("stabilize: clip_max must be > 0");
    std::vector<double> w(log_ratios.size());
    const double log_clip = opts.clip_max ? std::log(*opts.clip_max) : 0.0;
    for (std::size_t i = 0; i < log_ratios.size(); ++i) {
        double lr = log_ratios[i];
        if (!std::isfinite(lr)) throw Error("stabilize: log ratios must be finite");
        if (opts.clip_max && lr > log_clip) lr = log_clip;
        w[i] = std::exp(lr);
    }
    if (opts.self_normalize && !w.empty()) {
        const double m = mean(w);
        if (m > 0.0) {
            for (auto& x : w) x /= m;
        }
    }
    return w;
}

ValueEstimate v_ipw(const Policy& policy, const LabeledDataset& ds, const Policy& pR, const WeightOptions& opts) {
    require_randomized(ds, "v_ipw");
    if (ds.samples.empty()) throw Error("v_ipw: empty dataset");

    std::vector<double> log_ratios(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& text = ds.samples[i].text;
        log_ratios[i] = policy.log_prob(text) - checked_log_pr(pR, text);
    }
    const auto w = stabilize(log_ratios, opts);
    check_weights_finite(w, opts, "v_ipw");

    ValueEstimate est;
    est.estimator = "v_ipw";
    est.stabilization = opts.describe();
    est.per_sample.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) est.per_sample[i] = w[i] * ds.samples[i].outcome;
    est.value = mean(est.per_sample);
    est.std_error = se_of_mean(est.per_sample);
    return est;
}

std::vector<Text> draw_reference_texts(const Policy& f0, int m, Rng& rng) {
    if (m < 1) throw Error("reference draws: m must be >= 1");
    std::vector<Text> texts;
    texts.reserve(static_cast<std::size_t>(m));
    for (int j = 0; j < m; ++j) texts.push_back(f0.sample(rng));
    return texts;
}

ValueEstimate v_out(const Policy& policy, const Policy& f0, const OutcomeModel& ghat, int m, Rng& rng,
                    const WeightOptions& opts) {
    const auto texts = draw_reference_texts(f0, m, rng);
    std::vector<double> log_ratios(texts.size());
    for (std::size_t j = 0; j < texts.size(); ++j) {
        log_ratios[j] = policy.log_prob(texts[j]) - f0.log_prob(texts[j]);
    }
    const auto w = stabilize(log_ratios, opts);
    check_weights_finite(w, opts, "v_out");

    ValueEstimate est;
    est.estimator = "v_out";
    est.stabilization = opts.describe();
    est.per_sample.resize(w.size());
    for (std::size_t j = 0; j < w.size(); ++j) est.per_sample[j] = w[j] * ghat.predict(texts[j]);
    est.value = mean(est.per_sample);
    est.std_error = se_of_mean(est.per_sample);
    return est;
}

ValueEstimate v_dr(const Policy& policy, const LabeledDataset& ds, const Policy& pR, const OutcomeModel& ghat,
                   const Policy& f0, int m, Rng& rng, const WeightOptions& opts) {
    require_randomized(ds, "v_dr");
    if (ds.samples.empty()) throw Error("v_dr: empty dataset");
    if (ghat.trained_on != 0 && ghat.trained_on == ds.fingerprint()) {
        std::cerr << "[cpo] warning: v_dr outcome model was fit on the evaluation dataset; "
                     "unbiasedness under a wrong density requires a separate sample\n";
    }

    // IPW residual term over the randomized data.
    std::vector<double> log_ratios(ds.samples.size());
    for (std::size_t i = 0; i < ds.samples.size(); ++i) {
        const auto& text = ds.samples[i].text;
        log_ratios[i] = policy.log_prob(text) - checked_log_pr(pR, text);
    }
    const auto w = stabilize(log_ratios, opts);
    check_weights_finite(w, opts, "v_dr");

    ValueEstimate est;
    est.estimator = "v_dr";
    est.stabilization = opts.describe();
    est.per_sample.resize(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) {
        est.per_sample[i] = w[i] * (ds.samples[i].outcome - ghat.predict(ds.samples[i].text));
    }

    // Outcome-model term over fresh f0 draws; identical draw path to v_out.
    const auto texts = draw_reference_texts(f0, m, rng);
    std::vector<double> log_ratios_out(texts.size());
    for (std::size_t j = 0; j < texts.size(); ++j) {
        log_ratios_out[j] = policy.log_prob(texts[j]) - f0.log_prob(texts[j]);
    }
    const auto w_out = stabilize(log_ratios_out, opts);
    check_weights_finite(w_out, opts, "v_dr");
    est.per_sample_aux.resize(w_out.size());
    for (std::size_t j = 0; j < w_out.size(); ++j) est.per_sample_aux[j] = w_out[j] * ghat.predict(texts[j]);

    est.value = mean(est.per_sample) + mean(est.per_sample_aux);
    // The two sums use disjoint randomness, so their variances add.
    const double se1 = se_of_mean(est.per_sample);
    const double se2 = se_of_mean(est.per_sample_aux);
    est.std_error = std::sqrt(se1 * se1 + se2 * se2);
    return est;
}

}  // namespace cpo
