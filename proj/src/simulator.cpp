#include "cpo/simulator.hpp"

#include <cmath>
#include <string>

#include "cpo/errors.hpp"
#include "cpo/util.hpp"

namespace cpo {

int Population::feature_order() const {
    const std::size_t d = g_weights.size();
    if (d == feature_dim(vocab, 1)) return 1;
    if (d == feature_dim(vocab, 2)) return 2;
    throw Error("population weight dimension " + std::to_string(d) + " matches neither order-1 nor order-2 features");
}

double Population::mean_outcome(const Text& text) const {
    const auto f = featurize(text, vocab, feature_order());
    return dot(f, g_weights);
}

void Population::validate() const {
    vocab.validate();
    feature_order();
    if (!(noise_sd >= 0.0)) throw Error("population noise_sd must be >= 0");
    for (double w : g_weights) {
        if (!std::isfinite(w)) throw Error("population g_weights must be finite");
    }
}

std::vector<Text> LabeledDataset::texts() const {
    std::vector<Text> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.text);
    return out;
}

std::vector<double> LabeledDataset::outcomes() const {
    std::vector<double> out;
    out.reserve(samples.size());
    for (const auto& s : samples) out.push_back(s.outcome);
    return out;
}

std::uint64_t LabeledDataset::fingerprint() const {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    h = fnv1a(&vocab.size, sizeof(vocab.size), h);
    h = fnv1a(&vocab.seq_len, sizeof(vocab.seq_len), h);
    for (const auto& s : samples) {
        h = fnv1a(s.text.data(), s.text.size() * sizeof(std::int32_t), h);
        h = fnv1a(&s.outcome, sizeof(s.outcome), h);
    }
    return h;
}

std::string ConfounderSpec::descriptor() const {
    return kind == Kind::Negation ? "negation" : "latent-shift";
}

double potential_outcome(const Population& pop, const Text& text, Rng& rng) {
    double y = pop.mean_outcome(text);
    if (pop.noise_sd > 0.0) {
        std::normal_distribution<double> noise(0.0, pop.noise_sd);
        y += noise(rng);
    }
    return y;
}

double true_value(const Policy& policy, const Population& pop) {
    if (!(policy.vocab() == pop.vocab)) throw Error("true_value: policy and population vocab mismatch");
    double value = 0.0;
    for (const auto& text : enumerate_texts(pop.vocab)) {
        value += std::exp(policy.log_prob(text)) * pop.mean_outcome(text);
    }
    return value;
}

LabeledDataset run_experiment(const Population& pop, const Policy& assignment, int n, Rng& rng,
                              const std::string& assignment_id) {
    if (n < 1) throw Error("run_experiment: n must be >= 1");
    if (!(assignment.vocab() == pop.vocab)) throw Error("run_experiment: assignment and population vocab mismatch");
    LabeledDataset ds;
    ds.vocab = pop.vocab;
    ds.provenance = {Provenance::Kind::Randomized, assignment_id};
    ds.samples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        Text text = assignment.sample(rng);
        const double y = potential_outcome(pop, text, rng);
        ds.samples.push_back({std::move(text), y});
    }
    return ds;
}

LabeledDataset confound(const LabeledDataset& ds, const ConfounderSpec& spec, const Population& pop, Rng& rng) {
    if (ds.provenance.kind != Provenance::Kind::Randomized) {
        throw AlreadyObservational("confound: dataset provenance is already observational (" +
                                   ds.provenance.descriptor + ")");
    }
    if (ds.samples.empty()) throw Error("confound: empty dataset");

    LabeledDataset out;
    out.vocab = ds.vocab;
    out.provenance = {Provenance::Kind::Observational, spec.descriptor()};

    if (spec.kind == ConfounderSpec::Kind::Negation) {
        out.samples.reserve(ds.samples.size());
        for (const auto& s : ds.samples) out.samples.push_back({s.text, -s.outcome});
        return out;
    }

    // LatentShift: standardize g over the dataset's own texts.
    const std::size_t n = ds.samples.size();
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) g[i] = pop.mean_outcome(ds.samples[i].text);
    const double g_mean = mean(g);
    const double g_sd = std::sqrt(sample_variance(g));

    std::normal_distribution<double> latent(0.0, 1.0);
    std::vector<double> u(n);
    std::vector<double> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        u[i] = latent(rng);
        const double z = g_sd > 0.0 ? (g[i] - g_mean) / g_sd : 0.0;
        weight[i] = std::exp(spec.selection_bias * u[i] * z);
    }
    std::discrete_distribution<std::size_t> pick(weight.begin(), weight.end());
    out.samples.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = pick(rng);
        out.samples.push_back({ds.samples[j].text, ds.samples[j].outcome + spec.strength * u[j]});
    }
    return out;
}

}  // namespace cpo
