#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cpo/policy.hpp"
#include "cpo/rng.hpp"
#include "cpo/textspace.hpp"

namespace cpo {

// Ground-truth population: mean outcome g(x) = <g_weights, featurize(x)> plus
// homoscedastic Gaussian individual noise.
struct Population {
    std::vector<double> g_weights;
    double noise_sd = 0.0;
    Vocab vocab;

    // n-gram order implied by the weight dimension.
    int feature_order() const;
    // g(x): average outcome if every individual were given `text`.
    double mean_outcome(const Text& text) const;
    void validate() const;
};

struct Provenance {
    enum class Kind { Randomized, Observational };
    Kind kind = Kind::Randomized;
    std::string descriptor;  // assignment policy id / confounder descriptor

    bool operator==(const Provenance&) const = default;
};

struct Sample {
    Text text;
    double outcome = 0.0;

    bool operator==(const Sample&) const = default;
};

struct LabeledDataset {
    std::vector<Sample> samples;
    Provenance provenance;
    Vocab vocab;

    std::vector<Text> texts() const;
    std::vector<double> outcomes() const;
    // Content fingerprint, used for the sample-splitting warning.
    std::uint64_t fingerprint() const;
};

struct ConfounderSpec {
    enum class Kind { Negation, LatentShift };
    Kind kind = Kind::Negation;
    double strength = 0.0;        // delta: outcome shift per unit latent
    double selection_bias = 0.0;  // beta: latent-text selection coupling

    std::string descriptor() const;
};

// One individual's response: g(text) + Normal(0, noise_sd^2).
double potential_outcome(const Population& pop, const Text& text, Rng& rng);

// Exact V(f) = sum_x P^f(x) g(x) by full enumeration; independent of noise_sd.
double true_value(const Policy& policy, const Population& pop);

// n i.i.d. draws text ~ assignment, outcome = potential_outcome(text).
LabeledDataset run_experiment(const Population& pop, const Policy& assignment, int n, Rng& rng,
                              const std::string& assignment_id = "assignment");

// Injects confounding into a randomized dataset, yielding observational data.
// Negation: outcome y -> -y. LatentShift: per-sample latent u ~ N(0,1); rows
// are resampled with weight proportional to exp(beta * u * z(text)), where
// z is g standardized over the dataset's texts, and outcomes shift by delta*u.
LabeledDataset confound(const LabeledDataset& ds, const ConfounderSpec& spec, const Population& pop, Rng& rng);

}  // namespace cpo
