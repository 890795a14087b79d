#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "cpo/outcome_model.hpp"
#include "cpo/simulator.hpp"

using namespace cpo;

namespace {

Population intercept_population(Vocab vocab, double c, double noise_sd = 0.0) {
    Population pop;
    pop.vocab = vocab;
    pop.noise_sd = noise_sd;
    pop.g_weights.assign(feature_dim(vocab, 2), 0.0);
    pop.g_weights[0] = c;
    return pop;
}

// Rewards each occurrence of token 1.
Population token1_population(Vocab vocab, double noise_sd = 0.0) {
    Population pop;
    pop.vocab = vocab;
    pop.noise_sd = noise_sd;
    pop.g_weights.assign(feature_dim(vocab, 2), 0.0);
    pop.g_weights[2] = 1.0;
    return pop;
}

}  // namespace

TEST_CASE("potential outcomes without noise are the population mean") {
    Rng rng(1);
    auto pop = intercept_population({2, 4}, 5.0);
    for (const auto& text : enumerate_texts(pop.vocab)) {
        CHECK(potential_outcome(pop, text, rng) == 5.0);
    }
    auto pop1 = token1_population({2, 4});
    CHECK(potential_outcome(pop1, {1, 1, 1, 1}, rng) == 4.0);
    CHECK(potential_outcome(pop1, {0, 0, 0, 0}, rng) == 0.0);
}

TEST_CASE("noisy outcomes concentrate at the mean (CLT bound)") {
    auto pop = token1_population({2, 4}, 1.0);
    const Text text{1, 0, 1, 0};
    Rng rng(5);
    double sum = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) sum += potential_outcome(pop, text, rng);
    CHECK(std::abs(sum / n - pop.mean_outcome(text)) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("true_value agrees with hand-computed cases") {
    const Vocab vocab{2, 2};
    SUBCASE("intercept-only population") {
        CHECK(true_value(Policy(vocab, 1), intercept_population(vocab, 3.25)) == doctest::Approx(3.25));
    }
    SUBCASE("deterministic policy hits g at its point mass") {
        Policy p(vocab, 0);
        p.logits()[p.row_offset(0, 0) + 1] = 60.0;
        p.logits()[p.row_offset(1, 0) + 1] = 60.0;
        const auto pop = token1_population(vocab);
        CHECK(true_value(p, pop) == doctest::Approx(pop.mean_outcome({1, 1})).epsilon(1e-12));
    }
    SUBCASE("uniform policy averages token-1 counts") {
        CHECK(true_value(Policy(vocab, 1), token1_population(vocab)) == doctest::Approx(1.0).epsilon(1e-12));
    }
}

TEST_CASE("true_value ignores noise and respects the enumeration cap") {
    const Vocab vocab{2, 3};
    const Policy p(vocab, 1);
    CHECK(true_value(p, token1_population(vocab, 0.0)) ==
          doctest::Approx(true_value(p, token1_population(vocab, 5.0))));
    Population pop = token1_population(vocab);
    pop.vocab = {10, 8};
    pop.g_weights.assign(feature_dim(pop.vocab, 1), 0.0);
    CHECK_THROWS_AS(true_value(Policy({10, 8}, 0), pop), EnumerationTooLarge);
}

TEST_CASE("true_value is linear in policy probabilities (mixture oracle)") {
    const Vocab vocab{2, 3};
    Rng rng(9);
    const auto p = Policy::random(vocab, 1, 0.8, rng);
    const auto q = Policy::random(vocab, 2, 0.8, rng);
    Population pop;
    pop.vocab = vocab;
    pop.noise_sd = 0.0;
    pop.g_weights.assign(feature_dim(vocab, 2), 0.0);
    std::normal_distribution<double> w(0.0, 1.0);
    for (auto& x : pop.g_weights) x = w(rng);
    for (const double lambda : {0.0, 0.3, 0.5, 0.9, 1.0}) {
        double mixture_value = 0.0;
        for (const auto& text : enumerate_texts(vocab)) {
            const double mix = lambda * std::exp(p.log_prob(text)) + (1.0 - lambda) * std::exp(q.log_prob(text));
            mixture_value += mix * pop.mean_outcome(text);
        }
        CHECK(mixture_value ==
              doctest::Approx(lambda * true_value(p, pop) + (1.0 - lambda) * true_value(q, pop)).epsilon(1e-10));
    }
}

TEST_CASE("no policy beats the best text") {
    const Vocab vocab{2, 3};
    Rng rng(13);
    Population pop;
    pop.vocab = vocab;
    pop.noise_sd = 0.0;
    pop.g_weights.assign(feature_dim(vocab, 2), 0.0);
    std::normal_distribution<double> w(0.0, 1.0);
    for (auto& x : pop.g_weights) x = w(rng);
    double best = -1e300;
    for (const auto& text : enumerate_texts(vocab)) best = std::max(best, pop.mean_outcome(text));
    for (int i = 0; i < 25; ++i) {
        const auto p = Policy::random(vocab, 1, 2.0, rng);
        CHECK(true_value(p, pop) <= best + 1e-9);
    }
}

TEST_CASE("run_experiment draws from the assignment policy") {
    const Vocab vocab{2, 2};
    Rng rng(17);
    SUBCASE("deterministic assignment repeats one text") {
        Policy det(vocab, 0);
        det.logits()[det.row_offset(0, 0) + 1] = 60.0;
        det.logits()[det.row_offset(1, 0) + 1] = 60.0;
        const auto ds = run_experiment(intercept_population(vocab, 1.0), det, 100, rng);
        CHECK(ds.samples.size() == 100);
        for (const auto& s : ds.samples) CHECK(s.text == Text{1, 1});
        CHECK(ds.provenance.kind == Provenance::Kind::Randomized);
    }
    SUBCASE("zero noise pins outcomes to g") {
        const auto pop = token1_population(vocab);
        const auto ds = run_experiment(pop, Policy(vocab, 0), 500, rng);
        for (const auto& s : ds.samples) CHECK(s.outcome == pop.mean_outcome(s.text));
    }
    SUBCASE("uniform assignment frequencies (binomial CI)") {
        const auto ds = run_experiment(intercept_population(vocab, 0.0), Policy(vocab, 0), 10000, rng);
        std::map<Text, int> counts;
        for (const auto& s : ds.samples) ++counts[s.text];
        for (const auto& text : enumerate_texts(vocab)) {
            const double freq = counts[text] / 10000.0;
            CHECK(freq > 0.23);
            CHECK(freq < 0.27);
        }
    }
}

TEST_CASE("noiseless randomized data identifies canonical population weights") {
    const Vocab vocab{2, 3};
    Population pop;
    pop.vocab = vocab;
    pop.noise_sd = 0.0;
    // Canonical representative: unigram and bigram blocks sum to zero.
    pop.g_weights = {1.5, -0.7, 0.7, 0.4, -0.1, -0.2, -0.1};
    Rng rng(19);
    const auto ds = run_experiment(pop, Policy(vocab, 0), 400, rng);
    const auto model = fit_outcome_model(ds, 2, 0.0);
    for (std::size_t i = 0; i < pop.g_weights.size(); ++i) {
        CHECK(model.weights[i] == doctest::Approx(pop.g_weights[i]).epsilon(1e-8));
    }
}

TEST_CASE("negation confounder flips outcomes") {
    const Vocab vocab{2, 2};
    LabeledDataset ds;
    ds.vocab = vocab;
    ds.provenance = {Provenance::Kind::Randomized, "unit"};
    ds.samples = {{{0, 0}, 3.0}, {{0, 1}, -1.0}, {{1, 0}, 0.0}};
    Rng rng(23);
    const auto pop = intercept_population(vocab, 0.0);
    const auto neg = confound(ds, {ConfounderSpec::Kind::Negation, 0.0, 0.0}, pop, rng);
    CHECK(neg.outcomes() == std::vector<double>{-3.0, 1.0, 0.0});
    CHECK(neg.provenance.kind == Provenance::Kind::Observational);
    CHECK(neg.provenance.descriptor == "negation");
    for (std::size_t i = 0; i < ds.samples.size(); ++i) CHECK(neg.samples[i].text == ds.samples[i].text);

    SUBCASE("negating twice restores the outcomes (involution)") {
        LabeledDataset rewrapped = neg;
        rewrapped.provenance = {Provenance::Kind::Randomized, "unit"};
        const auto back = confound(rewrapped, {ConfounderSpec::Kind::Negation, 0.0, 0.0}, pop, rng);
        CHECK(back.outcomes() == ds.outcomes());
    }
    SUBCASE("confounding observational data is rejected") {
        CHECK_THROWS_AS(confound(neg, {ConfounderSpec::Kind::Negation, 0.0, 0.0}, pop, rng), AlreadyObservational);
    }
}

TEST_CASE("null latent shift leaves the outcome distribution unchanged (KS test)") {
    const Vocab vocab{2, 3};
    Population pop = token1_population(vocab, 1.0);
    Rng rng(29);
    const int n = 10000;
    const auto ds = run_experiment(pop, Policy(vocab, 0), n, rng);
    const auto shifted = confound(ds, {ConfounderSpec::Kind::LatentShift, 0.0, 0.0}, pop, rng);
    CHECK(shifted.provenance.descriptor == "latent-shift");

    auto a = ds.outcomes();
    auto b = shifted.outcomes();
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    // Two-sample Kolmogorov-Smirnov statistic.
    double d = 0.0;
    std::size_t i = 0, j = 0;
    while (i < a.size() && j < b.size()) {
        if (a[i] <= b[j]) {
            ++i;
        } else {
            ++j;
        }
        d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
    }
    // alpha = 0.01: c(alpha) * sqrt(2/n)
    const double critical = 1.62762 * std::sqrt(2.0 / n);
    CHECK(d < critical);
}

TEST_CASE("latent shift with strong selection bias tilts texts toward high g") {
    const Vocab vocab{2, 3};
    Population pop = token1_population(vocab, 0.5);
    Rng rng(31);
    const auto ds = run_experiment(pop, Policy(vocab, 0), 20000, rng);
    const auto shifted = confound(ds, {ConfounderSpec::Kind::LatentShift, 2.0, 1.5}, pop, rng);
    // Selection couples |u| with z(text): mean outcome shifts away from the
    // randomized baseline.
    double base = 0.0, conf = 0.0;
    for (const auto& s : ds.samples) base += s.outcome;
    for (const auto& s : shifted.samples) conf += s.outcome;
    base /= static_cast<double>(ds.samples.size());
    conf /= static_cast<double>(shifted.samples.size());
    CHECK(std::abs(conf - base) > 0.05);
}

TEST_CASE("dataset fingerprints detect content changes") {
    LabeledDataset ds;
    ds.vocab = {2, 2};
    ds.provenance = {Provenance::Kind::Randomized, "unit"};
    ds.samples = {{{0, 1}, 1.5}, {{1, 0}, -0.5}};
    auto copy = ds;
    CHECK(ds.fingerprint() == copy.fingerprint());
    copy.samples[1].outcome = -0.5000001;
    CHECK(ds.fingerprint() != copy.fingerprint());
}
