#include <doctest.h>

#include <cmath>
#include <cstring>
#include <numeric>

#include "cpo/optimizer.hpp"
#include "cpo/util.hpp"

using namespace cpo;

namespace {

bool bit_equal(double a, double b) { return std::memcmp(&a, &b, sizeof(double)) == 0; }

// Two-text benchmark: V=2, L=1, g([1]) = 1, g([0]) = 0, uniform assignment.
struct TwoText {
    Vocab vocab{2, 1};
    Population pop;
    Policy assignment;
    LabeledDataset ds;

    explicit TwoText(int n = 500, unsigned seed = 5) : assignment(vocab, 0) {
        pop.vocab = vocab;
        pop.noise_sd = 0.0;
        pop.g_weights.assign(feature_dim(vocab, 2), 0.0);
        pop.g_weights[2] = 1.0;  // token-1 unigram
        Rng rng(seed);
        ds = run_experiment(pop, assignment, n, rng);
    }

    OutcomeModel model(double sign) const {
        OutcomeModel m;
        m.vocab = vocab;
        m.feature_order = 2;
        m.weights = pop.g_weights;
        for (auto& w : m.weights) w *= sign;
        return m;
    }
};

// Dataset with exactly balanced texts, so expectations are exact.
LabeledDataset balanced_two_text_dataset(const TwoText& b, int per_text) {
    LabeledDataset ds;
    ds.vocab = b.vocab;
    ds.provenance = {Provenance::Kind::Randomized, "balanced"};
    for (int i = 0; i < per_text; ++i) {
        ds.samples.push_back({{0}, 0.0});
        ds.samples.push_back({{1}, 1.0});
    }
    return ds;
}

}  // namespace

TEST_CASE("cpo gradient matches the hand-computed expectation") {
    TwoText b;
    const auto ds = balanced_two_text_dataset(b, 250);
    TrainConfig cfg;
    cfg.objective = Objective::CPO;
    TrainInputs in;
    in.ds = &ds;
    in.pR = &b.assignment;

    StepBatch batch;
    batch.rows.resize(ds.samples.size());
    std::iota(batch.rows.begin(), batch.rows.end(), 0);
    const Policy uniform(b.vocab, 1);
    const auto [estimate, grad] = objective_gradient_on_batch(cfg, uniform, in, batch);
    // Half the rows carry y=1 and weight 1; score of [1] is (-1/2, +1/2).
    CHECK(estimate == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(grad[0] == doctest::Approx(-0.25).epsilon(1e-12));
    CHECK(grad[1] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("drcpo with a zero outcome model has the cpo gradient, bitwise") {
    TwoText b;
    auto zero = b.model(0.0);
    TrainConfig cpo_cfg, dr_cfg;
    cpo_cfg.objective = Objective::CPO;
    dr_cfg.objective = Objective::DRCPO;
    cpo_cfg.batch = dr_cfg.batch = 64;
    dr_cfg.m_per_step = 32;
    const Policy f0(b.vocab, 0);
    TrainInputs in_cpo{&b.ds, &b.assignment, nullptr, nullptr};
    TrainInputs in_dr{&b.ds, &b.assignment, &zero, &f0};
    Rng maker(7);
    const auto policy = Policy::random(b.vocab, 1, 0.5, maker);

    Rng r1(11), r2(11);
    const auto [e_cpo, g_cpo] = objective_gradient(cpo_cfg, policy, in_cpo, r1);
    const auto [e_dr, g_dr] = objective_gradient(dr_cfg, policy, in_dr, r2);
    CHECK(bit_equal(e_cpo, e_dr));
    for (std::size_t i = 0; i < g_cpo.size(); ++i) CHECK(bit_equal(g_cpo[i], g_dr[i]));
}

TEST_CASE("objective estimates agree with the estimators module, bitwise") {
    const Vocab vocab{2, 3};
    Population pop;
    pop.vocab = vocab;
    pop.noise_sd = 0.5;
    pop.g_weights.assign(feature_dim(vocab, 2), 0.0);
    Rng wrng(13);
    std::normal_distribution<double> w(0.0, 0.5);
    for (auto& x : pop.g_weights) x = w(wrng);
    Rng maker(17);
    const auto assignment = Policy::random(vocab, 1, 0.3, maker);
    const auto target = Policy::random(vocab, 1, 0.6, maker);
    const auto f0 = Policy::random(vocab, 1, 0.3, maker);
    Rng dsrng(19);
    const auto ds = run_experiment(pop, assignment, 120, dsrng);
    const auto ghat = fit_outcome_model(ds, 2, 1e-6);

    StepBatch batch;
    batch.rows.resize(ds.samples.size());
    std::iota(batch.rows.begin(), batch.rows.end(), 0);
    const std::uint64_t seed = 23;
    {
        Rng rng(seed);
        batch.draws = draw_reference_texts(f0, 200, rng);
    }

    SUBCASE("cpo vs v_ipw") {
        TrainConfig cfg;
        cfg.objective = Objective::CPO;
        TrainInputs in{&ds, &assignment, nullptr, nullptr};
        CHECK(bit_equal(objective_on_batch(cfg, target, in, batch), v_ipw(target, ds, assignment).value));
    }
    SUBCASE("oorlhf vs v_out") {
        TrainConfig cfg;
        cfg.objective = Objective::OORLHF;
        cfg.m_per_step = 200;
        TrainInputs in{nullptr, nullptr, &ghat, &f0};
        Rng rng(seed);
        CHECK(bit_equal(objective_on_batch(cfg, target, in, batch), v_out(target, f0, ghat, 200, rng).value));
    }
    SUBCASE("drcpo vs v_dr") {
        TrainConfig cfg;
        cfg.objective = Objective::DRCPO;
        cfg.m_per_step = 200;
        TrainInputs in{&ds, &assignment, &ghat, &f0};
        Rng rng(seed);
        CHECK(bit_equal(objective_on_batch(cfg, target, in, batch),
                        v_dr(target, ds, assignment, ghat, f0, 200, rng).value));
    }
    SUBCASE("self-normalized weights agree too") {
        TrainConfig cfg;
        cfg.objective = Objective::CPO;
        cfg.weight_opts.self_normalize = true;
        TrainInputs in{&ds, &assignment, nullptr, nullptr};
        WeightOptions opts;
        opts.self_normalize = true;
        CHECK(bit_equal(objective_on_batch(cfg, target, in, batch), v_ipw(target, ds, assignment, opts).value));
    }
}

TEST_CASE("objective gradients match finite differences on frozen batches") {
    const Vocab vocab{2, 2};
    Rng rng(29);
    const double h = 1e-5;
    for (int i = 0; i < 12; ++i) {
        Population pop;
        pop.vocab = vocab;
        pop.noise_sd = 0.5;
        pop.g_weights.assign(feature_dim(vocab, 2), 0.0);
        std::normal_distribution<double> w(0.0, 0.6);
        for (auto& x : pop.g_weights) x = w(rng);
        const auto assignment = Policy::random(vocab, 1, 0.3, rng);
        const auto ds = run_experiment(pop, assignment, 40, rng);
        const auto ghat = fit_outcome_model(ds, 2, 1e-6);
        const auto f0 = Policy::random(vocab, 1, 0.3, rng);
        auto policy = Policy::random(vocab, 1, 0.5, rng);

        TrainConfig cfg;
        cfg.objective = i % 3 == 0 ? Objective::CPO : (i % 3 == 1 ? Objective::DRCPO : Objective::OORLHF);
        cfg.batch = 32;
        cfg.m_per_step = 32;
        TrainInputs in{&ds, &assignment, &ghat, &f0};
        const auto batch = draw_step_batch(cfg, in, rng);
        const auto grad = objective_gradient_on_batch(cfg, policy, in, batch).second;

        double num = 0.0, den = 0.0;
        for (std::size_t p = 0; p < policy.num_params(); ++p) {
            const double saved = policy.logits()[p];
            policy.logits()[p] = saved + h;
            const double up = objective_on_batch(cfg, policy, in, batch);
            policy.logits()[p] = saved - h;
            const double down = objective_on_batch(cfg, policy, in, batch);
            policy.logits()[p] = saved;
            const double fd = (up - down) / (2.0 * h);
            num += (fd - grad[p]) * (fd - grad[p]);
            den += std::max(fd * fd, grad[p] * grad[p]);
        }
        CHECK(std::sqrt(num / std::max(den, 1e-300)) < 1e-4);
    }
}

TEST_CASE("missing inputs are reported per objective") {
    TwoText b;
    TrainConfig cfg;
    cfg.objective = Objective::DRCPO;
    TrainInputs in{&b.ds, &b.assignment, nullptr, nullptr};
    Rng rng(1);
    CHECK_THROWS_AS(objective_gradient(cfg, Policy(b.vocab, 1), in, rng), MissingInput);
    cfg.objective = Objective::CPO;
    TrainInputs empty;
    CHECK_THROWS_AS(objective_gradient(cfg, Policy(b.vocab, 1), empty, rng), MissingInput);
}

TEST_CASE("zero learning rate returns the init policy unchanged") {
    TwoText b;
    const auto init = mle_fit(b.ds.texts(), b.vocab, 1, 0.5);
    TrainConfig cfg;
    cfg.objective = Objective::CPO;
    cfg.steps = 25;
    cfg.batch = 32;
    cfg.learning_rate = 0.0;
    cfg.seed = 97;
    TrainInputs in{&b.ds, &b.assignment, nullptr, nullptr};
    const auto [trained, trace] = train(cfg, init, in, &b.pop);
    CHECK(trained == init);
    CHECK(trace.size() == 25);
    CHECK(trace.back().true_value.has_value());
}

TEST_CASE("cpo training solves the two-text benchmark") {
    TwoText b;
    const auto init = mle_fit(b.ds.texts(), b.vocab, 1, 0.5);
    TrainConfig cfg;
    cfg.objective = Objective::CPO;
    cfg.steps = 2000;
    cfg.batch = 64;
    cfg.learning_rate = 0.05;
    cfg.weight_opts.self_normalize = true;
    cfg.seed = 41;
    TrainInputs in{&b.ds, &b.assignment, nullptr, nullptr};
    const auto [trained, trace] = train(cfg, init, in, &b.pop);
    CHECK(std::exp(trained.log_prob({1})) > 0.99);
    CHECK(true_value(trained, b.pop) >= 0.99);
    CHECK(trace.size() == 2000);
}

TEST_CASE("confounded outcome models split drcpo from oorlhf") {
    TwoText b;
    const auto init = mle_fit(b.ds.texts(), b.vocab, 1, 0.5);
    const auto negated = b.model(-1.0);
    TrainConfig cfg;
    cfg.steps = 2000;
    cfg.batch = 64;
    cfg.learning_rate = 0.05;
    cfg.m_per_step = 64;
    cfg.weight_opts.self_normalize = true;
    cfg.seed = 43;

    cfg.objective = Objective::DRCPO;
    TrainInputs in_dr{&b.ds, &b.assignment, &negated, &init};
    const auto dr = train(cfg, init, in_dr, &b.pop).first;
    CHECK(true_value(dr, b.pop) >= 0.95);

    cfg.objective = Objective::OORLHF;
    TrainInputs in_oo{nullptr, nullptr, &negated, &init};
    const auto oo = train(cfg, init, in_oo, &b.pop).first;
    CHECK(true_value(oo, b.pop) <= 0.05);
}

TEST_CASE("training improves the enumerated value in at least 19 of 20 seeded runs") {
    TwoText b(500, 11);
    const auto init = mle_fit(b.ds.texts(), b.vocab, 1, 0.5);
    const double initial = true_value(init, b.pop);
    int improved = 0;
    for (int s = 0; s < 20; ++s) {
        TrainConfig cfg;
        cfg.objective = Objective::CPO;
        cfg.steps = 300;
        cfg.batch = 64;
        cfg.learning_rate = 0.05;
        cfg.weight_opts.self_normalize = true;
        cfg.seed = 1000 + static_cast<std::uint64_t>(s);
        TrainInputs in{&b.ds, &b.assignment, nullptr, nullptr};
        improved += true_value(train(cfg, init, in).first, b.pop) > initial;
    }
    CHECK(improved >= 19);
}

TEST_CASE("trained policies never beat the best text (optimum certificate)") {
    TwoText b;
    const auto init = mle_fit(b.ds.texts(), b.vocab, 1, 0.5);
    double best = -1e300;
    for (const auto& text : enumerate_texts(b.vocab)) best = std::max(best, b.pop.mean_outcome(text));
    for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL}) {
        TrainConfig cfg;
        cfg.objective = Objective::CPO;
        cfg.steps = 500;
        cfg.batch = 64;
        cfg.learning_rate = 0.2;
        cfg.seed = seed;
        TrainInputs in{&b.ds, &b.assignment, nullptr, nullptr};
        CHECK(true_value(train(cfg, init, in).first, b.pop) <= best + 1e-9);
    }
}

TEST_CASE("divergence is detected") {
    // A density in the subnormal range makes the ratio overflow outright.
    const Vocab vocab{2, 1};
    Policy spiky(vocab, 0);
    spiky.logits()[1] = -720.0;
    LabeledDataset ds;
    ds.vocab = vocab;
    ds.provenance = {Provenance::Kind::Randomized, "unit"};
    for (int i = 0; i < 8; ++i) ds.samples.push_back({{i % 2}, static_cast<double>(i % 2)});
    TrainConfig cfg;
    cfg.objective = Objective::CPO;
    cfg.steps = 5;
    cfg.batch = 8;
    cfg.seed = 3;
    TrainInputs in{&ds, &spiky, nullptr, nullptr};
    CHECK_THROWS_AS(train(cfg, Policy(vocab, 1), in), DivergenceDetected);
}

TEST_CASE("training is deterministic for a fixed seed") {
    TwoText b;
    const auto init = mle_fit(b.ds.texts(), b.vocab, 1, 0.5);
    TrainConfig cfg;
    cfg.objective = Objective::CPO;
    cfg.steps = 100;
    cfg.batch = 32;
    cfg.learning_rate = 0.05;
    cfg.seed = 77;
    TrainInputs in{&b.ds, &b.assignment, nullptr, nullptr};
    const auto a = train(cfg, init, in).first;
    const auto c = train(cfg, init, in).first;
    CHECK(a == c);
}

TEST_CASE("kl penalty keeps the policy near its init") {
    TwoText b;
    const auto init = mle_fit(b.ds.texts(), b.vocab, 1, 0.5);
    TrainConfig cfg;
    cfg.objective = Objective::CPO;
    cfg.steps = 600;
    cfg.batch = 64;
    cfg.learning_rate = 0.05;
    cfg.seed = 7;
    cfg.kl_to_init_weight = 25.0;
    TrainInputs in{&b.ds, &b.assignment, nullptr, nullptr};
    const auto constrained = train(cfg, init, in).first;
    cfg.kl_to_init_weight = 0.0;
    const auto free = train(cfg, init, in).first;
    const double p_init = std::exp(init.log_prob({1}));
    CHECK(std::abs(std::exp(constrained.log_prob({1})) - p_init) <
          std::abs(std::exp(free.log_prob({1})) - p_init));
}
