#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <optional>

#include "cpo/acceptance.hpp"
#include "cpo/estimators.hpp"
#include "cpo/evaluation.hpp"
#include "cpo/io.hpp"
#include "cpo/optimizer.hpp"
#include "cpo/outcome_model.hpp"
#include "cpo/policy.hpp"
#include "cpo/simulator.hpp"
#include "cpo/textspace.hpp"

namespace py = pybind11;
using namespace cpo;

namespace {

TrainInputs make_inputs(const LabeledDataset* ds, const Policy* pR, const OutcomeModel* ghat, const Policy* f0) {
    TrainInputs in;
    in.ds = ds;
    in.pR = pR;
    in.ghat = ghat;
    in.f0 = f0;
    return in;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
    m.doc() = "Causal preference optimization of tabular sequence policies from direct outcome data";

    py::register_exception<EnumerationTooLarge>(m, "EnumerationTooLarge");
    py::register_exception<ZeroSupport>(m, "ZeroSupport");
    py::register_exception<NonFiniteWeight>(m, "NonFiniteWeight");
    py::register_exception<AlreadyObservational>(m, "AlreadyObservational");
    py::register_exception<SingularDesign>(m, "SingularDesign");

    py::class_<Vocab>(m, "Vocab")
        .def(py::init<int, int>(), py::arg("size"), py::arg("seq_len"))
        .def_readwrite("size", &Vocab::size)
        .def_readwrite("seq_len", &Vocab::seq_len)
        .def("space_size", &Vocab::space_size)
        .def("__repr__", [](const Vocab& v) {
            return "Vocab(size=" + std::to_string(v.size) + ", seq_len=" + std::to_string(v.seq_len) + ")";
        });

    m.def("enumerate_texts", &enumerate_texts, py::arg("vocab"));
    m.def("featurize", &featurize, py::arg("text"), py::arg("vocab"), py::arg("order") = 2);
    m.def("feature_dim", &feature_dim, py::arg("vocab"), py::arg("order"));

    py::class_<Policy>(m, "Policy")
        .def(py::init<Vocab, int>(), py::arg("vocab"), py::arg("order"))
        .def_static(
            "random",
            [](Vocab vocab, int order, double scale, std::uint64_t seed) {
                Rng rng(seed);
                return Policy::random(vocab, order, scale, rng);
            },
            py::arg("vocab"), py::arg("order"), py::arg("logit_scale"), py::arg("seed"))
        .def_property_readonly("vocab", &Policy::vocab)
        .def_property_readonly("order", &Policy::order)
        .def_property_readonly("num_params", &Policy::num_params)
        .def("log_prob", &Policy::log_prob, py::arg("text"))
        .def(
            "sample",
            [](const Policy& p, std::uint64_t seed, int count) {
                Rng rng(seed);
                std::vector<Text> out;
                out.reserve(static_cast<std::size_t>(count));
                for (int i = 0; i < count; ++i) out.push_back(p.sample(rng));
                return out;
            },
            py::arg("seed"), py::arg("count") = 1)
        .def("grad_log_prob", &Policy::grad_log_prob, py::arg("text"))
        .def("logits", [](const Policy& p) { return std::vector<double>(p.logits().begin(), p.logits().end()); })
        .def("__eq__", [](const Policy& a, const Policy& b) { return a == b; });

    m.def("mle_fit", &mle_fit, py::arg("texts"), py::arg("vocab"), py::arg("order"), py::arg("alpha"));
    m.def("save_policy", &save_policy, py::arg("policy"), py::arg("path"));
    m.def("load_policy", &load_policy, py::arg("path"));

    py::class_<Population>(m, "Population")
        .def(py::init([](std::vector<double> g_weights, double noise_sd, Vocab vocab) {
                 Population pop{std::move(g_weights), noise_sd, vocab};
                 pop.validate();
                 return pop;
             }),
             py::arg("g_weights"), py::arg("noise_sd"), py::arg("vocab"))
        .def_readwrite("g_weights", &Population::g_weights)
        .def_readwrite("noise_sd", &Population::noise_sd)
        .def_readwrite("vocab", &Population::vocab)
        .def("mean_outcome", &Population::mean_outcome, py::arg("text"))
        .def("feature_order", &Population::feature_order);

    py::enum_<Provenance::Kind>(m, "ProvenanceKind")
        .value("Randomized", Provenance::Kind::Randomized)
        .value("Observational", Provenance::Kind::Observational);

    py::class_<Provenance>(m, "Provenance")
        .def_readonly("kind", &Provenance::kind)
        .def_readonly("descriptor", &Provenance::descriptor);

    py::class_<Sample>(m, "Sample")
        .def_readonly("text", &Sample::text)
        .def_readonly("outcome", &Sample::outcome);

    py::class_<LabeledDataset>(m, "LabeledDataset")
        .def_readonly("samples", &LabeledDataset::samples)
        .def_readonly("provenance", &LabeledDataset::provenance)
        .def_readonly("vocab", &LabeledDataset::vocab)
        .def("texts", &LabeledDataset::texts)
        .def("outcomes", &LabeledDataset::outcomes)
        .def("__len__", [](const LabeledDataset& ds) { return ds.samples.size(); });

    py::class_<ConfounderSpec>(m, "ConfounderSpec")
        .def_static("negation", [] { return ConfounderSpec{ConfounderSpec::Kind::Negation, 0.0, 0.0}; })
        .def_static(
            "latent_shift",
            [](double delta, double beta) { return ConfounderSpec{ConfounderSpec::Kind::LatentShift, delta, beta}; },
            py::arg("delta"), py::arg("beta"));

    m.def(
        "potential_outcome",
        [](const Population& pop, const Text& text, std::uint64_t seed) {
            Rng rng(seed);
            return potential_outcome(pop, text, rng);
        },
        py::arg("population"), py::arg("text"), py::arg("seed"));
    m.def("true_value", &true_value, py::arg("policy"), py::arg("population"));
    m.def(
        "run_experiment",
        [](const Population& pop, const Policy& assignment, int n, std::uint64_t seed) {
            Rng rng(seed);
            return run_experiment(pop, assignment, n, rng);
        },
        py::arg("population"), py::arg("assignment"), py::arg("n"), py::arg("seed"));
    m.def(
        "confound",
        [](const LabeledDataset& ds, const ConfounderSpec& spec, const Population& pop, std::uint64_t seed) {
            Rng rng(seed);
            return confound(ds, spec, pop, rng);
        },
        py::arg("dataset"), py::arg("spec"), py::arg("population"), py::arg("seed"));
    m.def("save_dataset", &save_dataset, py::arg("dataset"), py::arg("path"));
    m.def("load_dataset", &load_dataset, py::arg("path"));

    py::class_<OutcomeModel>(m, "OutcomeModel")
        .def(py::init([](std::vector<double> weights, int feature_order, Vocab vocab) {
                 OutcomeModel om;
                 om.weights = std::move(weights);
                 om.feature_order = feature_order;
                 om.vocab = vocab;
                 om.validate();
                 return om;
             }),
             py::arg("weights"), py::arg("feature_order"), py::arg("vocab"))
        .def_readwrite("weights", &OutcomeModel::weights)
        .def_readonly("feature_order", &OutcomeModel::feature_order)
        .def_readonly("ridge_lambda", &OutcomeModel::ridge_lambda)
        .def_readonly("train_mse", &OutcomeModel::train_mse)
        .def("predict", &OutcomeModel::predict, py::arg("text"));

    m.def("fit_outcome_model", &fit_outcome_model, py::arg("dataset"), py::arg("feature_order"),
          py::arg("ridge_lambda") = kDefaultRidgeLambda);
    m.def("save_outcome_model", &save_outcome_model, py::arg("model"), py::arg("path"));
    m.def("load_outcome_model", &load_outcome_model, py::arg("path"));

    py::class_<WeightOptions>(m, "WeightOptions")
        .def(py::init([](bool self_normalize, std::optional<double> clip_max) {
                 WeightOptions opts;
                 opts.self_normalize = self_normalize;
                 opts.clip_max = clip_max;
                 return opts;
             }),
             py::arg("self_normalize") = false, py::arg("clip_max") = std::nullopt)
        .def_readwrite("self_normalize", &WeightOptions::self_normalize)
        .def("describe", &WeightOptions::describe);

    py::class_<ValueEstimate>(m, "ValueEstimate")
        .def_readonly("estimator", &ValueEstimate::estimator)
        .def_readonly("value", &ValueEstimate::value)
        .def_readonly("per_sample", &ValueEstimate::per_sample)
        .def_readonly("per_sample_aux", &ValueEstimate::per_sample_aux)
        .def_readonly("std_error", &ValueEstimate::std_error)
        .def_readonly("stabilization", &ValueEstimate::stabilization)
        .def("__repr__", [](const ValueEstimate& est) {
            return "<ValueEstimate " + est.estimator + " value=" + std::to_string(est.value) + " se=" +
                   std::to_string(est.std_error) + ">";
        });

    m.def("stabilize", &stabilize, py::arg("log_ratios"), py::arg("options") = WeightOptions{});
    m.def("v_ipw", &v_ipw, py::arg("policy"), py::arg("dataset"), py::arg("pR"),
          py::arg("options") = WeightOptions{});
    m.def(
        "v_out",
        [](const Policy& policy, const Policy& f0, const OutcomeModel& ghat, int m_draws, std::uint64_t seed,
           const WeightOptions& opts) {
            Rng rng(seed);
            return v_out(policy, f0, ghat, m_draws, rng, opts);
        },
        py::arg("policy"), py::arg("f0"), py::arg("ghat"), py::arg("m"), py::arg("seed"),
        py::arg("options") = WeightOptions{});
    m.def(
        "v_dr",
        [](const Policy& policy, const LabeledDataset& ds, const Policy& pR, const OutcomeModel& ghat,
           const Policy& f0, int m_draws, std::uint64_t seed, const WeightOptions& opts) {
            Rng rng(seed);
            return v_dr(policy, ds, pR, ghat, f0, m_draws, rng, opts);
        },
        py::arg("policy"), py::arg("dataset"), py::arg("pR"), py::arg("ghat"), py::arg("f0"), py::arg("m"),
        py::arg("seed"), py::arg("options") = WeightOptions{});

    py::enum_<Objective>(m, "Objective")
        .value("CPO", Objective::CPO)
        .value("DRCPO", Objective::DRCPO)
        .value("OORLHF", Objective::OORLHF);

    py::class_<TrainConfig>(m, "TrainConfig")
        .def(py::init<>())
        .def_readwrite("objective", &TrainConfig::objective)
        .def_readwrite("steps", &TrainConfig::steps)
        .def_readwrite("batch", &TrainConfig::batch)
        .def_readwrite("learning_rate", &TrainConfig::learning_rate)
        .def_readwrite("adam_eps", &TrainConfig::adam_eps)
        .def_readwrite("use_adam", &TrainConfig::use_adam)
        .def_readwrite("weight_opts", &TrainConfig::weight_opts)
        .def_readwrite("m_per_step", &TrainConfig::m_per_step)
        .def_readwrite("kl_to_init_weight", &TrainConfig::kl_to_init_weight)
        .def_readwrite("seed", &TrainConfig::seed);

    py::class_<TraceRow>(m, "TraceRow")
        .def_readonly("step", &TraceRow::step)
        .def_readonly("estimate", &TraceRow::estimate)
        .def_readonly("true_value", &TraceRow::true_value)
        .def_readonly("grad_norm", &TraceRow::grad_norm);

    m.def(
        "train",
        [](const TrainConfig& cfg, const Policy& init, const LabeledDataset* ds, const Policy* pR,
           const OutcomeModel* ghat, const Policy* f0, const Population* pop_for_trace) {
            return train(cfg, init, make_inputs(ds, pR, ghat, f0), pop_for_trace);
        },
        py::arg("config"), py::arg("init"), py::arg("dataset") = nullptr, py::arg("pR") = nullptr,
        py::arg("ghat") = nullptr, py::arg("f0") = nullptr, py::arg("population_for_trace") = nullptr);
    m.def(
        "objective_gradient",
        [](const TrainConfig& cfg, const Policy& policy, const LabeledDataset* ds, const Policy* pR,
           const OutcomeModel* ghat, const Policy* f0, std::uint64_t seed) {
            Rng rng(seed);
            return objective_gradient(cfg, policy, make_inputs(ds, pR, ghat, f0), rng);
        },
        py::arg("config"), py::arg("policy"), py::arg("dataset") = nullptr, py::arg("pR") = nullptr,
        py::arg("ghat") = nullptr, py::arg("f0") = nullptr, py::arg("seed") = 0);

    py::class_<WinRateResult>(m, "WinRateResult")
        .def_readonly("wins", &WinRateResult::wins)
        .def_readonly("ties", &WinRateResult::ties)
        .def_readonly("total", &WinRateResult::total)
        .def_readonly("rate", &WinRateResult::rate)
        .def_readonly("ci_low", &WinRateResult::ci_low)
        .def_readonly("ci_high", &WinRateResult::ci_high);

    m.def(
        "win_rate",
        [](const Policy& a, const Policy& b, const Population& pop, int pairs, std::uint64_t seed) {
            Rng rng(seed);
            return win_rate(a, b, pop, pairs, rng);
        },
        py::arg("policy_a"), py::arg("policy_b"), py::arg("population"), py::arg("pairs"), py::arg("seed"));
    m.def(
        "confounding_impact",
        [](const std::string& method, const Policy& conf, const Policy& clean, const Population& pop, int pairs,
           std::uint64_t seed) {
            Rng rng(seed);
            return confounding_impact(method, conf, clean, pop, pairs, rng);
        },
        py::arg("method"), py::arg("trained_confounded"), py::arg("trained_clean"), py::arg("population"),
        py::arg("pairs"), py::arg("seed"));

    py::class_<ImpactResult>(m, "ImpactResult")
        .def_readonly("method", &ImpactResult::method)
        .def_readonly("impact", &ImpactResult::impact)
        .def_readonly("ci_low", &ImpactResult::ci_low)
        .def_readonly("ci_high", &ImpactResult::ci_high);
}
