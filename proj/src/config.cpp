#include "cpo/config.hpp"

#include <nlohmann/json.hpp>

#include <sstream>

#include "cpo/errors.hpp"
#include "cpo/io.hpp"
#include "cpo/rng.hpp"
#include "cpo/util.hpp"

namespace cpo {

using json = nlohmann::json;

namespace {

[[noreturn]] void fail_at(const std::string& origin, const std::string& path, const std::string& what) {
    throw ConfigError(origin + ": " + (path.empty() ? "" : "at " + path + ": ") + what);
}

// Reports json parse failures with a 1-based line:column derived from the
// parser's byte offset.
json parse_with_location(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        std::size_t line = 1, col = 1;
        const std::size_t stop = std::min(text.size(), e.byte > 0 ? e.byte - 1 : 0);
        for (std::size_t i = 0; i < stop; ++i) {
            if (text[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream msg;
        msg << origin << ":" << line << ":" << col << ": " << e.what();
        throw ConfigError(msg.str());
    }
}

template <typename T>
T get_field(const json& obj, const std::string& key, const T& fallback, const std::string& origin,
            const std::string& path) {
    if (!obj.contains(key)) return fallback;
    try {
        return obj.at(key).get<T>();
    } catch (const json::exception& e) {
        fail_at(origin, path + "/" + key, e.what());
    }
}

void parse_train_spec(const json& obj, TrainSpec& spec, const std::string& origin, const std::string& path) {
    spec.order = get_field(obj, "order", spec.order, origin, path);
    spec.mle_alpha = get_field(obj, "mle_alpha", spec.mle_alpha, origin, path);
    spec.steps = get_field(obj, "steps", spec.steps, origin, path);
    spec.batch = get_field(obj, "batch", spec.batch, origin, path);
    spec.learning_rate = get_field(obj, "learning_rate", spec.learning_rate, origin, path);
    if (obj.contains("adam_betas")) {
        const auto betas = get_field(obj, "adam_betas", std::vector<double>{}, origin, path);
        if (betas.size() != 2) fail_at(origin, path + "/adam_betas", "expected two values");
        spec.adam_betas = {betas[0], betas[1]};
    }
    spec.adam_eps = get_field(obj, "adam_eps", spec.adam_eps, origin, path);
    spec.use_adam = get_field(obj, "use_adam", spec.use_adam, origin, path);
    spec.m_per_step = get_field(obj, "m_per_step", spec.m_per_step, origin, path);
    spec.self_normalize = get_field(obj, "self_normalize", spec.self_normalize, origin, path);
    if (obj.contains("clip_max") && !obj.at("clip_max").is_null()) {
        spec.clip_max = get_field(obj, "clip_max", 0.0, origin, path);
    }
    spec.kl_to_init_weight = get_field(obj, "kl_to_init_weight", spec.kl_to_init_weight, origin, path);
    spec.use_estimated_pR = get_field(obj, "use_estimated_pR", spec.use_estimated_pR, origin, path);
    spec.pR_fit_samples = get_field(obj, "pR_fit_samples", spec.pR_fit_samples, origin, path);
    spec.pR_fit_alpha = get_field(obj, "pR_fit_alpha", spec.pR_fit_alpha, origin, path);
}

}  // namespace

TrainConfig TrainSpec::to_train_config(Objective objective, std::uint64_t seed) const {
    TrainConfig cfg;
    cfg.objective = objective;
    cfg.steps = steps;
    cfg.batch = batch;
    cfg.learning_rate = learning_rate;
    cfg.adam_betas = adam_betas;
    cfg.adam_eps = adam_eps;
    cfg.use_adam = use_adam;
    cfg.weight_opts.self_normalize = self_normalize;
    cfg.weight_opts.clip_max = clip_max;
    cfg.m_per_step = m_per_step;
    cfg.kl_to_init_weight = kl_to_init_weight;
    cfg.seed = seed;
    return cfg;
}

const TrainSpec& ExperimentConfig::train_for(const std::string& method) const {
    const auto it = train_overrides.find(method);
    return it == train_overrides.end() ? train : it->second;
}

Population ExperimentConfig::build_population() const {
    Population pop;
    pop.vocab = vocab;
    pop.noise_sd = population.noise_sd;
    if (population.values) {
        pop.g_weights = *population.values;
    } else {
        Rng rng(derive_seed(master_seed, seeds::kPopulationWeights));
        std::normal_distribution<double> dist(0.0, population.random_scale);
        pop.g_weights.assign(feature_dim(vocab, population.feature_order), 0.0);
        for (auto& w : pop.g_weights) w = dist(rng);
        pop.g_weights[0] = population.random_intercept;
    }
    pop.validate();
    return pop;
}

Policy ExperimentConfig::build_assignment() const {
    if (assignment.kind == "uniform") return Policy(vocab, 0);
    if (assignment.kind == "random_logits") {
        Rng rng(derive_seed(master_seed, seeds::kAssignmentInit));
        return Policy::random(vocab, assignment.order, assignment.logit_scale, rng);
    }
    if (assignment.kind == "token_logits") {
        if (assignment.token_logits.size() != static_cast<std::size_t>(vocab.size)) {
            throw ConfigError("assignment/token_logits must have one entry per vocab token");
        }
        Policy p(vocab, 0);
        for (int t = 0; t < vocab.seq_len; ++t) {
            const std::size_t off = p.row_offset(t, 0);
            for (int v = 0; v < vocab.size; ++v) {
                p.logits()[off + static_cast<std::size_t>(v)] = assignment.token_logits[static_cast<std::size_t>(v)];
            }
        }
        return p;
    }
    throw ConfigError("unknown assignment kind \"" + assignment.kind + "\"");
}

void ExperimentConfig::validate() const {
    vocab.validate();
    if (n < 1) throw ConfigError("n must be >= 1");
    if (m < 1) throw ConfigError("m must be >= 1");
    if (population.noise_sd < 0.0) throw ConfigError("population/noise_sd must be >= 0");
    if (population.feature_order != 1 && population.feature_order != 2) {
        throw ConfigError("population/feature_order must be 1 or 2");
    }
    if (population.values && population.values->size() != feature_dim(vocab, population.feature_order)) {
        throw ConfigError("population/g_weights dimension does not match vocab and feature_order");
    }
    if (outcome_model.source != "randomized" && outcome_model.source != "confounded") {
        throw ConfigError("outcome_model/source must be \"randomized\" or \"confounded\"");
    }
    if (outcome_model.fit_n < 1) throw ConfigError("outcome_model/fit_n must be >= 1");
    if (evaluation.pairs < 1) throw ConfigError("evaluation/pairs must be >= 1");
    if (evaluation.replicates < 2) throw ConfigError("evaluation/replicates must be >= 2");
    if (evaluation.ci != "normal" && evaluation.ci != "wilson") throw ConfigError("evaluation/ci must be normal|wilson");
    (void)build_assignment();
}

ExperimentConfig parse_experiment_config(const std::string& text, const std::string& origin) {
    const json root = parse_with_location(text, origin);
    if (!root.is_object()) fail_at(origin, "", "top level must be an object");

    ExperimentConfig cfg;
    cfg.master_seed = get_field(root, "master_seed", cfg.master_seed, origin, "");
    if (root.contains("vocab")) {
        const auto& v = root.at("vocab");
        cfg.vocab.size = get_field(v, "V", cfg.vocab.size, origin, "/vocab");
        cfg.vocab.seq_len = get_field(v, "L", cfg.vocab.seq_len, origin, "/vocab");
    }
    if (root.contains("population")) {
        const auto& p = root.at("population");
        cfg.population.feature_order = get_field(p, "feature_order", cfg.population.feature_order, origin, "/population");
        cfg.population.noise_sd = get_field(p, "noise_sd", cfg.population.noise_sd, origin, "/population");
        if (p.contains("g_weights")) {
            const auto& g = p.at("g_weights");
            if (g.is_array()) {
                cfg.population.values = g.get<std::vector<double>>();
            } else if (g.is_object() && g.contains("random")) {
                const auto& r = g.at("random");
                cfg.population.random_scale = get_field(r, "scale", cfg.population.random_scale, origin,
                                                        "/population/g_weights/random");
                cfg.population.random_intercept = get_field(r, "intercept", cfg.population.random_intercept, origin,
                                                            "/population/g_weights/random");
            } else {
                fail_at(origin, "/population/g_weights", "expected an array or {\"random\": {...}}");
            }
        }
    }
    if (root.contains("assignment")) {
        const auto& a = root.at("assignment");
        cfg.assignment.kind = get_field(a, "kind", cfg.assignment.kind, origin, "/assignment");
        cfg.assignment.order = get_field(a, "order", cfg.assignment.order, origin, "/assignment");
        cfg.assignment.logit_scale = get_field(a, "logit_scale", cfg.assignment.logit_scale, origin, "/assignment");
        cfg.assignment.token_logits = get_field(a, "token_logits", cfg.assignment.token_logits, origin, "/assignment");
    }
    cfg.n = get_field(root, "n", cfg.n, origin, "");
    cfg.m = get_field(root, "m", cfg.m, origin, "");
    if (root.contains("outcome_model")) {
        const auto& o = root.at("outcome_model");
        cfg.outcome_model.feature_order = get_field(o, "feature_order", cfg.outcome_model.feature_order, origin,
                                                    "/outcome_model");
        cfg.outcome_model.lambda = get_field(o, "lambda", cfg.outcome_model.lambda, origin, "/outcome_model");
        cfg.outcome_model.source = get_field(o, "source", cfg.outcome_model.source, origin, "/outcome_model");
        cfg.outcome_model.fit_n = get_field(o, "fit_n", cfg.outcome_model.fit_n, origin, "/outcome_model");
        if (o.contains("confounder")) {
            const auto& c = o.at("confounder");
            const auto kind = get_field(c, "kind", std::string("negation"), origin, "/outcome_model/confounder");
            if (kind == "negation") {
                cfg.outcome_model.confounder.kind = ConfounderSpec::Kind::Negation;
            } else if (kind == "latent_shift") {
                cfg.outcome_model.confounder.kind = ConfounderSpec::Kind::LatentShift;
                cfg.outcome_model.confounder.strength =
                    get_field(c, "delta", 1.0, origin, "/outcome_model/confounder");
                cfg.outcome_model.confounder.selection_bias =
                    get_field(c, "beta", 1.0, origin, "/outcome_model/confounder");
            } else {
                fail_at(origin, "/outcome_model/confounder/kind", "expected \"negation\" or \"latent_shift\"");
            }
        }
    }
    if (root.contains("train")) {
        parse_train_spec(root.at("train"), cfg.train, origin, "/train");
        if (root.at("train").contains("overrides")) {
            for (const auto& [method, obj] : root.at("train").at("overrides").items()) {
                TrainSpec spec = cfg.train;
                parse_train_spec(obj, spec, origin, "/train/overrides/" + method);
                cfg.train_overrides.emplace(method, spec);
            }
        }
    }
    if (root.contains("evaluation")) {
        const auto& e = root.at("evaluation");
        cfg.evaluation.pairs = get_field(e, "pairs", cfg.evaluation.pairs, origin, "/evaluation");
        cfg.evaluation.replicates = get_field(e, "replicates", cfg.evaluation.replicates, origin, "/evaluation");
        cfg.evaluation.ci = get_field(e, "ci", cfg.evaluation.ci, origin, "/evaluation");
        cfg.evaluation.plot_data = get_field(e, "plot_data", cfg.evaluation.plot_data, origin, "/evaluation");
    }
    cfg.validate();
    return cfg;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
    return parse_experiment_config(read_text_file(path), path.string());
}

std::string config_hash(const std::string& config_text) {
    const std::uint64_t h = fnv1a(config_text.data(), config_text.size());
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace cpo
