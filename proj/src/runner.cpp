#include "cpo/runner.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <array>
#include <cstdio>
#include <iostream>
#include <map>
#include <sstream>
#include <tuple>

#include "cpo/acceptance.hpp"
#include "cpo/errors.hpp"
#include "cpo/evaluation.hpp"
#include "cpo/io.hpp"
#include "cpo/outcome_model.hpp"
#include "cpo/rng.hpp"

namespace cpo {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

// Stable ids for policy variants; seeds and matrix order key off these, so
// evaluating a subset never changes the streams of the others.
const std::map<std::string, int>& policy_ids() {
    static const std::map<std::string, int> ids = {
        {"FT", 0},    {"CPO", 1},   {"CPO2", 2},        {"DRCPO", 3},
        {"DRCPO_confounded", 4},     {"OORLHF", 5},      {"OORLHF_confounded", 6},
    };
    return ids;
}

// Manifest: one entry per emitted file, keyed by path relative to the output
// directory. Rewritten whole on every command; keys sort deterministically.
class Manifest {
public:
    static Manifest load_or_create(const RunPaths& paths, const std::string& config_text,
                                   std::uint64_t master_seed) {
        Manifest m;
        m.path_ = paths.manifest();
        if (fs::exists(m.path_)) {
            m.root_ = json::parse(read_text_file(m.path_));
        } else {
            m.root_ = json::object();
            m.root_["entries"] = json::object();
        }
        m.root_["config_hash"] = config_hash(config_text);
        m.root_["master_seed"] = master_seed;
        return m;
    }

    void add(const RunPaths& paths, const fs::path& file, const std::string& command, json extra = json::object()) {
        json entry;
        entry["command"] = command;
        for (auto& [k, v] : extra.items()) entry[k] = v;
        root_["entries"][fs::relative(file, paths.out_dir).generic_string()] = entry;
    }

    void save() { write_text_file(path_, root_.dump(2) + "\n"); }

private:
    fs::path path_;
    json root_;
};

json dataset_summary(const LabeledDataset& ds) {
    json s;
    s["n"] = ds.samples.size();
    s["provenance"] = ds.provenance.kind == Provenance::Kind::Randomized ? "randomized" : "observational";
    s["descriptor"] = ds.provenance.descriptor;
    std::int64_t space = 0;
    try {
        space = ds.vocab.space_size();
    } catch (const EnumerationTooLarge&) {
        space = -1;
    }
    if (space > 0 && space <= 4096) {
        std::map<std::string, int> counts;
        for (const auto& sample : ds.samples) {
            std::string key;
            for (std::size_t i = 0; i < sample.text.size(); ++i) {
                if (i) key += ',';
                key += std::to_string(sample.text[i]);
            }
            ++counts[key];
        }
        json freq = json::object();
        for (const auto& [k, c] : counts) {
            freq[k] = static_cast<double>(c) / static_cast<double>(ds.samples.size());
        }
        s["text_frequencies"] = freq;
    }
    return s;
}

Policy estimated_density(const ExperimentConfig& cfg, const Policy& assignment) {
    const auto& spec = cfg.train;
    Rng rng(derive_seed(cfg.master_seed, seeds::kDensityFitData));
    std::vector<Text> sample;
    sample.reserve(static_cast<std::size_t>(spec.pR_fit_samples));
    for (int i = 0; i < spec.pR_fit_samples; ++i) sample.push_back(assignment.sample(rng));
    return mle_fit(sample, cfg.vocab, spec.order, spec.pR_fit_alpha);
}

struct LoadedArtifacts {
    Population pop;
    Policy assignment;
    LabeledDataset d_r;
    OutcomeModel ghat;
    bool has_ghat = false;
    OutcomeModel ghat_confounded;
    bool has_ghat_confounded = false;
};

LoadedArtifacts load_common(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths,
                            bool need_ghat, bool need_confounded) {
    LoadedArtifacts a{cfg.build_population(), cfg.build_assignment(), {}, {}, false, {}, false};
    if (!fs::exists(paths.dataset_r())) cmd_simulate(cfg, config_text, paths);
    a.d_r = load_dataset(paths.dataset_r());
    if (need_ghat || need_confounded) {
        if (!fs::exists(paths.outcome_model(false))) cmd_fit_outcome(cfg, config_text, paths);
        a.ghat = load_outcome_model(paths.outcome_model(false));
        a.has_ghat = true;
        if (need_confounded) {
            a.ghat_confounded = load_outcome_model(paths.outcome_model(true));
            a.has_ghat_confounded = true;
        }
    }
    return a;
}

std::string csv_num(double x) { return format_double(x); }

std::string win_rate_csv(const std::vector<std::tuple<std::string, std::string, WinRateResult>>& rows) {
    std::ostringstream out;
    out << "a,b,wins,ties,total,rate,ci_low,ci_high\n";
    for (const auto& [a, b, r] : rows) {
        out << a << "," << b << "," << r.wins << "," << r.ties << "," << r.total << "," << csv_num(r.rate) << ","
            << csv_num(r.ci_low) << "," << csv_num(r.ci_high) << "\n";
    }
    return out.str();
}

std::string reward_csv(const std::vector<RewardRow>& rows) {
    std::ostringstream out;
    out << "policy,v_dr,v_ipw,v_out,v_dr_raw,v_ipw_raw,v_out_raw,true_value\n";
    for (const auto& r : rows) {
        out << r.name << "," << csv_num(r.v_dr) << "," << csv_num(r.v_ipw) << "," << csv_num(r.v_out) << ","
            << csv_num(r.v_dr_raw) << "," << csv_num(r.v_ipw_raw) << "," << csv_num(r.v_out_raw) << ","
            << (r.truth ? csv_num(*r.truth) : "") << "\n";
    }
    return out.str();
}

std::string reward_text_table(const std::vector<RewardRow>& rows) {
    std::vector<std::array<std::string, 5>> cells;
    cells.push_back({"policy", "v_dr", "v_ipw", "v_out", "true_value"});
    char buf[64];
    auto fmt = [&](double x) {
        std::snprintf(buf, sizeof(buf), "%.6f", x);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        cells.push_back({r.name, fmt(r.v_dr), fmt(r.v_ipw), fmt(r.v_out), r.truth ? fmt(*r.truth) : "-"});
    }
    std::array<std::size_t, 5> width{};
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) width[c] = std::max(width[c], row[c].size());
    }
    std::ostringstream out;
    for (const auto& row : cells) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << row[c] << std::string(width[c] - row[c].size() + (c + 1 < row.size() ? 2 : 0), ' ');
        }
        out << "\n";
    }
    return out.str();
}

std::string impact_csv(const std::vector<ImpactResult>& impacts, int pairs) {
    std::ostringstream out;
    out << "method,impact,ci_low,ci_high,rate,pairs\n";
    for (const auto& r : impacts) {
        out << r.method << "," << csv_num(r.impact) << "," << csv_num(r.ci_low) << "," << csv_num(r.ci_high) << ","
            << csv_num(r.raw.rate) << "," << pairs << "\n";
    }
    return out.str();
}

std::string bias_variance_csv(const std::vector<BiasVarianceReport>& reports) {
    std::ostringstream out;
    out << "estimator,scenario,replicates,replicate_mean,true_value,bias,se_of_mean,replicate_variance\n";
    for (const auto& r : reports) {
        out << r.estimator << "," << r.scenario << "," << r.replicates << "," << csv_num(r.replicate_mean) << ","
            << csv_num(r.true_value) << "," << csv_num(r.bias) << "," << csv_num(r.se_of_mean) << ","
            << csv_num(r.replicate_variance) << "\n";
    }
    return out.str();
}

}  // namespace

const std::vector<std::string>& pipeline_policy_names() {
    static const std::vector<std::string> names = {"FT",    "CPO",    "CPO2",   "DRCPO", "DRCPO_confounded",
                                                   "OORLHF", "OORLHF_confounded"};
    return names;
}

void cmd_simulate(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths) {
    const Population pop = cfg.build_population();
    const Policy assignment = cfg.build_assignment();

    Rng rng_r = make_rng(cfg.master_seed, seeds::kSimulate);
    const auto d_r = run_experiment(pop, assignment, cfg.n, rng_r, cfg.assignment.kind);

    Rng rng_fit = make_rng(cfg.master_seed, seeds::kOutcomeFitData);
    const auto d_fit = run_experiment(pop, assignment, cfg.outcome_model.fit_n, rng_fit, cfg.assignment.kind);

    Rng rng_conf = make_rng(cfg.master_seed, seeds::kConfound);
    const auto d_o = confound(d_fit, cfg.outcome_model.confounder, pop, rng_conf);

    save_dataset(d_r, paths.dataset_r());
    save_dataset(d_fit, paths.dataset_fit());
    save_dataset(d_o, paths.dataset_o(cfg.outcome_model.confounder.descriptor()));

    auto manifest = Manifest::load_or_create(paths, config_text, cfg.master_seed);
    manifest.add(paths, paths.dataset_r(), "simulate",
                 json{{"seed_purpose", seeds::kSimulate}, {"summary", dataset_summary(d_r)}});
    manifest.add(paths, paths.dataset_fit(), "simulate",
                 json{{"seed_purpose", seeds::kOutcomeFitData}, {"summary", dataset_summary(d_fit)}});
    manifest.add(paths, paths.dataset_o(cfg.outcome_model.confounder.descriptor()), "simulate",
                 json{{"seed_purpose", seeds::kConfound}, {"summary", dataset_summary(d_o)}});
    manifest.save();
}

void cmd_fit_outcome(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths) {
    if (!fs::exists(paths.dataset_fit())) cmd_simulate(cfg, config_text, paths);
    const auto d_fit = load_dataset(paths.dataset_fit());
    const auto d_o = load_dataset(paths.dataset_o(cfg.outcome_model.confounder.descriptor()));

    const auto ghat = fit_outcome_model(d_fit, cfg.outcome_model.feature_order, cfg.outcome_model.lambda);
    const auto ghat_conf = fit_outcome_model(d_o, cfg.outcome_model.feature_order, cfg.outcome_model.lambda);
    save_outcome_model(ghat, paths.outcome_model(false));
    save_outcome_model(ghat_conf, paths.outcome_model(true));

    auto manifest = Manifest::load_or_create(paths, config_text, cfg.master_seed);
    manifest.add(paths, paths.outcome_model(false), "fit-outcome",
                 json{{"source", "d_fit.jsonl"}, {"train_mse", ghat.train_mse}});
    manifest.add(paths, paths.outcome_model(true), "fit-outcome",
                 json{{"source", "d_o_" + cfg.outcome_model.confounder.descriptor() + ".jsonl"},
                      {"train_mse", ghat_conf.train_mse}});
    manifest.save();
}

void cmd_train(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths,
               const std::string& method, const std::string& variant) {
    if (method != "FT" && method != "CPO" && method != "DRCPO" && method != "OORLHF") {
        throw ConfigError("unknown method \"" + method + "\" (expected FT, CPO, DRCPO, or OORLHF)");
    }
    const bool confounded = variant == "confounded";
    const std::string name = method + (variant.empty() ? "" : (variant == "2" ? "2" : "_" + variant));
    if (policy_ids().find(name) == policy_ids().end()) {
        throw ConfigError("unsupported method/variant combination \"" + name + "\"");
    }
    const TrainSpec& spec = cfg.train_for(method);
    auto manifest = Manifest::load_or_create(paths, config_text, cfg.master_seed);

    const bool needs_model = method == "DRCPO" || method == "OORLHF";
    auto artifacts = load_common(cfg, config_text, paths, needs_model, needs_model && confounded);

    // FT baseline: closed-form fit on the randomized texts; also the init and
    // reference policy for every optimized method.
    const auto ft = mle_fit(artifacts.d_r.texts(), cfg.vocab, spec.order, spec.mle_alpha);
    if (method == "FT") {
        save_policy(ft, paths.policy("FT"));
        manifest.add(paths, paths.policy("FT"), "train FT",
                     json{{"order", spec.order}, {"alpha", spec.mle_alpha}});
        manifest.save();
        return;
    }
    if (!fs::exists(paths.policy("FT"))) {
        save_policy(ft, paths.policy("FT"));
        manifest.add(paths, paths.policy("FT"), "train FT", json{{"order", spec.order}, {"alpha", spec.mle_alpha}});
    }

    std::uint64_t purpose = method == "CPO"     ? seeds::kTrainCPO
                            : method == "DRCPO" ? seeds::kTrainDRCPO
                                                : seeds::kTrainOORLHF;
    const std::uint64_t variant_index = variant.empty() ? 0 : (variant == "2" ? 1 : 2);
    const std::uint64_t seed = derive_seed(cfg.master_seed, purpose, variant_index);

    const Policy density = spec.use_estimated_pR ? estimated_density(cfg, artifacts.assignment)
                                                 : artifacts.assignment;
    TrainInputs inputs;
    inputs.ds = &artifacts.d_r;
    inputs.pR = &density;
    inputs.f0 = &ft;
    if (needs_model) inputs.ghat = confounded ? &artifacts.ghat_confounded : &artifacts.ghat;

    const TrainConfig train_cfg = spec.to_train_config(objective_from_name(method), seed);
    auto [policy, trace] = train(train_cfg, ft, inputs, &artifacts.pop);

    save_policy(policy, paths.policy(name));
    save_train_trace(trace, paths.trace(name));
    manifest.add(paths, paths.policy(name), "train " + name,
                 json{{"seed", seed},
                      {"objective", method},
                      {"outcome_model", needs_model ? (confounded ? "ghat_confounded.txt" : "ghat.txt") : ""},
                      {"density", spec.use_estimated_pR ? "estimated" : "true"}});
    manifest.add(paths, paths.trace(name), "train " + name, json{{"seed", seed}});
    manifest.save();
}

void cmd_evaluate(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths) {
    const Population pop = cfg.build_population();
    const Policy assignment = cfg.build_assignment();
    const CiMethod ci = cfg.evaluation.ci == "wilson" ? CiMethod::Wilson : CiMethod::Normal;

    std::vector<std::pair<std::string, Policy>> loaded;
    for (const auto& name : pipeline_policy_names()) {
        if (fs::exists(paths.policy(name))) loaded.emplace_back(name, load_policy(paths.policy(name)));
    }
    if (loaded.empty()) {
        throw MissingArtifact("no trained policies in " + paths.out_dir.string() +
                              "; run `cpo train --config <config> --out-dir <dir> --method <FT|CPO|DRCPO|OORLHF>`");
    }
    if (!fs::exists(paths.dataset_r()) || !fs::exists(paths.outcome_model(false))) {
        throw MissingArtifact("datasets or outcome model missing in " + paths.out_dir.string() +
                              "; run `cpo simulate` and `cpo fit-outcome` first");
    }
    const auto d_r = load_dataset(paths.dataset_r());
    const auto ghat = load_outcome_model(paths.outcome_model(false));
    const Policy density =
        cfg.train.use_estimated_pR ? estimated_density(cfg, assignment) : assignment;
    const Policy* f0 = nullptr;
    for (const auto& [name, p] : loaded) {
        if (name == "FT") f0 = &p;
    }
    if (!f0) {
        throw MissingArtifact("FT policy missing in " + paths.out_dir.string() +
                              "; run `cpo train --method FT` first (it is the reference policy)");
    }

    // Win-rate matrix, every ordered pair including self-comparisons.
    std::vector<std::tuple<std::string, std::string, WinRateResult>> wr_rows;
    for (const auto& [name_a, pa] : loaded) {
        for (const auto& [name_b, pb] : loaded) {
            const auto idx = static_cast<std::uint64_t>(policy_ids().at(name_a) * 16 + policy_ids().at(name_b));
            Rng rng = make_rng(cfg.master_seed, seeds::kWinRate, idx);
            wr_rows.emplace_back(name_a, name_b, win_rate(pa, pb, pop, cfg.evaluation.pairs, rng, ci));
        }
    }

    std::vector<std::pair<std::string, const Policy*>> table_policies;
    for (const auto& [name, p] : loaded) table_policies.emplace_back(name, &p);
    const WeightOptions stabilized{true, std::nullopt};
    const auto rewards = reward_table(table_policies, d_r, density, ghat, *f0, cfg.m, stabilized,
                                      derive_seed(cfg.master_seed, seeds::kRewardTable), &pop);

    std::vector<ImpactResult> impacts;
    auto find_policy = [&](const std::string& name) -> const Policy* {
        for (const auto& [n, p] : loaded) {
            if (n == name) return &p;
        }
        return nullptr;
    };
    const std::vector<std::tuple<std::string, std::string, std::string>> impact_specs = {
        {"OORLHF", "OORLHF_confounded", "OORLHF"},
        {"DRCPO", "DRCPO_confounded", "DRCPO"},
        {"CPO", "CPO2", "CPO"},  // clean vs clean-reseeded: the null comparison
    };
    std::uint64_t impact_idx = 0;
    for (const auto& [clean_name, other_name, label] : impact_specs) {
        const Policy* clean = find_policy(clean_name);
        const Policy* other = find_policy(other_name);
        ++impact_idx;
        if (!clean || !other) continue;
        Rng rng = make_rng(cfg.master_seed, seeds::kConfoundingImpact, impact_idx);
        impacts.push_back(confounding_impact(label, *other, *clean, pop, cfg.evaluation.pairs, rng, ci));
    }

    write_text_file(paths.results("win_rates.csv"), win_rate_csv(wr_rows));
    write_text_file(paths.results("reward_table.csv"), reward_csv(rewards));
    write_text_file(paths.results("reward_table.txt"), reward_text_table(rewards));
    write_text_file(paths.results("confounding_impact.csv"), impact_csv(impacts, cfg.evaluation.pairs));

    auto manifest = Manifest::load_or_create(paths, config_text, cfg.master_seed);
    manifest.add(paths, paths.results("win_rates.csv"), "evaluate",
                 json{{"seed_purpose", seeds::kWinRate}, {"pairs", cfg.evaluation.pairs}});
    manifest.add(paths, paths.results("reward_table.csv"), "evaluate",
                 json{{"seed_purpose", seeds::kRewardTable}, {"m", cfg.m}});
    manifest.add(paths, paths.results("reward_table.txt"), "evaluate", json{{"seed_purpose", seeds::kRewardTable}});
    manifest.add(paths, paths.results("confounding_impact.csv"), "evaluate",
                 json{{"seed_purpose", seeds::kConfoundingImpact}});

    if (cfg.evaluation.plot_data) {
        std::ostringstream wr_plot;
        wr_plot << "x,y\n";
        for (std::size_t i = 0; i < wr_rows.size(); ++i) {
            wr_plot << i << "," << csv_num(std::get<2>(wr_rows[i]).rate) << "\n";
        }
        write_text_file(paths.results("win_rates_plot.csv"), wr_plot.str());
        std::ostringstream im_plot;
        im_plot << "x,y\n";
        for (std::size_t i = 0; i < impacts.size(); ++i) im_plot << i << "," << csv_num(impacts[i].impact) << "\n";
        write_text_file(paths.results("impact_plot.csv"), im_plot.str());
        manifest.add(paths, paths.results("win_rates_plot.csv"), "evaluate", json{});
        manifest.add(paths, paths.results("impact_plot.csv"), "evaluate", json{});
    }
    manifest.save();
}

int cmd_reproduce_all(const ExperimentConfig& cfg, const std::string& config_text, const RunPaths& paths,
                      int threads) {
    std::vector<std::string> step_errors;
    auto attempt = [&](const std::string& what, auto&& fn) {
        try {
            fn();
            return true;
        } catch (const std::exception& e) {
            step_errors.push_back(what + ": " + e.what());
            std::cerr << "[cpo] " << what << " failed: " << e.what() << "\n";
            return false;
        }
    };

    attempt("simulate", [&] { cmd_simulate(cfg, config_text, paths); });
    attempt("fit-outcome", [&] { cmd_fit_outcome(cfg, config_text, paths); });
    attempt("train FT", [&] { cmd_train(cfg, config_text, paths, "FT"); });
    attempt("train CPO", [&] { cmd_train(cfg, config_text, paths, "CPO"); });
    attempt("train CPO2", [&] { cmd_train(cfg, config_text, paths, "CPO", "2"); });
    attempt("train DRCPO", [&] { cmd_train(cfg, config_text, paths, "DRCPO"); });
    attempt("train DRCPO confounded", [&] { cmd_train(cfg, config_text, paths, "DRCPO", "confounded"); });
    attempt("train OORLHF", [&] { cmd_train(cfg, config_text, paths, "OORLHF"); });
    attempt("train OORLHF confounded", [&] { cmd_train(cfg, config_text, paths, "OORLHF", "confounded"); });
    attempt("evaluate", [&] { cmd_evaluate(cfg, config_text, paths); });

    AcceptanceOptions opts;
    opts.master_seed = cfg.master_seed;
    opts.threads = threads;
    opts.work_dir = paths.out_dir / "scratch";
    AcceptanceOutcome outcome;
    const bool acceptance_ran = attempt("acceptance", [&] { outcome = run_acceptance(opts); });

    std::ostringstream report;
    report << "# Reproduction report\n\n";
    report << "- config hash: " << config_hash(config_text) << "\n";
    report << "- master seed: " << cfg.master_seed << "\n\n";
    report << "## Acceptance criteria\n\n";
    int failed = 0;
    for (const auto& c : outcome.criteria) {
        if (!c.pass) ++failed;
        report << format_criterion(c) << "\n";
        std::cout << format_criterion(c) << "\n";
    }
    if (!acceptance_ran) {
        report << "acceptance suite aborted; see step failures\n";
        ++failed;
    }
    report << "\n## Step failures\n\n";
    if (step_errors.empty()) {
        report << "none\n";
    } else {
        for (const auto& e : step_errors) report << "- " << e << "\n";
    }

    write_text_file(paths.results("bias_variance.csv"), bias_variance_csv(outcome.reports));
    write_text_file(paths.results("report.md"), report.str());

    auto manifest = Manifest::load_or_create(paths, config_text, cfg.master_seed);
    manifest.add(paths, paths.results("bias_variance.csv"), "reproduce-all",
                 json{{"seed_purpose", seeds::kBiasVariance}});
    manifest.add(paths, paths.results("report.md"), "reproduce-all", json{{"failed_criteria", failed}});
    manifest.save();
    return failed + static_cast<int>(step_errors.size());
}

}  // namespace cpo
