#include <doctest.h>

#include <nlohmann/json.hpp>

#include <algorithm>
#include <filesystem>
#include <map>
#include <sstream>
#include <unistd.h>

#include "cpo/config.hpp"
#include "cpo/io.hpp"
#include "cpo/runner.hpp"

using namespace cpo;
namespace fs = std::filesystem;

namespace {

const std::string kTinyConfig = R"({
    "master_seed": 21,
    "vocab": {"V": 2, "L": 2},
    "population": {
        "g_weights": [0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.0],
        "noise_sd": 0.5
    },
    "assignment": {"kind": "uniform"},
    "n": 10000,
    "m": 1000,
    "outcome_model": {"feature_order": 2, "lambda": 1e-6, "fit_n": 200, "confounder": {"kind": "negation"}},
    "train": {"order": 1, "steps": 40, "batch": 32, "m_per_step": 32},
    "evaluation": {"pairs": 100, "replicates": 5}
})";

struct TempRun {
    fs::path dir;
    RunPaths paths;
    ExperimentConfig cfg;

    explicit TempRun(const std::string& name, const std::string& config = kTinyConfig)
        : dir(fs::temp_directory_path() / ("cpo-runner-" + name + "-" + std::to_string(::getpid()))),
          paths{dir},
          cfg(parse_experiment_config(config)) {
        fs::remove_all(dir);
    }
    ~TempRun() { fs::remove_all(dir); }
};

std::map<std::string, std::string> snapshot(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& entry : fs::recursive_directory_iterator(dir)) {
        if (entry.is_regular_file()) {
            files[fs::relative(entry.path(), dir).generic_string()] = read_text_file(entry.path());
        }
    }
    return files;
}

}  // namespace

TEST_CASE("simulate writes paired datasets with exact negation") {
    TempRun run("simulate");
    cmd_simulate(run.cfg, kTinyConfig, run.paths);
    CHECK(fs::exists(run.paths.dataset_r()));
    const auto d_fit = load_dataset(run.paths.dataset_fit());
    const auto d_o = load_dataset(run.paths.dataset_o("negation"));
    REQUIRE(d_fit.samples.size() == d_o.samples.size());
    for (std::size_t i = 0; i < d_fit.samples.size(); ++i) {
        CHECK(d_o.samples[i].text == d_fit.samples[i].text);
        CHECK(d_o.samples[i].outcome == -d_fit.samples[i].outcome);
    }
    CHECK(d_o.provenance.kind == Provenance::Kind::Observational);
}

TEST_CASE("simulate is byte-deterministic") {
    TempRun a("det-a"), b("det-b");
    cmd_simulate(a.cfg, kTinyConfig, a.paths);
    cmd_simulate(b.cfg, kTinyConfig, b.paths);
    CHECK(snapshot(a.dir) == snapshot(b.dir));
}

TEST_CASE("manifest frequencies of a uniform assignment respect binomial bounds") {
    TempRun run("freq");
    cmd_simulate(run.cfg, kTinyConfig, run.paths);
    const auto manifest = nlohmann::json::parse(read_text_file(run.paths.manifest()));
    const auto& freq = manifest.at("entries").at("datasets/d_r.jsonl").at("summary").at("text_frequencies");
    REQUIRE(freq.size() == 4);
    // n = 10000, p = 1/4: 99% binomial band.
    const double half = 2.576 * std::sqrt(0.25 * 0.75 / 10000.0);
    for (const auto& [key, value] : freq.items()) {
        CHECK(value.get<double>() > 0.25 - half);
        CHECK(value.get<double>() < 0.25 + half);
    }
}

TEST_CASE("every emitted file has a manifest entry") {
    TempRun run("manifest");
    cmd_simulate(run.cfg, kTinyConfig, run.paths);
    cmd_fit_outcome(run.cfg, kTinyConfig, run.paths);
    cmd_train(run.cfg, kTinyConfig, run.paths, "FT");
    cmd_train(run.cfg, kTinyConfig, run.paths, "CPO");
    cmd_evaluate(run.cfg, kTinyConfig, run.paths);
    const auto manifest = nlohmann::json::parse(read_text_file(run.paths.manifest()));
    for (const auto& [rel, contents] : snapshot(run.dir)) {
        if (rel == "manifest.json") continue;
        CHECK_MESSAGE(manifest.at("entries").contains(rel), ("missing manifest entry for " + rel));
    }
    CHECK(manifest.at("config_hash") == config_hash(kTinyConfig));
}

TEST_CASE("FT training equals a direct mle fit") {
    TempRun run("ft");
    cmd_train(run.cfg, kTinyConfig, run.paths, "FT");  // auto-builds datasets
    const auto ft = load_policy(run.paths.policy("FT"));
    const auto d_r = load_dataset(run.paths.dataset_r());
    const auto direct = mle_fit(d_r.texts(), run.cfg.vocab, run.cfg.train.order, run.cfg.train.mle_alpha);
    CHECK(ft == direct);
}

TEST_CASE("zero learning rate training reproduces the FT policy file") {
    const std::string config = R"({
        "master_seed": 22,
        "vocab": {"V": 2, "L": 2},
        "population": {"g_weights": [0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.0], "noise_sd": 0.5},
        "n": 300, "m": 500,
        "outcome_model": {"fit_n": 100},
        "train": {"steps": 15, "batch": 16, "m_per_step": 16, "learning_rate": 0.0},
        "evaluation": {"pairs": 50, "replicates": 5}
    })";
    TempRun run("lr0", config);
    cmd_train(run.cfg, config, run.paths, "CPO");
    CHECK(load_policy(run.paths.policy("CPO")) == load_policy(run.paths.policy("FT")));
}

TEST_CASE("evaluate with one method emits the self-comparison only") {
    TempRun run("single");
    cmd_train(run.cfg, kTinyConfig, run.paths, "FT");
    cmd_fit_outcome(run.cfg, kTinyConfig, run.paths);
    cmd_evaluate(run.cfg, kTinyConfig, run.paths);
    const auto csv = read_text_file(run.paths.results("win_rates.csv"));
    // header + exactly one row
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 2);
    CHECK(csv.find("FT,FT,") != std::string::npos);
    const auto impact = read_text_file(run.paths.results("confounding_impact.csv"));
    CHECK(std::count(impact.begin(), impact.end(), '\n') == 1);  // header only
}

TEST_CASE("evaluate without artifacts reports what to run") {
    TempRun run("missing");
    try {
        cmd_evaluate(run.cfg, kTinyConfig, run.paths);
        FAIL("expected MissingArtifact");
    } catch (const MissingArtifact& e) {
        CHECK(std::string(e.what()).find("cpo train") != std::string::npos);
    }
}

TEST_CASE("full tiny pipeline reruns byte-identically") {
    const std::string config = R"({
        "master_seed": 23,
        "vocab": {"V": 2, "L": 2},
        "population": {"g_weights": [0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.0], "noise_sd": 0.5},
        "n": 200, "m": 400,
        "outcome_model": {"fit_n": 100},
        "train": {"steps": 12, "batch": 16, "m_per_step": 16},
        "evaluation": {"pairs": 60, "replicates": 5}
    })";
    auto pipeline = [&](TempRun& run) {
        cmd_simulate(run.cfg, config, run.paths);
        cmd_fit_outcome(run.cfg, config, run.paths);
        for (const char* method : {"FT", "CPO", "DRCPO", "OORLHF"}) {
            cmd_train(run.cfg, config, run.paths, method);
        }
        cmd_train(run.cfg, config, run.paths, "CPO", "2");
        cmd_train(run.cfg, config, run.paths, "DRCPO", "confounded");
        cmd_evaluate(run.cfg, config, run.paths);
    };
    TempRun a("pipe-a", config), b("pipe-b", config);
    pipeline(a);
    pipeline(b);
    const auto sa = snapshot(a.dir), sb = snapshot(b.dir);
    CHECK(sa.size() == sb.size());
    CHECK(sa == sb);
    CHECK(sa.count("results/reward_table.csv") == 1);
    CHECK(sa.count("results/confounding_impact.csv") == 1);
    CHECK(sa.count("traces/trace_CPO.csv") == 1);
}

TEST_CASE("unknown methods are rejected") {
    TempRun run("badmethod");
    CHECK_THROWS_AS(cmd_train(run.cfg, kTinyConfig, run.paths, "PPO"), ConfigError);
    CHECK_THROWS_AS(cmd_train(run.cfg, kTinyConfig, run.paths, "OORLHF", "2"), ConfigError);
}

TEST_CASE("two-text pipeline: cpo converges and beats ft on the oracle judge") {
    const std::string config = R"({
        "master_seed": 29,
        "vocab": {"V": 2, "L": 1},
        "population": {"g_weights": [0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0], "noise_sd": 0.0},
        "assignment": {"kind": "uniform"},
        "n": 500, "m": 2000,
        "outcome_model": {"fit_n": 200},
        "train": {"order": 1, "steps": 2000, "batch": 64, "m_per_step": 64,
                  "learning_rate": 0.05, "use_adam": false, "self_normalize": true},
        "evaluation": {"pairs": 2000, "replicates": 5}
    })";
    TempRun run("twotext", config);
    cmd_train(run.cfg, config, run.paths, "CPO");
    cmd_fit_outcome(run.cfg, config, run.paths);
    cmd_evaluate(run.cfg, config, run.paths);

    const auto trace = read_text_file(run.paths.trace("CPO"));
    // last row: step,estimate,true_value,grad_norm
    const auto last = trace.substr(trace.rfind('\n', trace.size() - 2) + 1);
    std::stringstream row(last);
    std::string step, estimate, true_value_str;
    std::getline(row, step, ',');
    std::getline(row, estimate, ',');
    std::getline(row, true_value_str, ',');
    CHECK(std::stod(true_value_str) >= 0.99);

    const auto pop = run.cfg.build_population();
    CHECK(true_value(load_policy(run.paths.policy("CPO")), pop) >= 0.99);

    // win-rate matrix row CPO vs FT must be significant
    const auto csv = read_text_file(run.paths.results("win_rates.csv"));
    std::stringstream lines(csv);
    std::string line;
    bool found = false;
    while (std::getline(lines, line)) {
        if (line.rfind("CPO,FT,", 0) == 0) {
            found = true;
            std::stringstream cells(line);
            std::string cell;
            for (int i = 0; i < 7; ++i) std::getline(cells, cell, ',');  // ci_low is column 7
            CHECK(std::stod(cell) > 0.5);
        }
    }
    CHECK(found);
}

TEST_CASE("estimated density path trains and evaluates") {
    const std::string config = R"({
        "master_seed": 31,
        "vocab": {"V": 2, "L": 2},
        "population": {"g_weights": [0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.0], "noise_sd": 0.5},
        "n": 400, "m": 500,
        "outcome_model": {"fit_n": 150},
        "train": {"steps": 15, "batch": 32, "m_per_step": 32,
                  "use_estimated_pR": true, "pR_fit_samples": 60, "pR_fit_alpha": 1.0},
        "evaluation": {"pairs": 60, "replicates": 5}
    })";
    TempRun run("estpr", config);
    cmd_train(run.cfg, config, run.paths, "CPO");
    cmd_fit_outcome(run.cfg, config, run.paths);
    CHECK_NOTHROW(cmd_evaluate(run.cfg, config, run.paths));
    const auto manifest = nlohmann::json::parse(read_text_file(run.paths.manifest()));
    CHECK(manifest.at("entries").at("models/policy_CPO.txt").at("density") == "estimated");
}

TEST_CASE("latent shift confounder flows through the pipeline") {
    const std::string config = R"({
        "master_seed": 37,
        "vocab": {"V": 2, "L": 2},
        "population": {"g_weights": [0.0, -0.5, 0.5, 0.0, 0.0, 0.0, 0.0], "noise_sd": 0.5},
        "n": 200, "m": 300,
        "outcome_model": {"fit_n": 400, "confounder": {"kind": "latent_shift", "delta": 1.5, "beta": 1.0}},
        "train": {"steps": 10, "batch": 16, "m_per_step": 16},
        "evaluation": {"pairs": 40, "replicates": 5}
    })";
    TempRun run("latent", config);
    cmd_simulate(run.cfg, config, run.paths);
    CHECK(fs::exists(run.paths.dataset_o("latent-shift")));
    const auto d_o = load_dataset(run.paths.dataset_o("latent-shift"));
    CHECK(d_o.provenance.kind == Provenance::Kind::Observational);
    CHECK(d_o.provenance.descriptor == "latent-shift");
    CHECK_NOTHROW(cmd_fit_outcome(run.cfg, config, run.paths));
    CHECK(fs::exists(run.paths.outcome_model(true)));
}
