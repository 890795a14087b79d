#include "cpo/io.hpp"

#include <nlohmann/json.hpp>

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cpo/errors.hpp"

namespace cpo {

using json = nlohmann::ordered_json;

namespace {

std::string hex_double(double x) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%a", x);
    return buf;
}

double parse_hex_double(const std::string& s, const std::filesystem::path& path) {
    char* end = nullptr;
    const double x = std::strtod(s.c_str(), &end);
    if (end == s.c_str()) throw IoError("bad float \"" + s + "\" in " + path.string());
    return x;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path.string());
    return in;
}

std::ofstream open_out(const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    return out;
}

}  // namespace

std::string format_double(double x) {
    return json(x).dump();
}

void save_policy(const Policy& policy, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "cpo-policy 1\n";
    out << "vocab " << policy.vocab().size << " " << policy.vocab().seq_len << "\n";
    out << "order " << policy.order() << "\n";
    out << "params " << policy.num_params() << "\n";
    const auto logits = policy.logits();
    for (int t = 0; t < policy.vocab().seq_len; ++t) {
        for (std::size_t c = 0; c < policy.num_contexts(t); ++c) {
            const std::size_t off = policy.row_offset(t, c);
            for (int v = 0; v < policy.vocab().size; ++v) {
                out << t << " " << c << " " << v << " " << hex_double(logits[off + static_cast<std::size_t>(v)])
                    << "\n";
            }
        }
    }
    if (!out) throw IoError("write failed: " + path.string());
}

Policy load_policy(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "cpo-policy" || version != 1) throw IoError("not a policy file: " + path.string());
    std::string key;
    Vocab vocab;
    int order = 0;
    std::size_t params = 0;
    in >> key >> vocab.size >> vocab.seq_len;
    if (key != "vocab") throw IoError("malformed policy file: " + path.string());
    in >> key >> order;
    if (key != "order") throw IoError("malformed policy file: " + path.string());
    in >> key >> params;
    if (key != "params") throw IoError("malformed policy file: " + path.string());

    Policy policy(vocab, order);
    if (policy.num_params() != params) throw IoError("policy parameter count mismatch in " + path.string());
    auto logits = policy.logits();
    int t = 0, v = 0;
    std::size_t c = 0;
    std::string value;
    for (std::size_t i = 0; i < params; ++i) {
        if (!(in >> t >> c >> v >> value)) throw IoError("truncated policy file: " + path.string());
        logits[policy.row_offset(t, c) + static_cast<std::size_t>(v)] = parse_hex_double(value, path);
    }
    policy.validate();
    return policy;
}

void save_outcome_model(const OutcomeModel& model, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "cpo-outcome-model 1\n";
    out << "vocab " << model.vocab.size << " " << model.vocab.seq_len << "\n";
    out << "feature_order " << model.feature_order << "\n";
    out << "lambda " << hex_double(model.ridge_lambda) << "\n";
    out << "train_mse " << hex_double(model.train_mse) << "\n";
    out << "weights " << model.weights.size() << "\n";
    for (double w : model.weights) out << hex_double(w) << "\n";
    if (!out) throw IoError("write failed: " + path.string());
}

OutcomeModel load_outcome_model(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != "cpo-outcome-model" || version != 1) throw IoError("not an outcome model file: " + path.string());
    OutcomeModel m;
    std::string key, value;
    std::size_t count = 0;
    in >> key >> m.vocab.size >> m.vocab.seq_len;
    in >> key >> m.feature_order;
    in >> key >> value;
    m.ridge_lambda = parse_hex_double(value, path);
    in >> key >> value;
    m.train_mse = parse_hex_double(value, path);
    in >> key >> count;
    m.weights.resize(count);
    for (auto& w : m.weights) {
        if (!(in >> value)) throw IoError("truncated outcome model file: " + path.string());
        w = parse_hex_double(value, path);
    }
    m.validate();
    return m;
}

void save_dataset(const LabeledDataset& ds, const std::filesystem::path& path) {
    auto out = open_out(path);
    json header;
    header["type"] = "header";
    header["vocab"] = {{"V", ds.vocab.size}, {"L", ds.vocab.seq_len}};
    header["provenance"] = {
        {"kind", ds.provenance.kind == Provenance::Kind::Randomized ? "randomized" : "observational"},
        {"descriptor", ds.provenance.descriptor},
    };
    out << header.dump() << "\n";
    for (const auto& s : ds.samples) {
        json row;
        row["tokens"] = s.text;
        row["outcome"] = s.outcome;
        out << row.dump() << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

LabeledDataset load_dataset(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::string line;
    if (!std::getline(in, line)) throw IoError("empty dataset file: " + path.string());
    json header = json::parse(line);
    if (header.value("type", "") != "header") throw IoError("dataset missing header line: " + path.string());
    LabeledDataset ds;
    ds.vocab.size = header.at("vocab").at("V").get<int>();
    ds.vocab.seq_len = header.at("vocab").at("L").get<int>();
    const auto kind = header.at("provenance").at("kind").get<std::string>();
    ds.provenance.kind = kind == "randomized" ? Provenance::Kind::Randomized : Provenance::Kind::Observational;
    ds.provenance.descriptor = header.at("provenance").at("descriptor").get<std::string>();
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        json row = json::parse(line);
        Sample s;
        s.text = row.at("tokens").get<Text>();
        s.outcome = row.at("outcome").get<double>();
        require_text_valid(s.text, ds.vocab);
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw IoError("dataset has no samples: " + path.string());
    return ds;
}

std::string value_estimate_csv_header() {
    return "estimator,value,std_error,n,m,stabilization";
}

std::string value_estimate_csv_row(const ValueEstimate& est) {
    std::ostringstream out;
    out << est.estimator << "," << format_double(est.value) << "," << format_double(est.std_error) << "," << est.n()
        << "," << est.m() << "," << est.stabilization;
    return out.str();
}

void save_train_trace(const TrainTrace& trace, const std::filesystem::path& path) {
    auto out = open_out(path);
    out << "step,estimate,true_value,grad_norm\n";
    for (const auto& row : trace) {
        out << row.step << "," << format_double(row.estimate) << ","
            << (row.true_value ? format_double(*row.true_value) : "") << "," << format_double(row.grad_norm) << "\n";
    }
    if (!out) throw IoError("write failed: " + path.string());
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
    auto out = open_out(path);
    out << contents;
    if (!out) throw IoError("write failed: " + path.string());
}

std::string read_text_file(const std::filesystem::path& path) {
    auto in = open_in(path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

}  // namespace cpo
