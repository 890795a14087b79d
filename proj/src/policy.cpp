#include "cpo/policy.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "cpo/errors.hpp"

namespace cpo {

namespace {

std::size_t pow_size(int base, int exp) {
    std::size_t r = 1;
    for (int i = 0; i < exp; ++i) r *= static_cast<std::size_t>(base);
    return r;
}

// Stable log softmax of row evaluated at index `pick`.
double log_softmax_at(std::span<const double> row, std::size_t pick) {
    double mx = row[0];
    for (double x : row) mx = std::max(mx, x);
    double sum = 0.0;
    for (double x : row) sum += std::exp(x - mx);
    return row[pick] - mx - std::log(sum);
}

}  // namespace

Policy::Policy(Vocab vocab, int order) : vocab_(vocab), order_(order) {
    vocab_.validate();
    if (order < 0 || order > 2) throw Error("policy order must be in {0,1,2}, got " + std::to_string(order));
    position_offsets_.resize(static_cast<std::size_t>(vocab_.seq_len));
    std::size_t offset = 0;
    for (int t = 0; t < vocab_.seq_len; ++t) {
        position_offsets_[static_cast<std::size_t>(t)] = offset;
        offset += num_contexts(t) * static_cast<std::size_t>(vocab_.size);
    }
    logits_.assign(offset, 0.0);
}

Policy Policy::random(Vocab vocab, int order, double logit_scale, Rng& rng) {
    Policy p(vocab, order);
    std::normal_distribution<double> dist(0.0, logit_scale);
    for (auto& x : p.logits_) x = dist(rng);
    return p;
}

std::size_t Policy::num_contexts(int pos) const {
    return pow_size(vocab_.size, std::min(order_, pos));
}

std::size_t Policy::row_offset(int pos, std::size_t ctx) const {
    return position_offsets_[static_cast<std::size_t>(pos)] + ctx * static_cast<std::size_t>(vocab_.size);
}

std::size_t Policy::context_index(const Text& text, int pos) const {
    const int c = std::min(order_, pos);
    std::size_t idx = 0;
    for (int i = pos - c; i < pos; ++i) {
        idx = idx * static_cast<std::size_t>(vocab_.size) + static_cast<std::size_t>(text[static_cast<std::size_t>(i)]);
    }
    return idx;
}

std::vector<double> Policy::row_probs(int pos, std::size_t ctx) const {
    const std::size_t off = row_offset(pos, ctx);
    const std::size_t v = static_cast<std::size_t>(vocab_.size);
    double mx = logits_[off];
    for (std::size_t i = 1; i < v; ++i) mx = std::max(mx, logits_[off + i]);
    std::vector<double> probs(v);
    double sum = 0.0;
    for (std::size_t i = 0; i < v; ++i) {
        probs[i] = std::exp(logits_[off + i] - mx);
        sum += probs[i];
    }
    for (auto& p : probs) p /= sum;
    return probs;
}

double Policy::log_prob(const Text& text) const {
    require_text_valid(text, vocab_);
    const std::size_t v = static_cast<std::size_t>(vocab_.size);
    double lp = 0.0;
    for (int t = 0; t < vocab_.seq_len; ++t) {
        const std::size_t off = row_offset(t, context_index(text, t));
        lp += log_softmax_at(std::span<const double>(logits_).subspan(off, v),
                             static_cast<std::size_t>(text[static_cast<std::size_t>(t)]));
    }
    return lp;
}

Text Policy::sample(Rng& rng) const {
    Text text(static_cast<std::size_t>(vocab_.seq_len), 0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    for (int t = 0; t < vocab_.seq_len; ++t) {
        const auto probs = row_probs(t, context_index(text, t));
        const double u = unif(rng);
        double acc = 0.0;
        std::int32_t pick = vocab_.size - 1;
        for (std::size_t i = 0; i < probs.size(); ++i) {
            acc += probs[i];
            if (u < acc) {
                pick = static_cast<std::int32_t>(i);
                break;
            }
        }
        text[static_cast<std::size_t>(t)] = pick;
    }
    return text;
}

ParamGrad Policy::grad_log_prob(const Text& text) const {
    ParamGrad grad(logits_.size(), 0.0);
    accumulate_grad_log_prob(text, 1.0, grad);
    return grad;
}

void Policy::accumulate_grad_log_prob(const Text& text, double coeff, ParamGrad& grad) const {
    require_text_valid(text, vocab_);
    if (grad.size() != logits_.size()) throw Error("gradient buffer has wrong size");
    for (int t = 0; t < vocab_.seq_len; ++t) {
        const std::size_t off = row_offset(t, context_index(text, t));
        const auto probs = row_probs(t, context_index(text, t));
        for (std::size_t i = 0; i < probs.size(); ++i) grad[off + i] -= coeff * probs[i];
        grad[off + static_cast<std::size_t>(text[static_cast<std::size_t>(t)])] += coeff;
    }
}

void Policy::validate() const {
    vocab_.validate();
    std::size_t expected = 0;
    for (int t = 0; t < vocab_.seq_len; ++t) expected += num_contexts(t) * static_cast<std::size_t>(vocab_.size);
    if (logits_.size() != expected) throw Error("policy logits size mismatch");
    for (double x : logits_) {
        if (!std::isfinite(x)) throw Error("policy logits must be finite");
    }
}

Policy mle_fit(const std::vector<Text>& texts, const Vocab& vocab, int order, double alpha) {
    if (texts.empty()) throw EmptyCorpus("mle_fit: empty corpus");
    if (alpha < 0.0) throw Error("mle_fit: alpha must be >= 0");
    Policy p(vocab, order);
    std::vector<double> counts(p.num_params(), 0.0);
    for (const auto& text : texts) {
        require_text_valid(text, vocab);
        for (int t = 0; t < vocab.seq_len; ++t) {
            counts[p.row_offset(t, p.context_index(text, t)) + static_cast<std::size_t>(text[static_cast<std::size_t>(t)])] += 1.0;
        }
    }
    auto logits = p.logits();
    const std::size_t v = static_cast<std::size_t>(vocab.size);
    for (int t = 0; t < vocab.seq_len; ++t) {
        for (std::size_t c = 0; c < p.num_contexts(t); ++c) {
            const std::size_t off = p.row_offset(t, c);
            double total = 0.0;
            for (std::size_t i = 0; i < v; ++i) total += counts[off + i];
            if (total + alpha * static_cast<double>(v) == 0.0) continue;  // unseen context: uniform fallback
            for (std::size_t i = 0; i < v; ++i) {
                const double num = counts[off + i] + alpha;
                logits[off + i] = num > 0.0 ? std::log(num) - std::log(total + alpha * static_cast<double>(v))
                                            : kLogitFloor;
            }
        }
    }
    return p;
}

}  // namespace cpo
