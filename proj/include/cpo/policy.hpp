#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "cpo/rng.hpp"
#include "cpo/textspace.hpp"

namespace cpo {

// Flat parameter vector with the same layout as Policy logits.
using ParamGrad = std::vector<double>;

// Order-k autoregressive softmax over fixed-length texts. Each position t has
// its own logit table over contexts of the previous min(k, t) tokens, so the
// distribution is an exact, fully enumerable product of softmax rows.
//
// Layout: position tables are concatenated; the row for (position t, context c)
// starts at row_offset(t, c) and has V entries, one logit per next token.
class Policy {
public:
    Policy() = default;
    Policy(Vocab vocab, int order);  // all-zero logits -> uniform over texts

    static Policy random(Vocab vocab, int order, double logit_scale, Rng& rng);

    const Vocab& vocab() const { return vocab_; }
    int order() const { return order_; }
    std::size_t num_params() const { return logits_.size(); }

    std::span<double> logits() { return logits_; }
    std::span<const double> logits() const { return logits_; }

    std::size_t num_contexts(int pos) const;                // V^min(order, pos)
    std::size_t row_offset(int pos, std::size_t ctx) const; // start of the V-wide row
    std::size_t context_index(const Text& text, int pos) const;

    // Softmax probabilities of one row.
    std::vector<double> row_probs(int pos, std::size_t ctx) const;

    // Exact log P^f(text) = sum_t log softmax(logits[ctx_t])[x_t].
    double log_prob(const Text& text) const;

    // Ancestral sample.
    Text sample(Rng& rng) const;

    // Score function: entry (ctx_t, v) is 1[x_t = v] - softmax(logits[ctx_t])[v].
    ParamGrad grad_log_prob(const Text& text) const;

    // grad += coeff * grad_log_prob(text), without materializing the score.
    void accumulate_grad_log_prob(const Text& text, double coeff, ParamGrad& grad) const;

    // Checks logit finiteness and layout consistency.
    void validate() const;

    bool operator==(const Policy&) const = default;

private:
    Vocab vocab_{};
    int order_ = 1;
    std::vector<std::size_t> position_offsets_;  // per position, start of its table
    std::vector<double> logits_;
};

// Closed-form add-alpha maximum likelihood fit:
//   logits[ctx][v] = log(count(ctx, v) + alpha) - log(count(ctx) + alpha * V).
// With alpha = 0, a context never seen in the corpus falls back to uniform
// (all-zero row); a seen context with an unseen token gets the logit floor,
// whose probability underflows to exactly 0.
Policy mle_fit(const std::vector<Text>& texts, const Vocab& vocab, int order, double alpha);

// Logit floor used by mle_fit for log(0); exp(kLogitFloor) == 0.0 in double.
inline constexpr double kLogitFloor = -1e3;

}  // namespace cpo
