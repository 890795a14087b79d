#pragma once

#include <cstdint>
#include <vector>

#include "cpo/errors.hpp"

namespace cpo {

// Fixed-length token space: every text has exactly `seq_len` tokens in [0, size).
struct Vocab {
    int size = 2;     // V
    int seq_len = 1;  // L

    void validate() const;
    // V^L, or throws EnumerationTooLarge beyond the enumeration cap.
    std::int64_t space_size() const;

    bool operator==(const Vocab&) const = default;
};

inline constexpr std::int64_t kEnumerationCap = 10'000'000;

using Text = std::vector<std::int32_t>;
using FeatureVector = std::vector<double>;

bool text_valid(const Text& text, const Vocab& vocab);
void require_text_valid(const Text& text, const Vocab& vocab);

// All V^L texts exactly once, in lexicographic token order.
std::vector<Text> enumerate_texts(const Vocab& vocab);

// Feature dimension for an n-gram order in {1, 2}: 1+V or 1+V+V^2.
std::size_t feature_dim(const Vocab& vocab, int order);

// Intercept + unigram counts (+ adjacent bigram counts for order 2).
// Entry 0 is 1; entry 1+t counts token t; entry 1+V+(a*V+b) counts pair (a,b).
FeatureVector featurize(const Text& text, const Vocab& vocab, int order = 2);

}  // namespace cpo
