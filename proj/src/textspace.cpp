#include "cpo/textspace.hpp"

#include <string>

namespace cpo {

void Vocab::validate() const {
    if (size < 2) throw Error("Vocab: size must be >= 2, got " + std::to_string(size));
    if (seq_len < 1) throw Error("Vocab: seq_len must be >= 1, got " + std::to_string(seq_len));
}

std::int64_t Vocab::space_size() const {
    validate();
    std::int64_t total = 1;
    for (int t = 0; t < seq_len; ++t) {
        total *= size;
        if (total > kEnumerationCap) {
            throw EnumerationTooLarge("text space " + std::to_string(size) + "^" +
                                      std::to_string(seq_len) + " exceeds enumeration cap " +
                                      std::to_string(kEnumerationCap));
        }
    }
    return total;
}

bool text_valid(const Text& text, const Vocab& vocab) {
    if (static_cast<int>(text.size()) != vocab.seq_len) return false;
    for (auto t : text) {
        if (t < 0 || t >= vocab.size) return false;
    }
    return true;
}

void require_text_valid(const Text& text, const Vocab& vocab) {
    if (!text_valid(text, vocab)) {
        throw Error("text of length " + std::to_string(text.size()) + " invalid for vocab (V=" +
                    std::to_string(vocab.size) + ", L=" + std::to_string(vocab.seq_len) + ")");
    }
}

std::vector<Text> enumerate_texts(const Vocab& vocab) {
    const std::int64_t total = vocab.space_size();
    std::vector<Text> out;
    out.reserve(static_cast<std::size_t>(total));
    Text cur(static_cast<std::size_t>(vocab.seq_len), 0);
    for (std::int64_t i = 0; i < total; ++i) {
        out.push_back(cur);
        // increment base-V counter, last token fastest
        for (int t = vocab.seq_len - 1; t >= 0; --t) {
            if (++cur[static_cast<std::size_t>(t)] < vocab.size) break;
            cur[static_cast<std::size_t>(t)] = 0;
        }
    }
    return out;
}

std::size_t feature_dim(const Vocab& vocab, int order) {
    vocab.validate();
    if (order != 1 && order != 2) throw Error("feature order must be 1 or 2, got " + std::to_string(order));
    const std::size_t v = static_cast<std::size_t>(vocab.size);
    return order == 1 ? 1 + v : 1 + v + v * v;
}

FeatureVector featurize(const Text& text, const Vocab& vocab, int order) {
    require_text_valid(text, vocab);
    FeatureVector f(feature_dim(vocab, order), 0.0);
    f[0] = 1.0;
    const std::size_t v = static_cast<std::size_t>(vocab.size);
    for (auto t : text) f[1 + static_cast<std::size_t>(t)] += 1.0;
    if (order == 2) {
        for (std::size_t i = 0; i + 1 < text.size(); ++i) {
            f[1 + v + static_cast<std::size_t>(text[i]) * v + static_cast<std::size_t>(text[i + 1])] += 1.0;
        }
    }
    return f;
}

}  // namespace cpo
