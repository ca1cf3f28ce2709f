#ifndef KI_TEXTGEN_HPP
#define KI_TEXTGEN_HPP

#include <cstdint>
#include <string>
#include <vector>

namespace ki {

// Deterministic synthetic text: topic-coherent template sentences over a
// Zipf-weighted invented lexicon. Two domain profiles ("prose", "tech")
// share part of their vocabulary, so domain mixing, adaptation and
// proximity measurements all have something real to measure.
struct TextgenSpec {
    std::string domain = "prose";
    uint64_t seed = 0;
    int64_t target_tokens = 100000;
};

std::vector<std::string> generate_documents(const TextgenSpec& spec);

}  // namespace ki

#endif
