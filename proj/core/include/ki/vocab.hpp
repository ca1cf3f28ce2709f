#ifndef KI_VOCAB_HPP
#define KI_VOCAB_HPP

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace ki {

// Token ids are dense in [0, size()); ids 0..4 are the fixed specials.
struct Vocab {
    static constexpr int32_t kPad = 0;
    static constexpr int32_t kUnk = 1;
    static constexpr int32_t kMask = 2;
    static constexpr int32_t kBos = 3;
    static constexpr int32_t kEos = 4;
    static constexpr int32_t kNumSpecials = 5;

    std::vector<std::string> tokens;
    std::unordered_map<std::string, int32_t> id_of;

    int32_t size() const { return int32_t(tokens.size()); }

    int32_t encode(std::string_view tok) const {
        auto it = id_of.find(std::string(tok));
        return it == id_of.end() ? kUnk : it->second;
    }

    const std::string& decode(int32_t id) const { return tokens[size_t(id)]; }

    static bool is_special(int32_t id) { return id < kNumSpecials; }
    // MASK, PAD, BOS, EOS may never be selected for masking; UNK may.
    static bool maskable(int32_t id) { return id != kPad && id != kMask && id != kBos && id != kEos; }

    // sha256 hex of the token list; pairs corpora with the vocab they were
    // encoded under.
    std::string hash_hex() const;
};

// Keeps the (vocab_size - 5) most frequent whitespace-delimited tokens;
// frequency ties break lexicographically.
Vocab build_vocab(std::span<const std::string> documents, int vocab_size);

void save_vocab(const Vocab& v, const std::string& path);
Vocab load_vocab(const std::string& path);

}  // namespace ki

#endif
