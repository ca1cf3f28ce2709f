#include "ki/vocab.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "ki/errors.hpp"
#include "ki/hash.hpp"

namespace ki {

namespace {
const char* kSpecialNames[] = {"<pad>", "<unk>", "<mask>", "<bos>", "<eos>"};

void finalize(Vocab& v) {
    v.id_of.clear();
    v.id_of.reserve(v.tokens.size());
    for (size_t i = 0; i < v.tokens.size(); ++i) {
        auto [it, inserted] = v.id_of.emplace(v.tokens[i], int32_t(i));
        require(inserted, Errc::FormatError, "duplicate token '" + v.tokens[i] + "'");
    }
}
}  // namespace

std::string Vocab::hash_hex() const {
    std::string joined;
    for (const auto& t : tokens) {
        joined += t;
        joined += '\n';
    }
    return to_hex(sha256(joined));
}

Vocab build_vocab(std::span<const std::string> documents, int vocab_size) {
    require(vocab_size >= Vocab::kNumSpecials + 1, Errc::InvalidArgument,
            "vocab_size must be at least 6");
    // std::map gives the lexicographic order needed for tie-breaking.
    std::map<std::string, int64_t> freq;
    bool any_token = false;
    for (const auto& doc : documents) {
        size_t i = 0;
        while (i < doc.size()) {
            while (i < doc.size() && std::isspace(static_cast<unsigned char>(doc[i]))) ++i;
            size_t start = i;
            while (i < doc.size() && !std::isspace(static_cast<unsigned char>(doc[i]))) ++i;
            if (i > start) {
                ++freq[doc.substr(start, i - start)];
                any_token = true;
            }
        }
    }
    require(any_token, Errc::EmptyCorpus, "no tokens in document stream");

    std::vector<std::pair<std::string, int64_t>> by_freq(freq.begin(), freq.end());
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    Vocab v;
    v.tokens.assign(std::begin(kSpecialNames), std::end(kSpecialNames));
    size_t keep = std::min(by_freq.size(), size_t(vocab_size - Vocab::kNumSpecials));
    for (size_t i = 0; i < keep; ++i) v.tokens.push_back(by_freq[i].first);
    finalize(v);
    return v;
}

void save_vocab(const Vocab& v, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(bool(out), Errc::IoError, "cannot open " + path);
    for (const auto& t : v.tokens) out << t << '\n';
    require(bool(out), Errc::IoError, "write failed: " + path);
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), Errc::IoError, "cannot open " + path);
    Vocab v;
    std::string line;
    while (std::getline(in, line)) v.tokens.push_back(line);
    require(v.tokens.size() >= Vocab::kNumSpecials, Errc::FormatError,
            "vocab file too short: " + path);
    for (int i = 0; i < Vocab::kNumSpecials; ++i)
        require(v.tokens[size_t(i)] == kSpecialNames[i], Errc::FormatError,
                "vocab file missing special tokens: " + path);
    finalize(v);
    return v;
}

}  // namespace ki
