#ifndef KI_CORPUS_HPP
#define KI_CORPUS_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ki/vocab.hpp"

namespace ki {

enum class Split : uint8_t { train = 0, valid = 1 };

// Fixed-length packed sequences. Immutable once built; safe to share across
// threads.
struct Corpus {
    int seq_len = 0;
    int32_t vocab_size = 0;
    std::string vocab_hash;
    std::vector<int32_t> tokens;        // flat [num_sequences * seq_len]
    std::vector<uint64_t> seq_ids;      // unique across the corpus
    std::vector<Split> splits;
    std::vector<std::string> domains;   // tag per sequence
    bool no_valid_warning = false;      // set when the corpus is too small for a valid split

    size_t num_sequences() const { return seq_ids.size(); }
    const int32_t* sequence(size_t i) const { return tokens.data() + i * size_t(seq_len); }

    std::vector<size_t> split_indices(Split s) const;
    size_t count(Split s) const;
};

// Packs whitespace-tokenized documents into seq_len chunks (remainder
// dropped), shuffles by seed, then assigns every 200th sequence to the
// valid split.
Corpus encode_corpus(std::span<const std::string> documents, const Vocab& vocab, int seq_len,
                     uint64_t seed, const std::string& domain_tag = "default");

// Interleaves train sequences of a and b at ratio_a:ratio_b (scarcer side
// rounds down); both valid splits are carried over. Fresh seq_ids are
// assigned so the result is a self-contained corpus.
Corpus mix_domains(const Corpus& a, const Corpus& b, int ratio_a, int ratio_b, uint64_t seed);

// Fraction of shared words between the two corpora's top-N non-stopword
// vocabularies. Symmetric; 1.0 for identical corpora.
double domain_proximity(const Corpus& a, const Vocab& vocab_a, const Corpus& b,
                        const Vocab& vocab_b, int top_n,
                        std::span<const std::string> stopwords);

// Keeps the first train_fraction of train sequences (and the whole valid
// split). Used for data-size sweeps.
Corpus take_train_fraction(const Corpus& c, int numer, int denom);

void save_corpus(const Corpus& c, const std::string& path);
Corpus load_corpus(const std::string& path);

}  // namespace ki

#endif
