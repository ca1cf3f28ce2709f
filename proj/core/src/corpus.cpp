#include "ki/corpus.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <numeric>
#include <set>
#include <sstream>

#include "ki/errors.hpp"
#include "ki/rng.hpp"

namespace ki {

namespace {
constexpr size_t kValidEvery = 200;  // 199:1 train:valid

void check_same_vocab(const Corpus& a, const Corpus& b) {
    require(a.vocab_hash == b.vocab_hash && a.vocab_size == b.vocab_size, Errc::VocabMismatch,
            "corpora were encoded under different vocabularies");
    require(a.seq_len == b.seq_len, Errc::VocabMismatch, "corpora have different seq_len");
}
}  // namespace

std::vector<size_t> Corpus::split_indices(Split s) const {
    std::vector<size_t> idx;
    for (size_t i = 0; i < splits.size(); ++i)
        if (splits[i] == s) idx.push_back(i);
    return idx;
}

size_t Corpus::count(Split s) const {
    return size_t(std::count(splits.begin(), splits.end(), s));
}

Corpus encode_corpus(std::span<const std::string> documents, const Vocab& vocab, int seq_len,
                     uint64_t seed, const std::string& domain_tag) {
    require(seq_len >= 2, Errc::InvalidArgument, "seq_len must be >= 2");

    std::vector<int32_t> stream;
    for (const auto& doc : documents) {
        size_t i = 0;
        while (i < doc.size()) {
            while (i < doc.size() && std::isspace(static_cast<unsigned char>(doc[i]))) ++i;
            size_t start = i;
            while (i < doc.size() && !std::isspace(static_cast<unsigned char>(doc[i]))) ++i;
            if (i > start) stream.push_back(vocab.encode(std::string_view(doc).substr(start, i - start)));
        }
    }
    size_t n_seqs = stream.size() / size_t(seq_len);
    require(n_seqs >= 1, Errc::EmptyCorpus, "corpus shorter than one sequence");

    std::vector<size_t> order(n_seqs);
    std::iota(order.begin(), order.end(), size_t(0));
    Rng rng(derive_seed(seed, 0x636f7270ULL));  // "corp"
    shuffle(order, rng);

    Corpus c;
    c.seq_len = seq_len;
    c.vocab_size = vocab.size();
    c.vocab_hash = vocab.hash_hex();
    c.tokens.reserve(n_seqs * size_t(seq_len));
    for (size_t rank = 0; rank < n_seqs; ++rank) {
        const int32_t* src = stream.data() + order[rank] * size_t(seq_len);
        c.tokens.insert(c.tokens.end(), src, src + seq_len);
        c.seq_ids.push_back(uint64_t(rank));
        c.splits.push_back((rank + 1) % kValidEvery == 0 ? Split::valid : Split::train);
        c.domains.push_back(domain_tag);
    }
    c.no_valid_warning = c.count(Split::valid) == 0;
    return c;
}

Corpus mix_domains(const Corpus& a, const Corpus& b, int ratio_a, int ratio_b, uint64_t seed) {
    check_same_vocab(a, b);
    require(ratio_a >= 0 && ratio_b >= 0 && ratio_a + ratio_b > 0, Errc::InvalidArgument,
            "mix ratio must have a positive side");
    if (ratio_b == 0) return a;
    if (ratio_a == 0) return b;

    auto train_a = a.split_indices(Split::train);
    auto train_b = b.split_indices(Split::train);
    size_t units = std::min(train_a.size() / size_t(ratio_a), train_b.size() / size_t(ratio_b));
    size_t take_a = units * size_t(ratio_a);
    size_t take_b = units * size_t(ratio_b);

    Rng rng(derive_seed(seed, 0x6d6978ULL));  // "mix"
    shuffle(train_a, rng);
    shuffle(train_b, rng);
    train_a.resize(take_a);
    train_b.resize(take_b);

    Corpus out;
    out.seq_len = a.seq_len;
    out.vocab_size = a.vocab_size;
    out.vocab_hash = a.vocab_hash;
    auto append = [&out](const Corpus& src, size_t i, Split split) {
        const int32_t* s = src.sequence(i);
        out.tokens.insert(out.tokens.end(), s, s + src.seq_len);
        out.seq_ids.push_back(uint64_t(out.seq_ids.size()));
        out.splits.push_back(split);
        out.domains.push_back(src.domains[i]);
    };
    // round-robin interleave at the requested ratio
    size_t ia = 0, ib = 0;
    for (size_t u = 0; u < units; ++u) {
        for (int k = 0; k < ratio_a; ++k) append(a, train_a[ia++], Split::train);
        for (int k = 0; k < ratio_b; ++k) append(b, train_b[ib++], Split::train);
    }
    for (size_t i : a.split_indices(Split::valid)) append(a, i, Split::valid);
    for (size_t i : b.split_indices(Split::valid)) append(b, i, Split::valid);
    out.no_valid_warning = out.count(Split::valid) == 0;
    return out;
}

namespace {
std::vector<std::string> top_words(const Corpus& c, const Vocab& v, int top_n,
                                   const std::set<std::string>& stop) {
    std::map<std::string, int64_t> freq;
    for (size_t i = 0; i < c.num_sequences(); ++i) {
        const int32_t* seq = c.sequence(i);
        for (int j = 0; j < c.seq_len; ++j) {
            int32_t id = seq[j];
            if (Vocab::is_special(id)) continue;
            const std::string& w = v.decode(id);
            if (!stop.count(w)) ++freq[w];
        }
    }
    require(!freq.empty(), Errc::EmptyCorpus, "corpus empty after stopword removal");
    std::vector<std::pair<std::string, int64_t>> by_freq(freq.begin(), freq.end());
    std::stable_sort(by_freq.begin(), by_freq.end(),
                     [](const auto& x, const auto& y) { return x.second > y.second; });
    size_t keep = std::min(by_freq.size(), size_t(top_n));
    std::vector<std::string> out;
    out.reserve(keep);
    for (size_t i = 0; i < keep; ++i) out.push_back(by_freq[i].first);
    return out;
}
}  // namespace

double domain_proximity(const Corpus& a, const Vocab& vocab_a, const Corpus& b,
                        const Vocab& vocab_b, int top_n,
                        std::span<const std::string> stopwords) {
    require(top_n >= 1, Errc::InvalidArgument, "top_n must be positive");
    std::set<std::string> stop(stopwords.begin(), stopwords.end());
    auto wa = top_words(a, vocab_a, top_n, stop);
    auto wb = top_words(b, vocab_b, top_n, stop);
    std::set<std::string> sa(wa.begin(), wa.end()), sb(wb.begin(), wb.end());
    size_t inter = 0;
    for (const auto& w : sa) inter += sb.count(w);
    return double(inter) / double(std::min(sa.size(), sb.size()));
}

Corpus take_train_fraction(const Corpus& c, int numer, int denom) {
    require(numer >= 1 && denom >= numer, Errc::InvalidArgument, "bad train fraction");
    auto train = c.split_indices(Split::train);
    size_t keep = std::max<size_t>(1, train.size() * size_t(numer) / size_t(denom));

    Corpus out;
    out.seq_len = c.seq_len;
    out.vocab_size = c.vocab_size;
    out.vocab_hash = c.vocab_hash;
    auto append = [&](size_t i) {
        const int32_t* s = c.sequence(i);
        out.tokens.insert(out.tokens.end(), s, s + c.seq_len);
        out.seq_ids.push_back(c.seq_ids[i]);
        out.splits.push_back(c.splits[i]);
        out.domains.push_back(c.domains[i]);
    };
    for (size_t k = 0; k < keep; ++k) append(train[k]);
    for (size_t i : c.split_indices(Split::valid)) append(i);
    out.no_valid_warning = out.count(Split::valid) == 0;
    return out;
}

void save_corpus(const Corpus& c, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(bool(out), Errc::IoError, "cannot open " + path);
    out << "KICORPUS v1 vocab_hash=" << c.vocab_hash << " seq_len=" << c.seq_len << "\n";
    for (size_t i = 0; i < c.num_sequences(); ++i) {
        out << c.seq_ids[i] << '\t' << (c.splits[i] == Split::train ? "train" : "valid") << '\t'
            << c.domains[i] << '\t';
        const int32_t* seq = c.sequence(i);
        for (int j = 0; j < c.seq_len; ++j) {
            if (j) out << ' ';
            out << seq[j];
        }
        out << '\n';
    }
    require(bool(out), Errc::IoError, "write failed: " + path);
}

Corpus load_corpus(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), Errc::IoError, "cannot open " + path);
    std::string header;
    std::getline(in, header);
    Corpus c;
    {
        std::istringstream hs(header);
        std::string magic, ver, vh, sl;
        hs >> magic >> ver >> vh >> sl;
        require(magic == "KICORPUS" && ver == "v1" && vh.rfind("vocab_hash=", 0) == 0 &&
                    sl.rfind("seq_len=", 0) == 0,
                Errc::FormatError, "bad corpus header: " + path);
        c.vocab_hash = vh.substr(11);
        c.seq_len = std::stoi(sl.substr(8));
        require(c.seq_len >= 2, Errc::FormatError, "bad seq_len in " + path);
    }
    std::string line;
    std::set<uint64_t> seen_ids;
    int32_t max_id = -1;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        uint64_t seq_id;
        std::string split, domain;
        require(bool(ls >> seq_id >> split >> domain), Errc::FormatError,
                "bad corpus record: " + path);
        require(split == "train" || split == "valid", Errc::FormatError,
                "bad split value: " + split);
        require(seen_ids.insert(seq_id).second, Errc::FormatError,
                "duplicate seq_id in " + path);
        c.seq_ids.push_back(seq_id);
        c.splits.push_back(split == "train" ? Split::train : Split::valid);
        c.domains.push_back(domain);
        for (int j = 0; j < c.seq_len; ++j) {
            int32_t tok;
            require(bool(ls >> tok) && tok >= 0, Errc::FormatError,
                    "short or invalid sequence in " + path);
            c.tokens.push_back(tok);
            max_id = std::max(max_id, tok);
        }
    }
    require(!c.seq_ids.empty(), Errc::EmptyCorpus, "corpus file has no sequences: " + path);
    c.vocab_size = max_id + 1;  // callers re-check against the paired vocab
    c.no_valid_warning = c.count(Split::valid) == 0;
    return c;
}

}  // namespace ki
