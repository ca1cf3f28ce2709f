#include "ki/textgen.hpp"

#include <algorithm>
#include <cmath>

#include "ki/errors.hpp"
#include "ki/rng.hpp"

namespace ki {

namespace {

constexpr uint64_t kLexiconSeed = 0x4c455849;  // lexicon layout is fixed across runs

const char* kSyllables[] = {"ka", "ren", "vo",  "mi",  "tal", "sor", "ne",  "lu",  "bar", "tis",
                            "ron", "del", "fa",  "gos", "pim", "ur",  "vek", "sha", "ol",  "dra",
                            "ce",  "nor", "ya",  "bel", "tro", "ki",  "mun", "zar", "eth", "ila",
                            "qua", "fen", "rud", "sel", "ob",  "wyn", "tam", "hec", "liv", "pol"};

const char* kDeterminers[] = {"the", "the", "the", "a", "a", "this", "each", "its"};
const char* kPreps[] = {"of", "in", "on", "with", "under", "from", "through"};
const char* kConjs[] = {"and", "and", "or", "but"};

struct WordPools {
    std::vector<std::string> nouns, verbs, adjs, advs;
};

std::string make_word(Rng& rng, int min_syll, int max_syll) {
    int n = min_syll + int(rng.below(uint64_t(max_syll - min_syll + 1)));
    std::string w;
    for (int i = 0; i < n; ++i) w += kSyllables[rng.below(std::size(kSyllables))];
    return w;
}

std::vector<std::string> make_words(Rng& rng, size_t count, std::vector<std::string>& taken) {
    std::vector<std::string> out;
    while (out.size() < count) {
        std::string w = make_word(rng, 2, 3);
        if (std::find(taken.begin(), taken.end(), w) != taken.end()) continue;
        taken.push_back(w);
        out.push_back(std::move(w));
    }
    return out;
}

struct Lexicon {
    WordPools prose, tech;
};

// Shared slice first, then domain-specific words on top; overlap is what
// the proximity measurement sees.
Lexicon build_lexicon() {
    Rng rng(kLexiconSeed);
    std::vector<std::string> taken;
    WordPools common;
    common.nouns = make_words(rng, 60, taken);
    common.verbs = make_words(rng, 30, taken);
    common.adjs = make_words(rng, 24, taken);
    common.advs = make_words(rng, 6, taken);

    Lexicon lex;
    auto fill = [&](WordPools& p, size_t nn, size_t nv, size_t na, size_t nd) {
        p = common;
        auto extend = [&](std::vector<std::string>& dst, size_t total) {
            auto extra = make_words(rng, total - dst.size(), taken);
            dst.insert(dst.end(), extra.begin(), extra.end());
        };
        extend(p.nouns, nn);
        extend(p.verbs, nv);
        extend(p.adjs, na);
        extend(p.advs, nd);
    };
    fill(lex.prose, 320, 160, 140, 48);
    fill(lex.tech, 230, 110, 100, 32);
    return lex;
}

const Lexicon& lexicon() {
    static const Lexicon lex = build_lexicon();
    return lex;
}

// Zipf-weighted pick from a pool slice.
template <typename Vec>
const std::string& zipf_pick(const Vec& pool, Rng& rng) {
    // cumulative 1/(i+1)^0.8 via inverse transform on a precomputed-free path
    double u = rng.uniform();
    double total = 0;
    for (size_t i = 0; i < pool.size(); ++i) total += 1.0 / std::pow(double(i + 1), 0.8);
    double x = u * total, acc = 0;
    for (size_t i = 0; i < pool.size(); ++i) {
        acc += 1.0 / std::pow(double(i + 1), 0.8);
        if (x <= acc) return pool[i];
    }
    return pool.back();
}

struct Topic {
    std::vector<std::string> nouns, verbs, adjs, advs;
};

std::vector<Topic> make_topics(const WordPools& pools, int n_topics, uint64_t seed) {
    std::vector<Topic> topics;
    for (int t = 0; t < n_topics; ++t) {
        Rng rng(derive_seed(seed, 0x746f70, uint64_t(t)));  // "top"
        Topic topic;
        auto sample = [&](const std::vector<std::string>& src, size_t k) {
            std::vector<std::string> out;
            std::vector<size_t> idx(src.size());
            for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
            shuffle(idx, rng);
            for (size_t i = 0; i < std::min(k, src.size()); ++i) out.push_back(src[idx[i]]);
            return out;
        };
        topic.nouns = sample(pools.nouns, 48);
        topic.verbs = sample(pools.verbs, 28);
        topic.adjs = sample(pools.adjs, 22);
        topic.advs = sample(pools.advs, 10);
        topics.push_back(std::move(topic));
    }
    return topics;
}

enum class Slot { det, noun, verb, adj, adv, prep, conj, num, word_of, word_is, word_was,
                  word_that, word_when, word_if, comma, period };

using Template = std::vector<Slot>;

const std::vector<Template>& templates_for(bool tech) {
    using S = Slot;
    static const std::vector<Template> prose = {
        {S::det, S::adj, S::noun, S::verb, S::det, S::noun, S::period},
        {S::det, S::noun, S::verb, S::adv, S::period},
        {S::det, S::noun, S::word_of, S::det, S::noun, S::verb, S::det, S::adj, S::noun,
         S::period},
        {S::det, S::noun, S::conj, S::det, S::noun, S::verb, S::prep, S::det, S::noun, S::period},
        {S::prep, S::det, S::noun, S::comma, S::det, S::noun, S::verb, S::adv, S::period},
        {S::det, S::noun, S::word_was, S::adj, S::conj, S::adv, S::adj, S::period},
        {S::det, S::adj, S::noun, S::word_of, S::det, S::noun, S::verb, S::word_that, S::det,
         S::noun, S::word_was, S::adj, S::period},
        {S::det, S::noun, S::verb, S::det, S::noun, S::prep, S::det, S::adj, S::noun, S::period},
    };
    static const std::vector<Template> techt = {
        {S::det, S::noun, S::verb, S::det, S::noun, S::period},
        {S::noun, S::num, S::verb, S::noun, S::num, S::period},
        {S::word_if, S::det, S::noun, S::word_is, S::adj, S::comma, S::det, S::noun, S::verb,
         S::period},
        {S::det, S::noun, S::word_is, S::adj, S::word_when, S::det, S::noun, S::verb, S::period},
        {S::noun, S::conj, S::noun, S::verb, S::det, S::adj, S::noun, S::period},
        {S::det, S::adj, S::noun, S::verb, S::num, S::noun, S::period},
        {S::noun, S::num, S::word_is, S::det, S::adj, S::noun, S::period},
    };
    return tech ? techt : prose;
}

}  // namespace

std::vector<std::string> generate_documents(const TextgenSpec& spec) {
    require(spec.domain == "prose" || spec.domain == "tech", Errc::InvalidArgument,
            "unknown textgen domain: " + spec.domain);
    require(spec.target_tokens > 0, Errc::InvalidArgument, "target_tokens must be positive");
    const bool tech = spec.domain == "tech";
    const WordPools& pools = tech ? lexicon().tech : lexicon().prose;
    const auto topics = make_topics(pools, tech ? 10 : 12,
                                    derive_seed(kLexiconSeed, tech ? 2 : 1));
    const auto& templates = templates_for(tech);

    Rng rng(derive_seed(spec.seed, 0x67656e));  // "gen"
    std::vector<std::string> docs;
    int64_t tokens = 0;
    size_t topic_at = rng.below(topics.size());

    while (tokens < spec.target_tokens) {
        // one paragraph per document; topics are sticky across sentences
        std::string doc;
        int sentences = 4 + int(rng.below(6));
        for (int s = 0; s < sentences; ++s) {
            if (rng.uniform() > 0.75) topic_at = rng.below(topics.size());
            const Topic& topic = topics[topic_at];
            const Template& tmpl = templates[rng.below(templates.size())];
            for (Slot slot : tmpl) {
                const std::string* w = nullptr;
                std::string tmp;
                switch (slot) {
                    case Slot::det: tmp = kDeterminers[rng.below(std::size(kDeterminers))]; break;
                    case Slot::noun: w = &zipf_pick(topic.nouns, rng); break;
                    case Slot::verb: w = &zipf_pick(topic.verbs, rng); break;
                    case Slot::adj: w = &zipf_pick(topic.adjs, rng); break;
                    case Slot::adv: w = &zipf_pick(topic.advs, rng); break;
                    case Slot::prep: tmp = kPreps[rng.below(std::size(kPreps))]; break;
                    case Slot::conj: tmp = kConjs[rng.below(std::size(kConjs))]; break;
                    case Slot::num: tmp = std::to_string(rng.below(20)); break;
                    case Slot::word_of: tmp = "of"; break;
                    case Slot::word_is: tmp = "is"; break;
                    case Slot::word_was: tmp = "was"; break;
                    case Slot::word_that: tmp = "that"; break;
                    case Slot::word_when: tmp = "when"; break;
                    case Slot::word_if: tmp = "if"; break;
                    case Slot::comma: tmp = ","; break;
                    case Slot::period: tmp = "."; break;
                }
                if (!doc.empty()) doc += ' ';
                doc += w ? *w : tmp;
                ++tokens;
            }
        }
        docs.push_back(std::move(doc));
    }
    return docs;
}

}  // namespace ki
