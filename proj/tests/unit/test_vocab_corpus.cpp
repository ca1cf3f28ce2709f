#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <set>

#include "ki/corpus.hpp"
#include "ki/errors.hpp"

using namespace ki;

namespace {
std::vector<std::string> docs_of_tokens(size_t n_tokens, int distinct) {
    // round-robin words w0..w<distinct-1>, earlier words more frequent
    std::vector<std::string> docs;
    std::string doc;
    for (size_t i = 0; i < n_tokens; ++i) {
        int w = int(i % size_t(distinct));
        doc += "w" + std::to_string(w) + " ";
        if (doc.size() > 4000) docs.push_back(std::exchange(doc, std::string()));
    }
    if (!doc.empty()) docs.push_back(doc);
    return docs;
}

std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("build_vocab keeps the most frequent tokens with specials in front") {
    std::vector<std::string> docs = {"a a b"};
    Vocab v = build_vocab(docs, 7);
    REQUIRE(v.size() == 7);
    CHECK(v.tokens[0] == "<pad>");
    CHECK(v.tokens[1] == "<unk>");
    CHECK(v.tokens[2] == "<mask>");
    CHECK(v.tokens[3] == "<bos>");
    CHECK(v.tokens[4] == "<eos>");
    CHECK(v.tokens[5] == "a");
    CHECK(v.tokens[6] == "b");
    CHECK(v.encode("a") == 5);
    CHECK(v.id_of.at(v.tokens[6]) == 6);
}

TEST_CASE("build_vocab truncates to the most frequent and falls back to UNK") {
    std::vector<std::string> docs = {"a a b c"};
    Vocab v = build_vocab(docs, 6);
    REQUIRE(v.size() == 6);
    CHECK(v.tokens[5] == "a");
    CHECK(v.encode("b") == Vocab::kUnk);
    CHECK(v.encode("c") == Vocab::kUnk);
}

TEST_CASE("build_vocab breaks frequency ties lexicographically") {
    std::vector<std::string> docs = {"b a"};
    Vocab v = build_vocab(docs, 6);
    CHECK(v.tokens[5] == "a");
}

TEST_CASE("build_vocab rejects an empty stream") {
    std::vector<std::string> docs = {"   ", ""};
    CHECK_THROWS_AS(build_vocab(docs, 10), Error);
    try {
        build_vocab(docs, 10);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::EmptyCorpus);
    }
}

TEST_CASE("encode_corpus packs, splits 199:1 and stays deterministic") {
    auto docs = docs_of_tokens(400 * 16, 50);
    Vocab v = build_vocab(docs, 60);
    Corpus c = encode_corpus(docs, v, 16, 9);
    CHECK(c.num_sequences() == 400);
    CHECK(c.count(Split::train) == 398);
    CHECK(c.count(Split::valid) == 2);
    CHECK_FALSE(c.no_valid_warning);

    Corpus c2 = encode_corpus(docs, v, 16, 9);
    CHECK(c.tokens == c2.tokens);
    CHECK(c.seq_ids == c2.seq_ids);
    CHECK(c.splits == c2.splits);

    Corpus c3 = encode_corpus(docs, v, 16, 10);
    CHECK(c.tokens != c3.tokens);  // different shuffle
}

TEST_CASE("encode_corpus flags a corpus too small to hold a valid split") {
    auto docs = docs_of_tokens(150 * 16, 50);
    Vocab v = build_vocab(docs, 60);
    Corpus c = encode_corpus(docs, v, 16, 1);
    CHECK(c.num_sequences() == 150);
    CHECK(c.count(Split::valid) == 0);
    CHECK(c.no_valid_warning);
}

TEST_CASE("encode_corpus conserves tokens up to the dropped remainder") {
    auto docs = docs_of_tokens(1000, 30);
    Vocab v = build_vocab(docs, 40);
    Corpus c = encode_corpus(docs, v, 48, 2);
    size_t packed = c.num_sequences() * 48;
    CHECK(packed <= 1000);
    CHECK(1000 < packed + 48);
    CHECK_THROWS_AS(encode_corpus(std::vector<std::string>{"a b"}, v, 48, 0), Error);
}

TEST_CASE("mix_domains hits the requested ratio and preserves tags") {
    auto docs_a = docs_of_tokens(301 * 8, 40);  // 301 -> 300 train + 1 valid
    auto docs_b = docs_of_tokens(100 * 8, 40);
    Vocab v = build_vocab(docs_a, 50);
    Corpus a = encode_corpus(docs_a, v, 8, 1, "wb");
    Corpus b = encode_corpus(docs_b, v, 8, 2, "cs");
    REQUIRE(a.count(Split::train) == 300);
    REQUIRE(b.count(Split::train) == 100);

    SUBCASE("1:0 degenerates to corpus_a") {
        Corpus m = mix_domains(a, b, 1, 0, 3);
        CHECK(m.tokens == a.tokens);
        CHECK(m.seq_ids == a.seq_ids);
    }
    SUBCASE("1:1 is limited by the scarcer side") {
        Corpus m = mix_domains(a, b, 1, 1, 3);
        size_t from_a = 0, from_b = 0;
        for (size_t i = 0; i < m.num_sequences(); ++i) {
            if (m.splits[i] != Split::train) continue;
            (m.domains[i] == "wb" ? from_a : from_b)++;
        }
        CHECK(from_a == 100);
        CHECK(from_b == 100);
    }
    SUBCASE("3:1 saturates both sides") {
        Corpus m = mix_domains(a, b, 3, 1, 3);
        size_t from_a = 0, from_b = 0;
        for (size_t i = 0; i < m.num_sequences(); ++i) {
            if (m.splits[i] != Split::train) continue;
            (m.domains[i] == "wb" ? from_a : from_b)++;
        }
        CHECK(from_a == 300);
        CHECK(from_b == 100);
        // fresh dense ids
        std::set<uint64_t> ids(m.seq_ids.begin(), m.seq_ids.end());
        CHECK(ids.size() == m.num_sequences());
    }
    SUBCASE("vocab mismatch is rejected") {
        Vocab v2 = build_vocab(docs_b, 30);
        Corpus b2 = encode_corpus(docs_b, v2, 8, 2, "cs");
        CHECK_THROWS_AS(mix_domains(a, b2, 1, 1, 3), Error);
    }
}

TEST_CASE("domain_proximity overlap fractions") {
    Vocab v = build_vocab(std::vector<std::string>{"w1 w2 w3 w4 x y"}, 30);
    auto corpus_of = [&](const std::string& text) {
        std::vector<std::string> docs(40, text);
        return encode_corpus(docs, v, 8, 1);
    };
    Corpus a = corpus_of("w1 w1 w1 w1 w2 w2 w2 w3 w3 w4");
    Corpus b = corpus_of("w1 w1 w1 w1 w2 w2 w2 x x y");

    CHECK(domain_proximity(a, v, a, v, 4, {}) == doctest::Approx(1.0));
    CHECK(domain_proximity(a, v, b, v, 4, {}) == doctest::Approx(0.5));  // {w1,w2} of 4
    CHECK(domain_proximity(a, v, b, v, 4, {}) ==
          doctest::Approx(domain_proximity(b, v, a, v, 4, {})));

    Corpus c = corpus_of("x x x y y");
    CHECK(domain_proximity(a, v, c, v, 4, {}) == doctest::Approx(0.0));

    std::vector<std::string> stop = {"w1", "w2", "w3", "w4", "x", "y"};
    CHECK_THROWS_AS(domain_proximity(a, v, b, v, 4, stop), Error);
}

TEST_CASE("corpus file round-trip") {
    auto docs = docs_of_tokens(64 * 8, 20);
    Vocab v = build_vocab(docs, 30);
    Corpus c = encode_corpus(docs, v, 8, 4, "demo");
    std::string vp = tmp_path("ki_test.vocab"), cp = tmp_path("ki_test.kicorpus");
    save_vocab(v, vp);
    save_corpus(c, cp);
    Vocab v2 = load_vocab(vp);
    CHECK(v2.tokens == v.tokens);
    Corpus c2 = load_corpus(cp);
    CHECK(c2.vocab_hash == v.hash_hex());
    CHECK(c2.tokens == c.tokens);
    CHECK(c2.seq_ids == c.seq_ids);
    CHECK(c2.splits == c.splits);
    CHECK(c2.domains == c.domains);
    std::remove(vp.c_str());
    std::remove(cp.c_str());
}
