#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "ki/checkpoint.hpp"
#include "ki/errors.hpp"
#include "ki/logit_cache.hpp"
#include "ki/rng.hpp"
#include "ki/objective.hpp"
#include "ki/trainer.hpp"

using namespace ki;

namespace {

Corpus trainer_corpus(size_t n_seqs, int seq_len, int V, uint64_t seed, bool two_domains = false) {
    Corpus c;
    c.seq_len = seq_len;
    c.vocab_size = V;
    c.vocab_hash = "test";
    Rng rng(seed);
    for (size_t i = 0; i < n_seqs; ++i) {
        for (int j = 0; j < seq_len; ++j)
            c.tokens.push_back(int32_t(Vocab::kNumSpecials +
                                       rng.below(uint64_t(V - Vocab::kNumSpecials))));
        c.seq_ids.push_back(i);
        c.splits.push_back((i + 1) % 5 == 0 ? Split::valid : Split::train);
        c.domains.push_back(two_domains && i % 2 == 1 ? "cs" : "wb");
    }
    return c;
}

ModelConfig small_model(int V, int S, Objective obj = Objective::mlm) {
    ModelConfig m;
    m.objective = obj;
    m.n_layers = 2;
    m.d_model = 32;
    m.n_heads = 4;
    m.d_ffn = 64;
    m.vocab_size = V;
    m.max_seq_len = S;
    m.dropout = 0.0;
    return m;
}

TrainConfig small_train(int64_t steps, uint64_t seed) {
    TrainConfig t;
    t.total_steps = steps;
    t.batch_size = 2;
    t.peak_lr = 1e-3;
    t.dropout = 0.0;
    t.schedule.strategy = ScheduleSpec::Strategy::self_only;
    t.schedule.total_steps = steps;
    t.seed = seed;
    t.eval_every = std::max<int64_t>(1, steps / 2);
    t.mask_rate = 0.25;
    t.mask_seed = 99;
    return t;
}

}  // namespace

TEST_CASE("lr_at: warmup ramp, peak at warmup end, decay to zero") {
    TrainConfig t = small_train(1000, 0);
    t.peak_lr = 4e-4;
    CHECK(lr_at(0, t) == 0.0);
    CHECK(lr_at(100, t) == doctest::Approx(4e-4).epsilon(1e-12));  // 10% of T
    CHECK(lr_at(1000, t) == 0.0);
    CHECK(lr_at(50, t) == doctest::Approx(2e-4).epsilon(1e-12));
    CHECK(lr_at(550, t) == doctest::Approx(2e-4).epsilon(1e-12));
    // piecewise linear and continuous; maximum exactly at warmup end
    double prev = 0;
    for (int64_t s = 0; s <= 100; ++s) {
        double v = lr_at(s, t);
        CHECK(v >= prev);
        prev = v;
    }
    for (int64_t s = 100; s <= 1000; s += 10) {
        double v = lr_at(s, t);
        CHECK(v <= prev + 1e-18);
        prev = v;
    }
}

TEST_CASE("evaluate_ppl: uniform predictor scores V; determinism; init band") {
    const int V = 100, S = 16;
    Corpus corpus = trainer_corpus(60, S, V, 1);
    ModelConfig m = small_model(V, S);
    Params<float> zero = init_params<float>(m, 1);
    for (auto& t : tensor_refs(zero)) t.mat->zero();
    double ppl = evaluate_ppl(zero, m, corpus, 0.25, 99);
    CHECK(ppl == doctest::Approx(100.0).epsilon(1e-4));

    Params<float> fresh = init_params<float>(m, 2);
    double p1 = evaluate_ppl(fresh, m, corpus, 0.25, 99);
    double p2 = evaluate_ppl(fresh, m, corpus, 0.25, 99);
    CHECK(p1 == p2);
    CHECK(p1 >= 0.5 * V);
    CHECK(p1 <= 2.0 * V);

    Corpus no_valid = corpus;
    for (auto& s : no_valid.splits) s = Split::train;
    CHECK_THROWS_AS(evaluate_ppl(fresh, m, no_valid, 0.25, 99), Error);
}

TEST_CASE("evaluate_ppl equals exp(self_loss) on a single-batch validation set") {
    const int V = 50, S = 12;
    Corpus corpus = trainer_corpus(10, S, V, 3);
    ModelConfig m = small_model(V, S);
    Params<float> params = init_params<float>(m, 5);
    double ppl = evaluate_ppl(params, m, corpus, 0.25, 99);

    auto valid = corpus.split_indices(Split::valid);
    MaskedBatch mb = apply_masking(corpus, valid, 0.25, 99, Objective::mlm);
    Mat<float> logits = forward_logits(params, m, mb);
    CHECK(ppl == doctest::Approx(std::exp(self_loss(logits, mb))).epsilon(1e-9));
}

TEST_CASE("train_run: T=0 emits the initial checkpoint and an empty metrics body") {
    const int V = 60, S = 12;
    Corpus corpus = trainer_corpus(30, S, V, 4);
    ModelConfig m = small_model(V, S);
    TrainConfig t = small_train(0, 7);
    t.eval_every = 1;
    std::string dir = (std::filesystem::temp_directory_path() / "ki_t0_run").string();
    std::filesystem::remove_all(dir);
    RunOptions opts;
    opts.out_dir = dir;
    RunOutputs run = train_run(t, m, corpus, nullptr, opts);
    CHECK(run.metrics.empty());
    CHECK(metrics_csv(run.metrics) == metrics_csv_header());
    CHECK(std::filesystem::exists(dir + "/ckpt_step0.kickpt"));
    Checkpoint ck = load_checkpoint(dir + "/ckpt_step0.kickpt");
    Params<float> expect = init_params<float>(m, derive_seed(7, 0x696e6974));
    CHECK(ck.params.tok_emb.v == expect.tok_emb.v);
    std::filesystem::remove_all(dir);
}

TEST_CASE("train_run determinism and schedule equivalences") {
    const int V = 60, S = 12;
    Corpus corpus = trainer_corpus(40, S, V, 5);
    ModelConfig m = small_model(V, S);

    SUBCASE("identical config+seed gives byte-identical metrics") {
        TrainConfig t = small_train(12, 11);
        RunOutputs a = train_run(t, m, corpus, nullptr);
        RunOutputs b = train_run(t, m, corpus, nullptr);
        CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
        CHECK(a.final_hash == b.final_hash);
    }
    SUBCASE("self_only equals linear with guided_steps=0, with or without a registry") {
        TrainConfig t = small_train(10, 13);
        RunOutputs a = train_run(t, m, corpus, nullptr);

        TrainConfig t2 = t;
        t2.schedule.strategy = ScheduleSpec::Strategy::linear;
        t2.schedule.guided_steps = 0;
        // an attached cache must not influence alpha=0 steps
        ModelConfig tm = small_model(V, S);
        Params<float> tp = init_params<float>(tm, 1);
        LogitCache cache = precompute_cache(tp, tm, corpus, t.mask_seed, t.tau, 4, Sha256{},
                                            t.mask_rate);
        TeacherRegistry reg;
        reg.add(TeacherRegistry::kWildcard, &cache);
        RunOutputs b = train_run(t2, m, corpus, &reg, {});
        RunOutputs c = train_run(t2, m, corpus, nullptr, {});
        CHECK(metrics_csv(a.metrics) == metrics_csv(b.metrics));
        CHECK(metrics_csv(a.metrics) == metrics_csv(c.metrics));
        CHECK(a.final_hash == b.final_hash);
    }
    SUBCASE("different seeds diverge") {
        TrainConfig t = small_train(8, 1);
        TrainConfig t2 = small_train(8, 2);
        RunOutputs a = train_run(t, m, corpus, nullptr);
        RunOutputs b = train_run(t2, m, corpus, nullptr);
        CHECK(metrics_csv(a.metrics) != metrics_csv(b.metrics));
    }
}

TEST_CASE("train_run with a teacher cache: alpha decays, rows reconstruct, ppl sane") {
    const int V = 60, S = 12;
    Corpus corpus = trainer_corpus(50, S, V, 6);
    ModelConfig m = small_model(V, S);
    ModelConfig tm = small_model(V, S);
    tm.n_layers = 1;
    Params<float> teacher = init_params<float>(tm, 21);

    TrainConfig t = small_train(16, 3);
    t.schedule.strategy = ScheduleSpec::Strategy::linear;
    t.schedule.guided_steps = 8;
    LogitCache cache =
        precompute_cache(teacher, tm, corpus, t.mask_seed, t.tau, 6, Sha256{}, t.mask_rate);
    TeacherRegistry reg;
    reg.add(TeacherRegistry::kWildcard, &cache);

    RunOutputs run = train_run(t, m, corpus, &reg);
    REQUIRE(run.metrics.size() == 16);
    CHECK(run.metrics[0].alpha == 1.0);
    CHECK(run.metrics[4].alpha == 0.5);
    CHECK(run.metrics[8].alpha == 0.0);
    CHECK(run.metrics[0].loss_ki > 0.0);
    CHECK(run.metrics[9].loss_ki == 0.0);
    int64_t prev_step = 0;
    for (const auto& r : run.metrics) {
        CHECK(r.step > prev_step);
        prev_step = r.step;
        double reconstructed = (1.0 - r.alpha) * r.loss_self + r.alpha * r.loss_ki;
        CHECK(std::fabs(reconstructed - r.loss_total) <= 1e-6);
    }
    CHECK(run.metrics.back().valid_ppl.has_value());
    CHECK(*run.metrics.back().valid_ppl > 1.0);

    SUBCASE("mask_seed mismatch is rejected") {
        TrainConfig bad = t;
        bad.mask_seed = 123456;
        CHECK_THROWS_AS(train_run(bad, m, corpus, &reg), Error);
        try {
            train_run(bad, m, corpus, &reg);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::CacheMismatch);
        }
    }
    SUBCASE("tau mismatch is rejected") {
        TrainConfig bad = t;
        bad.tau = 3.0;
        try {
            train_run(bad, m, corpus, &reg);
            CHECK(false);
        } catch (const Error& e) {
            CHECK(e.code() == Errc::TemperatureMismatch);
        }
    }
    SUBCASE("missing teacher registry is a config error") {
        CHECK_THROWS_AS(train_run(t, m, corpus, nullptr), Error);
    }
}

TEST_CASE("multi-teacher routing sends every example to its own domain cache") {
    const int V = 60, S = 12;
    Corpus corpus = trainer_corpus(60, S, V, 8, true);  // wb / cs tags
    ModelConfig m = small_model(V, S);
    ModelConfig tm = small_model(V, S);
    tm.n_layers = 1;
    Params<float> teacher_wb = init_params<float>(tm, 31);
    Params<float> teacher_cs = init_params<float>(tm, 32);

    TrainConfig t = small_train(10, 17);
    t.schedule.strategy = ScheduleSpec::Strategy::constant;
    t.schedule.constant_alpha = 1.0;

    LogitCache cache_wb = precompute_cache(teacher_wb, tm, corpus, t.mask_seed, t.tau, 5, Sha256{},
                                           t.mask_rate, std::optional<std::string>("wb"));
    LogitCache cache_cs = precompute_cache(teacher_cs, tm, corpus, t.mask_seed, t.tau, 5, Sha256{},
                                           t.mask_rate, std::optional<std::string>("cs"));

    TeacherRegistry good;
    good.add("wb", &cache_wb);
    good.add("cs", &cache_cs);
    RunOutputs run = train_run(t, m, corpus, &good);  // every lookup resolves
    CHECK(run.metrics.size() == 10);

    // swapped registry routes wb examples into the cs-only cache
    TeacherRegistry swapped;
    swapped.add("wb", &cache_cs);
    swapped.add("cs", &cache_wb);
    try {
        train_run(t, m, corpus, &swapped);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::CacheMismatch);
    }
}

TEST_CASE("numeric failure aborts with an error") {
    const int V = 60, S = 12;
    Corpus corpus = trainer_corpus(30, S, V, 9);
    ModelConfig m = small_model(V, S);
    TrainConfig t = small_train(30, 2);
    t.peak_lr = 1e20;  // guaranteed blow-up
    try {
        train_run(t, m, corpus, nullptr);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::NumericFailure);
    }
}

TEST_CASE("chain_generations: lineage bookkeeping and degenerate chain") {
    const int V = 60, S = 12;
    Corpus corpus = trainer_corpus(40, S, V, 10);
    ModelConfig g1 = small_model(V, S);
    g1.n_layers = 1;
    g1.d_model = 16;
    g1.n_heads = 2;
    g1.d_ffn = 32;
    ModelConfig g2 = small_model(V, S);

    TrainConfig t1 = small_train(6, 41);
    TrainConfig t2 = small_train(6, 42);
    t2.schedule.strategy = ScheduleSpec::Strategy::linear;
    t2.schedule.guided_steps = 3;

    SUBCASE("a single-stage chain equals a plain self-learning run") {
        ChainResult chain = chain_generations(std::vector<ChainStage>{{g1, t1, -1}}, corpus);
        RunOutputs direct = train_run(t1, g1, corpus, nullptr);
        CHECK(chain.generations.size() == 1);
        CHECK(chain.lineage[0].teacher_id.empty());
        CHECK(chain.generations[0].final_hash == direct.final_hash);
    }
    SUBCASE("two generations record the teacher hash") {
        ChainResult chain =
            chain_generations(std::vector<ChainStage>{{g1, t1, -1}, {g2, t2, -1}}, corpus);
        REQUIRE(chain.lineage.size() == 2);
        CHECK(chain.lineage[1].teacher_id == to_hex(chain.generations[0].final_hash));
        CHECK(chain.lineage[1].guided_steps == 3);
        CHECK(chain.lineage[0].corpus_id == chain.lineage[1].corpus_id);
        CHECK(chain.generations[1].metrics[0].loss_ki > 0.0);
    }
    SUBCASE("skip chains select an explicit earlier teacher") {
        ModelConfig g3 = small_model(V, S);
        TrainConfig t3 = small_train(6, 43);
        t3.schedule.strategy = ScheduleSpec::Strategy::linear;
        t3.schedule.guided_steps = 3;
        ChainResult full = chain_generations(
            std::vector<ChainStage>{{g1, t1, -1}, {g2, t2, -1}, {g3, t3, -1}}, corpus);
        ChainResult skip =
            chain_generations(std::vector<ChainStage>{{g1, t1, -1}, {g3, t3, 0}}, corpus);
        CHECK(full.lineage.size() == 3);
        CHECK(skip.lineage.size() == 2);
        CHECK(skip.lineage[1].teacher_id == to_hex(skip.generations[0].final_hash));
    }
}

TEST_CASE("adapt_domain: zero steps leaves the PPLs unchanged; reports all four") {
    const int V = 60, S = 12;
    Corpus source = trainer_corpus(40, S, V, 12);
    Corpus target = trainer_corpus(40, S, V, 13);
    ModelConfig m = small_model(V, S);
    Params<float> base = init_params<float>(m, 50);

    TrainConfig t = small_train(0, 3);
    t.eval_every = 1;
    AdaptResult r = adapt_domain(base, m, target, nullptr, t, source);
    CHECK(r.target_ppl_before == r.target_ppl_after);
    CHECK(r.source_ppl_before == r.source_ppl_after);
    CHECK(r.target_ppl_before > 0);
    CHECK(r.source_ppl_before > 0);

    TrainConfig t2 = small_train(5, 3);
    AdaptResult r2 = adapt_domain(base, m, target, nullptr, t2, source);
    CHECK(r2.target_ppl_after != r2.target_ppl_before);
    CHECK(r2.metrics.size() == 5);
}

TEST_CASE("checkpoint round-trip preserves weights and config") {
    ModelConfig m = small_model(90, 10, Objective::clm);
    Params<float> p = init_params<float>(m, 77);
    std::string path = (std::filesystem::temp_directory_path() / "ki_ck.kickpt").string();
    Sha256 h = save_checkpoint(path, m, p);
    Checkpoint ck = load_checkpoint(path);
    CHECK(ck.hash == h);
    CHECK(ck.config.objective == Objective::clm);
    CHECK(ck.config.vocab_size == 90);
    auto ra = tensor_refs(p), rb = tensor_refs(ck.params);
    for (size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].mat->v == rb[i].mat->v);
    std::remove(path.c_str());
    CHECK_THROWS_AS(load_checkpoint(path), Error);
}
