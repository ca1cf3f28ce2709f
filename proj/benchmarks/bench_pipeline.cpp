#include <benchmark/benchmark.h>

#include <memory>

#include "ki/logit_cache.hpp"
#include "ki/masking.hpp"
#include "ki/model.hpp"
#include "ki/objective.hpp"

namespace {

using namespace ki;

Corpus bench_corpus(size_t n_seqs, int seq_len, int vocab) {
    Corpus c;
    c.seq_len = seq_len;
    c.vocab_size = vocab;
    c.vocab_hash = "bench";
    Rng rng(7);
    for (size_t i = 0; i < n_seqs; ++i) {
        for (int j = 0; j < seq_len; ++j)
            c.tokens.push_back(
                int32_t(Vocab::kNumSpecials + rng.below(uint64_t(vocab - Vocab::kNumSpecials))));
        c.seq_ids.push_back(i);
        c.splits.push_back(Split::train);
        c.domains.push_back("bench");
    }
    return c;
}

ModelConfig student_config(int vocab, int seq_len) {
    ModelConfig m;
    m.n_layers = 4;
    m.d_model = 256;
    m.n_heads = 8;
    m.d_ffn = 1024;
    m.vocab_size = vocab;
    m.max_seq_len = seq_len;
    m.dropout = 0.0;
    return m;
}

// one full training step (mask, forward, loss, backward) at the default
// desk-scale student shape
void BM_TrainStep(benchmark::State& state) {
    const int batch = int(state.range(0)), seq_len = 48, vocab = 1024;
    Corpus corpus = bench_corpus(256, seq_len, vocab);
    ModelConfig cfg = student_config(vocab, seq_len);
    Params<float> params = init_params<float>(cfg, 1);
    Params<float> grads;
    std::unique_ptr<Workspace<float>, WorkspaceDeleter<float>> ws(workspace_new<float>());
    Mat<float> dlogits;
    std::vector<size_t> idx(static_cast<size_t>(batch), 0);
    uint64_t at = 0;
    for (auto _ : state) {
        for (auto& i : idx) i = (at++) % corpus.num_sequences();
        MaskedBatch mb = apply_masking(corpus, idx, 0.15, 3, Objective::mlm);
        const Mat<float>& logits = forward_at_loss_positions(params, cfg, mb, false, nullptr, *ws);
        LossSpec spec;
        LossValues lv = loss_and_dlogits(logits, mb, spec, dlogits);
        backward(params, cfg, mb, *ws, dlogits, grads);
        benchmark::DoNotOptimize(lv.loss_total);
    }
    state.SetItemsProcessed(state.iterations() * batch * seq_len);
}
BENCHMARK(BM_TrainStep)->Arg(1)->Arg(4)->Unit(benchmark::kMillisecond);

void BM_MaskingThroughput(benchmark::State& state) {
    Corpus corpus = bench_corpus(512, 48, 1024);
    std::vector<size_t> idx(64);
    for (size_t i = 0; i < idx.size(); ++i) idx[i] = i;
    for (auto _ : state) {
        MaskedBatch mb = apply_masking(corpus, idx, 0.15, 9, Objective::mlm);
        benchmark::DoNotOptimize(mb.total_loss_positions());
    }
    state.SetItemsProcessed(state.iterations() * int64_t(idx.size()) * 48);
}
BENCHMARK(BM_MaskingThroughput);

void BM_CacheLookup(benchmark::State& state) {
    const int vocab = 1024, seq_len = 48;
    Corpus corpus = bench_corpus(64, seq_len, vocab);
    ModelConfig tcfg;
    tcfg.n_layers = 2;
    tcfg.d_model = 128;
    tcfg.n_heads = 4;
    tcfg.d_ffn = 512;
    tcfg.vocab_size = vocab;
    tcfg.max_seq_len = seq_len;
    Params<float> teacher = init_params<float>(tcfg, 2);
    LogitCache cache = precompute_cache(teacher, tcfg, corpus, 3, 2.0, 10, Sha256{}, 0.15);
    std::vector<std::pair<uint64_t, int>> keys;
    for (size_t i = 0; i < corpus.num_sequences(); ++i)
        for (int j = 0; j < seq_len; ++j)
            if (cache.contains(corpus.seq_ids[i], j)) keys.emplace_back(corpus.seq_ids[i], j);
    size_t at = 0;
    for (auto _ : state) {
        auto [id, pos] = keys[at++ % keys.size()];
        benchmark::DoNotOptimize(cache.lookup(id, pos));
    }
}
BENCHMARK(BM_CacheLookup);

}  // namespace
