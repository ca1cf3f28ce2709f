#include "ki/masking.hpp"

#include "ki/errors.hpp"
#include "ki/rng.hpp"

namespace ki {

MaskedBatch apply_masking(const Corpus& corpus, std::span<const size_t> sequence_indices,
                          double mask_rate, uint64_t seed, Objective objective) {
    require(mask_rate >= 0.0 && mask_rate <= 1.0, Errc::InvalidArgument,
            "mask_rate must lie in [0,1]");
    const int S = corpus.seq_len;
    MaskedBatch mb;
    mb.batch = int(sequence_indices.size());
    mb.seq_len = S;
    mb.input_ids.resize(size_t(mb.batch) * S);
    mb.target_ids.resize(size_t(mb.batch) * S);
    mb.loss_positions.resize(size_t(mb.batch));

    for (int b = 0; b < mb.batch; ++b) {
        size_t si = sequence_indices[size_t(b)];
        const int32_t* seq = corpus.sequence(si);
        mb.seq_ids.push_back(corpus.seq_ids[si]);
        mb.domain_tags.push_back(corpus.domains[si]);
        int32_t* in = mb.input_ids.data() + size_t(b) * S;
        int32_t* tgt = mb.target_ids.data() + size_t(b) * S;

        if (objective == Objective::clm) {
            for (int j = 0; j < S; ++j) in[j] = seq[j];
            for (int j = 0; j < S - 1; ++j) {
                tgt[j] = seq[j + 1];
                mb.loss_positions[size_t(b)].push_back(j);
            }
            tgt[S - 1] = seq[S - 1];  // unused; no loss on the last position
            continue;
        }

        Rng rng(derive_seed(seed, corpus.seq_ids[si]));
        for (int j = 0; j < S; ++j) {
            in[j] = seq[j];
            tgt[j] = seq[j];
            double u = rng.uniform();  // one selection draw per position
            if (!Vocab::maskable(seq[j]) || u >= mask_rate) continue;
            mb.loss_positions[size_t(b)].push_back(j);
            double r = rng.uniform();
            if (r < 0.8) {
                in[j] = Vocab::kMask;
            } else if (r < 0.9) {
                in[j] = int32_t(rng.below(uint64_t(corpus.vocab_size)));
            }  // else keep the original token
        }
    }

    require(mb.total_loss_positions() > 0, Errc::EmptyLossSupport,
            "batch has no loss positions");
    return mb;
}

}  // namespace ki
