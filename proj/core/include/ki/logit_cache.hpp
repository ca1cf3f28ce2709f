#ifndef KI_LOGIT_CACHE_HPP
#define KI_LOGIT_CACHE_HPP

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "ki/corpus.hpp"
#include "ki/distill.hpp"
#include "ki/hash.hpp"
#include "ki/masking.hpp"
#include "ki/model.hpp"

namespace ki {

struct CacheHeader {
    uint16_t version = 1;
    Objective objective = Objective::mlm;
    uint32_t vocab_size = 0;
    uint16_t top_k = 0;
    float tau = 0;
    uint64_t mask_seed = 0;
    Sha256 teacher_hash{};
};

// Offline store of teacher top-K distributions keyed by (seq_id, position).
// Immutable once built or loaded; concurrent readers are fine.
class LogitCache {
public:
    CacheHeader header;

    void add(uint64_t seq_id, int position, const SparseDistribution& dist);
    bool contains(uint64_t seq_id, int position) const;
    SparseDistribution lookup(uint64_t seq_id, int position) const;

    size_t num_sequences() const { return order_.size(); }
    size_t num_positions() const;
    const std::vector<uint64_t>& sequence_order() const { return order_; }

    bool operator==(const LogitCache& other) const;

private:
    friend void write_cache(const LogitCache&, const std::string&);
    friend LogitCache read_cache(const std::string&);

    // flat per-sequence layout: positions sorted ascending, entries packed
    struct SeqBlock {
        std::vector<uint16_t> positions;
        std::vector<uint32_t> offsets;  // positions.size() + 1, into ids/probs
        std::vector<int32_t> ids;
        std::vector<float> probs;
    };
    std::unordered_map<uint64_t, SeqBlock> seqs_;
    std::vector<uint64_t> order_;  // insertion order, preserved by serialization
};

// Reconstructs each train sequence's masked batch under (mask_seed,
// mask_rate, objective), runs the teacher in eval mode and stores the
// tempered, truncated distribution at every loss position. Deterministic.
LogitCache precompute_cache(const Params<float>& teacher_params, const ModelConfig& teacher_config,
                            const Corpus& corpus, uint64_t mask_seed, double tau, int top_k,
                            const Sha256& teacher_hash, double mask_rate = 0.15,
                            const std::optional<std::string>& domain_filter = std::nullopt);

void write_cache(const LogitCache& cache, const std::string& path);
LogitCache read_cache(const std::string& path);

}  // namespace ki

#endif
