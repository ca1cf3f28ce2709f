#ifndef KI_MASKING_HPP
#define KI_MASKING_HPP

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "ki/corpus.hpp"

namespace ki {

enum class Objective : uint8_t { mlm = 0, clm = 1 };

inline const char* objective_name(Objective o) { return o == Objective::mlm ? "mlm" : "clm"; }

struct MaskedBatch {
    int batch = 0, seq_len = 0;
    std::vector<int32_t> input_ids;               // [batch * seq_len]
    std::vector<int32_t> target_ids;              // [batch * seq_len]
    std::vector<std::vector<int>> loss_positions; // per example
    std::vector<std::string> domain_tags;
    std::vector<uint64_t> seq_ids;

    const int32_t* input(int b) const { return input_ids.data() + size_t(b) * seq_len; }
    const int32_t* target(int b) const { return target_ids.data() + size_t(b) * seq_len; }
    size_t total_loss_positions() const {
        size_t n = 0;
        for (const auto& lp : loss_positions) n += lp.size();
        return n;
    }
};

// Static masking: the pattern for a sequence depends only on (seed, seq_id),
// never on batch composition, so offline teacher logits line up with
// training inputs. MLM selects non-special positions at mask_rate and
// corrupts them 80/10/10 (MASK / random token / unchanged); CLM shifts
// targets left and puts loss on the first seq_len-1 positions.
MaskedBatch apply_masking(const Corpus& corpus, std::span<const size_t> sequence_indices,
                          double mask_rate, uint64_t seed, Objective objective);

}  // namespace ki

#endif
