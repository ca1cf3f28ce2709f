#ifndef KI_DISTILL_HPP
#define KI_DISTILL_HPP

#include <cstdint>
#include <span>
#include <vector>

namespace ki {

// Top-K renormalized teacher distribution. Entries are sorted by descending
// probability, ties by ascending token id; probabilities are positive and
// sum to 1.
struct SparseDistribution {
    struct Entry {
        int32_t token_id;
        double prob;
    };
    std::vector<Entry> entries;

    void validate(int32_t vocab_size) const;
    // Rounds probabilities to their float32 representation (storage
    // precision), so a stored-and-reloaded cache compares bitwise equal.
    void quantize_to_f32();
};

// p_k = exp(z_k / tau) / sum_j exp(z_j / tau), max-subtracted.
std::vector<double> temperature_softmax(std::span<const double> logits, double tau);
std::vector<double> temperature_softmax(std::span<const float> logits, double tau);

// KL(p || q) in nats over dense vectors; q must be positive wherever p is.
double kl_divergence(std::span<const double> p, std::span<const double> q);
// Sparse form: the sum runs over p's support and q is first renormalized
// over that support.
double kl_divergence(const SparseDistribution& p, std::span<const double> q);

// tau^2 * KL(teacher || student-at-tau restricted and renormalized to the
// teacher's support). student_logits_row holds the full V logits.
double ki_loss(std::span<const float> student_logits_row, const SparseDistribution& teacher,
               double tau);
double ki_loss(std::span<const double> student_logits_row, const SparseDistribution& teacher,
               double tau);

// (1 - alpha) * l_self + alpha * l_ki
double combined_loss(double l_self, double l_ki, double alpha_t);

// Keeps the K largest probabilities (ties by ascending token id) and
// renormalizes them.
SparseDistribution topk_truncate(std::span<const double> probs, int k);

// Smoothed one-hot: target gets 1-alpha, every other class alpha/(V-1).
std::vector<double> label_smooth(int32_t target_id, double alpha, int vocab_size);

}  // namespace ki

#endif
