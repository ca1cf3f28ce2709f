#ifndef KI_OBJECTIVE_HPP
#define KI_OBJECTIVE_HPP

#include <vector>

#include "ki/distill.hpp"
#include "ki/masking.hpp"
#include "ki/model.hpp"

namespace ki {

// Combined-loss description: total = (1-alpha)*L_self + alpha*L_ki, both
// mean-reduced over the same loss positions. ki_targets, when alpha > 0,
// holds one teacher distribution per loss-position row, in the forward
// row order (examples ascending, positions ascending within an example).
struct LossSpec {
    double alpha = 0.0;
    double tau = 1.0;
    double label_smoothing = 0.0;
    const std::vector<SparseDistribution>* ki_targets = nullptr;
};

struct LossValues {
    double loss_self = 0.0;
    double loss_ki = 0.0;
    double loss_total = 0.0;
    size_t positions = 0;
};

// Cross-entropy of the true targets at tau=1, mean-reduced over the
// batch's loss positions. logits holds one row per (example, position)
// pair, i.e. the output of forward_logits.
double self_loss(const Mat<float>& full_logits, const MaskedBatch& batch);
double self_loss(const Mat<double>& full_logits, const MaskedBatch& batch);

// Loss values and d(total)/d(logits) for logits restricted to loss
// positions. All per-row math accumulates in 64-bit.
template <typename T>
LossValues loss_and_dlogits(const Mat<T>& logits_lp, const MaskedBatch& batch,
                            const LossSpec& spec, Mat<T>& dlogits);

template <typename T>
struct GradResult {
    Params<T> grads;
    LossValues losses;
};

// Exact gradients of the combined loss with respect to every parameter.
template <typename T>
GradResult<T> loss_gradients(const Params<T>& params, const ModelConfig& config,
                             const MaskedBatch& batch, const LossSpec& spec);

}  // namespace ki

#endif
