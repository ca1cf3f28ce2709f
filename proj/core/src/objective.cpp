#include "ki/objective.hpp"

#include <cmath>
#include <memory>

#include "ki/errors.hpp"

namespace ki {

namespace {

// -log softmax(z)[target] with optional label smoothing, plus dz = p - y.
// Returns the per-position loss; dz may be null when only the value is
// needed.
template <typename T>
double xent_row(const T* z, int V, int32_t target, double smoothing, double* dz) {
    double mx = -1e300;
    for (int k = 0; k < V; ++k) mx = std::max(mx, double(z[k]));
    double sum = 0, zsum = 0;
    for (int k = 0; k < V; ++k) {
        sum += std::exp(double(z[k]) - mx);
        zsum += double(z[k]) - mx;
    }
    double lse = mx + std::log(sum);
    double log_pt = double(z[target]) - lse;
    double loss;
    if (smoothing == 0.0) {
        loss = -log_pt;
    } else {
        // sum_k log p_k = sum_k z_k - V*lse, computed against the max-shift
        double sum_logp = zsum - V * (lse - mx);
        double off = smoothing / double(V - 1);
        loss = -(1.0 - smoothing) * log_pt - off * (sum_logp - log_pt);
    }
    if (dz) {
        double off = smoothing / double(V - 1);
        for (int k = 0; k < V; ++k) {
            double p = std::exp(double(z[k]) - lse);
            double y = (k == target) ? 1.0 - smoothing : off;
            dz[k] = p - y;
        }
    }
    return loss;
}

template <typename T>
double self_loss_impl(const Mat<T>& full_logits, const MaskedBatch& batch) {
    const int S = batch.seq_len;
    const int V = full_logits.cols;
    require(full_logits.rows == batch.batch * S, Errc::InvalidArgument,
            "logits tensor does not match the batch");
    size_t n = batch.total_loss_positions();
    require(n > 0, Errc::EmptyLossSupport, "batch has no loss positions");
    double acc = 0;
    for (int b = 0; b < batch.batch; ++b) {
        const int32_t* tgt = batch.target(b);
        for (int j : batch.loss_positions[size_t(b)]) {
            int32_t t = tgt[j];
            require(t >= 0 && t < V, Errc::VocabMismatch, "target id out of range");
            acc += xent_row(full_logits.row(b * S + j), V, t, 0.0, nullptr);
        }
    }
    return acc / double(n);
}

}  // namespace

double self_loss(const Mat<float>& full_logits, const MaskedBatch& batch) {
    return self_loss_impl(full_logits, batch);
}
double self_loss(const Mat<double>& full_logits, const MaskedBatch& batch) {
    return self_loss_impl(full_logits, batch);
}

template <typename T>
LossValues loss_and_dlogits(const Mat<T>& logits_lp, const MaskedBatch& batch,
                            const LossSpec& spec, Mat<T>& dlogits) {
    require(spec.alpha >= 0.0 && spec.alpha <= 1.0, Errc::InvalidAlpha, "alpha outside [0,1]");
    require(spec.label_smoothing >= 0.0 && spec.label_smoothing < 1.0, Errc::InvalidAlpha,
            "label smoothing outside [0,1)");
    const int V = logits_lp.cols;
    const size_t n = batch.total_loss_positions();
    require(n > 0, Errc::EmptyLossSupport, "batch has no loss positions");
    require(size_t(logits_lp.rows) == n, Errc::InvalidArgument,
            "logits rows do not match loss positions");
    const bool use_ki = spec.alpha > 0.0;
    if (use_ki) {
        require(spec.tau > 0.0, Errc::InvalidTemperature, "tau must be positive");
        require(spec.ki_targets != nullptr && spec.ki_targets->size() == n, Errc::InvalidArgument,
                "KI targets missing or misaligned");
    }
    dlogits.resize(int(n), V);

    std::vector<double> dz_self(static_cast<size_t>(V), 0.0);
    const double inv_n = 1.0 / double(n);
    LossValues out;
    out.positions = n;
    size_t row = 0;
    for (int b = 0; b < batch.batch; ++b) {
        const int32_t* tgt = batch.target(b);
        for (int j : batch.loss_positions[size_t(b)]) {
            const T* z = logits_lp.row(int(row));
            int32_t t = tgt[j];
            require(t >= 0 && t < V, Errc::VocabMismatch, "target id out of range");
            out.loss_self += xent_row(z, V, t, spec.label_smoothing, dz_self.data());
            T* dzr = dlogits.row(int(row));
            const double w_self = (1.0 - spec.alpha) * inv_n;
            for (int k = 0; k < V; ++k) dzr[k] = T(w_self * dz_self[size_t(k)]);

            if (use_ki) {
                const SparseDistribution& teacher = (*spec.ki_targets)[row];
                // student softmax at tau restricted to the teacher's support
                double mx = -1e300;
                for (const auto& e : teacher.entries) {
                    require(e.token_id >= 0 && e.token_id < V, Errc::SupportMismatch,
                            "teacher support outside vocabulary");
                    mx = std::max(mx, double(z[e.token_id]) / spec.tau);
                }
                double sum = 0;
                for (const auto& e : teacher.entries)
                    sum += std::exp(double(z[e.token_id]) / spec.tau - mx);
                double lse = mx + std::log(sum);
                double kl = 0;
                const double w_ki = spec.alpha * spec.tau * inv_n;
                for (const auto& e : teacher.entries) {
                    double log_q = double(z[e.token_id]) / spec.tau - lse;
                    if (e.prob > 0.0) kl += e.prob * (std::log(e.prob) - log_q);
                    double q = std::exp(log_q);
                    dzr[e.token_id] += T(w_ki * (q - e.prob));
                }
                out.loss_ki += spec.tau * spec.tau * std::max(kl, 0.0);
            }
            ++row;
        }
    }
    out.loss_self /= double(n);
    out.loss_ki /= double(n);
    out.loss_total = combined_loss(out.loss_self, out.loss_ki, spec.alpha);
    require(std::isfinite(out.loss_total), Errc::NumericFailure, "non-finite loss");
    return out;
}

template <typename T>
GradResult<T> loss_gradients(const Params<T>& params, const ModelConfig& config,
                             const MaskedBatch& batch, const LossSpec& spec) {
    std::unique_ptr<Workspace<T>, WorkspaceDeleter<T>> ws(workspace_new<T>());
    const Mat<T>& logits =
        forward_at_loss_positions(params, config, batch, false, nullptr, *ws);
    Mat<T> dlogits;
    GradResult<T> res;
    res.losses = loss_and_dlogits(logits, batch, spec, dlogits);
    backward(params, config, batch, *ws, dlogits, res.grads);
    return res;
}

template LossValues loss_and_dlogits<float>(const Mat<float>&, const MaskedBatch&,
                                            const LossSpec&, Mat<float>&);
template LossValues loss_and_dlogits<double>(const Mat<double>&, const MaskedBatch&,
                                             const LossSpec&, Mat<double>&);
template GradResult<float> loss_gradients<float>(const Params<float>&, const ModelConfig&,
                                                 const MaskedBatch&, const LossSpec&);
template GradResult<double> loss_gradients<double>(const Params<double>&, const ModelConfig&,
                                                   const MaskedBatch&, const LossSpec&);

}  // namespace ki
