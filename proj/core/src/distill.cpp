#include "ki/distill.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "ki/errors.hpp"

namespace ki {

void SparseDistribution::validate(int32_t vocab_size) const {
    require(!entries.empty(), Errc::FormatError, "empty sparse distribution");
    double sum = 0;
    for (size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        require(e.token_id >= 0 && e.token_id < vocab_size, Errc::VocabMismatch,
                "sparse distribution token id out of range");
        require(e.prob > 0.0, Errc::FormatError, "sparse distribution probability not positive");
        if (i > 0) {
            const auto& prev = entries[i - 1];
            require(prev.prob > e.prob || (prev.prob == e.prob && prev.token_id < e.token_id),
                    Errc::FormatError, "sparse distribution not sorted");
        }
        sum += e.prob;
    }
    require(std::fabs(sum - 1.0) <= 1e-6, Errc::FormatError,
            "sparse distribution does not sum to 1");
}

void SparseDistribution::quantize_to_f32() {
    for (auto& e : entries) e.prob = double(float(e.prob));
}

namespace {
template <typename T>
std::vector<double> softmax_impl(std::span<const T> logits, double tau) {
    require(tau > 0.0, Errc::InvalidTemperature, "temperature must be positive");
    require(!logits.empty(), Errc::InvalidArgument, "empty logits row");
    double mx = -std::numeric_limits<double>::infinity();
    for (T z : logits) {
        require(std::isfinite(double(z)), Errc::NumericFailure, "non-finite logit");
        mx = std::max(mx, double(z));
    }
    std::vector<double> p(logits.size());
    double sum = 0;
    for (size_t i = 0; i < logits.size(); ++i) {
        p[i] = std::exp((double(logits[i]) - mx) / tau);
        sum += p[i];
    }
    for (auto& v : p) v /= sum;
    return p;
}
}  // namespace

std::vector<double> temperature_softmax(std::span<const double> logits, double tau) {
    return softmax_impl(logits, tau);
}
std::vector<double> temperature_softmax(std::span<const float> logits, double tau) {
    return softmax_impl(logits, tau);
}

double kl_divergence(std::span<const double> p, std::span<const double> q) {
    require(p.size() == q.size(), Errc::SupportMismatch, "p and q differ in length");
    double psum = 0, kl = 0;
    for (size_t i = 0; i < p.size(); ++i) {
        require(p[i] >= 0.0, Errc::InvalidArgument, "negative probability in p");
        psum += p[i];
        if (p[i] == 0.0) continue;  // 0 * ln 0 := 0
        require(q[i] > 0.0, Errc::SupportMismatch, "q is zero on p's support");
        kl += p[i] * std::log(p[i] / q[i]);
    }
    require(std::fabs(psum - 1.0) <= 1e-6, Errc::InvalidArgument, "p does not sum to 1");
    return kl;
}

double kl_divergence(const SparseDistribution& p, std::span<const double> q) {
    double qmass = 0;
    for (const auto& e : p.entries) {
        require(size_t(e.token_id) < q.size(), Errc::SupportMismatch,
                "support token outside q's domain");
        require(q[size_t(e.token_id)] > 0.0, Errc::SupportMismatch, "q is zero on p's support");
        qmass += q[size_t(e.token_id)];
    }
    double psum = 0, kl = 0;
    for (const auto& e : p.entries) {
        psum += e.prob;
        kl += e.prob * std::log(e.prob / (q[size_t(e.token_id)] / qmass));
    }
    require(std::fabs(psum - 1.0) <= 1e-6, Errc::InvalidArgument, "p does not sum to 1");
    return kl;
}

namespace {
// KL against the student's tau-softmax restricted to the teacher's support:
// log q~_k = z_k/tau - logsumexp_{j in support}(z_j/tau).
template <typename T>
double ki_loss_impl(std::span<const T> student_logits, const SparseDistribution& teacher,
                    double tau) {
    require(tau > 0.0, Errc::InvalidTemperature, "temperature must be positive");
    require(!teacher.entries.empty(), Errc::SupportMismatch, "teacher support is empty");
    double mx = -std::numeric_limits<double>::infinity();
    for (const auto& e : teacher.entries) {
        require(size_t(e.token_id) < student_logits.size(), Errc::SupportMismatch,
                "teacher support outside student vocabulary");
        mx = std::max(mx, double(student_logits[size_t(e.token_id)]) / tau);
    }
    double sum = 0;
    for (const auto& e : teacher.entries)
        sum += std::exp(double(student_logits[size_t(e.token_id)]) / tau - mx);
    double lse = mx + std::log(sum);
    double kl = 0;
    for (const auto& e : teacher.entries) {
        if (e.prob <= 0.0) continue;  // 0 * ln 0 := 0; the id still widens the support
        double log_q = double(student_logits[size_t(e.token_id)]) / tau - lse;
        kl += e.prob * (std::log(e.prob) - log_q);
    }
    double v = tau * tau * kl;
    require(std::isfinite(v), Errc::NumericFailure, "non-finite distillation loss");
    return std::max(v, 0.0);
}
}  // namespace

double ki_loss(std::span<const float> student_logits_row, const SparseDistribution& teacher,
               double tau) {
    return ki_loss_impl(student_logits_row, teacher, tau);
}
double ki_loss(std::span<const double> student_logits_row, const SparseDistribution& teacher,
               double tau) {
    return ki_loss_impl(student_logits_row, teacher, tau);
}

double combined_loss(double l_self, double l_ki, double alpha_t) {
    require(std::isfinite(l_self) && std::isfinite(l_ki), Errc::NumericFailure,
            "non-finite loss term");
    require(alpha_t >= 0.0 && alpha_t <= 1.0, Errc::InvalidAlpha, "alpha must lie in [0,1]");
    return (1.0 - alpha_t) * l_self + alpha_t * l_ki;
}

SparseDistribution topk_truncate(std::span<const double> probs, int k) {
    require(k >= 1, Errc::InvalidK, "K must be positive");
    double total = std::accumulate(probs.begin(), probs.end(), 0.0);
    require(std::fabs(total - 1.0) <= 1e-6, Errc::InvalidArgument,
            "input probabilities do not sum to 1");

    std::vector<int32_t> ids(probs.size());
    std::iota(ids.begin(), ids.end(), 0);
    size_t keep = std::min(size_t(k), probs.size());
    // descending probability, ascending id on ties
    auto better = [&](int32_t a, int32_t b) {
        return probs[size_t(a)] > probs[size_t(b)] || (probs[size_t(a)] == probs[size_t(b)] && a < b);
    };
    std::partial_sort(ids.begin(), ids.begin() + std::ptrdiff_t(keep), ids.end(), better);

    SparseDistribution out;
    out.entries.reserve(keep);
    double mass = 0;
    for (size_t i = 0; i < keep; ++i) mass += probs[size_t(ids[i])];
    require(mass > 0.0, Errc::InvalidArgument, "kept probability mass is zero");
    for (size_t i = 0; i < keep; ++i) {
        if (probs[size_t(ids[i])] <= 0.0) continue;  // keep entries strictly positive
        out.entries.push_back({ids[i], probs[size_t(ids[i])] / mass});
    }
    return out;
}

std::vector<double> label_smooth(int32_t target_id, double alpha, int vocab_size) {
    require(alpha >= 0.0 && alpha < 1.0, Errc::InvalidAlpha, "alpha must lie in [0,1)");
    require(vocab_size >= 2, Errc::InvalidArgument, "vocab_size must be >= 2");
    require(target_id >= 0 && target_id < vocab_size, Errc::InvalidArgument,
            "target id out of range");
    std::vector<double> y(size_t(vocab_size), alpha / double(vocab_size - 1));
    y[size_t(target_id)] = 1.0 - alpha;
    return y;
}

}  // namespace ki
