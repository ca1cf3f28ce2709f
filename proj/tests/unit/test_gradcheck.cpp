#include <doctest.h>

#include <cmath>
#include <memory>

#include "ki/model.hpp"
#include "ki/objective.hpp"
#include "ki/rng.hpp"

using namespace ki;

namespace {

ModelConfig gradcheck_config(Objective obj) {
    ModelConfig c;
    c.objective = obj;
    c.n_layers = 1;
    c.d_model = 8;
    c.n_heads = 2;
    c.d_ffn = 32;
    c.vocab_size = 20;
    c.max_seq_len = 8;
    c.dropout = 0.0;
    return c;
}

MaskedBatch gradcheck_batch(Objective obj, Rng& rng) {
    const int B = 2, S = 6, V = 20;
    MaskedBatch mb;
    mb.batch = B;
    mb.seq_len = S;
    mb.loss_positions.resize(B);
    for (int b = 0; b < B; ++b) {
        mb.seq_ids.push_back(uint64_t(b));
        mb.domain_tags.push_back("d");
        for (int j = 0; j < S; ++j) {
            auto t = int32_t(rng.below(V));
            mb.input_ids.push_back(t);
            mb.target_ids.push_back(t);
        }
        if (obj == Objective::clm) {
            for (int j = 0; j + 1 < S; ++j) {
                mb.target_ids[size_t(b * S + j)] = mb.input_ids[size_t(b * S + j + 1)];
                mb.loss_positions[size_t(b)].push_back(j);
            }
        } else {
            mb.loss_positions[size_t(b)] = {1, 3, 4};
        }
    }
    return mb;
}

std::vector<SparseDistribution> random_targets(size_t n, int V, int K, Rng& rng) {
    std::vector<SparseDistribution> t;
    for (size_t i = 0; i < n; ++i) {
        std::vector<double> probs(static_cast<size_t>(V), 0.0);
        std::vector<int> ids(static_cast<size_t>(V));
        for (int k = 0; k < V; ++k) ids[size_t(k)] = k;
        shuffle(ids, rng);
        double sum = 0;
        for (int k = 0; k < K; ++k) sum += (probs[size_t(ids[size_t(k)])] = 0.1 + rng.uniform());
        for (auto& p : probs) p /= sum;
        t.push_back(topk_truncate(probs, K));
    }
    return t;
}

double loss_value(const Params<double>& p, const ModelConfig& cfg, const MaskedBatch& mb,
                  const LossSpec& spec) {
    std::unique_ptr<Workspace<double>, WorkspaceDeleter<double>> ws(workspace_new<double>());
    const Mat<double>& logits = forward_at_loss_positions(p, cfg, mb, false, nullptr, *ws);
    Mat<double> dl;
    return loss_and_dlogits(logits, mb, spec, dl).loss_total;
}

}  // namespace

TEST_CASE_TEMPLATE_DEFINE("analytic gradients match central finite differences", ObjTag,
                          gradcheck_objective) {
    const Objective obj = ObjTag::value;
    ModelConfig cfg = gradcheck_config(obj);
    Rng rng(obj == Objective::mlm ? 2024 : 4202);
    MaskedBatch mb = gradcheck_batch(obj, rng);

    Params<double> params = init_params<double>(cfg, 55);
    LossSpec spec;
    spec.alpha = 0.5;
    spec.tau = 2.0;
    std::vector<SparseDistribution> targets =
        random_targets(mb.total_loss_positions(), cfg.vocab_size, 5, rng);
    spec.ki_targets = &targets;

    GradResult<double> analytic = loss_gradients(params, cfg, mb, spec);
    CHECK(analytic.losses.loss_total > 0.0);

    const double h = 1e-4;
    double worst_tensor_rel = 0.0;
    auto prefs = tensor_refs(params);
    auto grefs = tensor_refs(analytic.grads);
    for (size_t ti = 0; ti < prefs.size(); ++ti) {
        Mat<double>& m = *prefs[ti].mat;
        double nd = 0, na = 0, nf = 0;
        for (size_t e = 0; e < m.size(); ++e) {
            double saved = m.v[e];
            m.v[e] = saved + h;
            double lp = loss_value(params, cfg, mb, spec);
            m.v[e] = saved - h;
            double lm = loss_value(params, cfg, mb, spec);
            m.v[e] = saved;
            double fd = (lp - lm) / (2 * h);
            double an = grefs[ti].mat->v[e];
            // element check with an absolute floor for near-cancelling entries
            CHECK(std::fabs(an - fd) <= 1e-4 * std::max(std::fabs(an), std::fabs(fd)) + 1e-7);
            nd += (an - fd) * (an - fd);
            na += an * an;
            nf += fd * fd;
        }
        double rel = std::sqrt(nd) / std::max({std::sqrt(na), std::sqrt(nf), 1e-12});
        CAPTURE(prefs[ti].name);
        CHECK(rel < 1e-4);  // per-tensor relative error
        worst_tensor_rel = std::max(worst_tensor_rel, rel);
    }
    MESSAGE("worst per-tensor gradient error (", objective_name(obj), "): ", worst_tensor_rel);
}

struct MlmTag { static constexpr Objective value = Objective::mlm; };
struct ClmTag { static constexpr Objective value = Objective::clm; };
TEST_CASE_TEMPLATE_INVOKE(gradcheck_objective, MlmTag, ClmTag);

TEST_CASE("alpha=0 gradients equal pure self-learning gradients") {
    ModelConfig cfg = gradcheck_config(Objective::mlm);
    Rng rng(77);
    MaskedBatch mb = gradcheck_batch(Objective::mlm, rng);
    Params<double> params = init_params<double>(cfg, 3);

    LossSpec self_only;  // alpha = 0, no targets
    std::vector<SparseDistribution> targets =
        random_targets(mb.total_loss_positions(), cfg.vocab_size, 5, rng);
    LossSpec zero_alpha;
    zero_alpha.alpha = 0.0;
    zero_alpha.tau = 2.0;
    zero_alpha.ki_targets = &targets;

    GradResult<double> a = loss_gradients(params, cfg, mb, self_only);
    GradResult<double> b = loss_gradients(params, cfg, mb, zero_alpha);
    auto ra = tensor_refs(a.grads), rb = tensor_refs(b.grads);
    for (size_t i = 0; i < ra.size(); ++i) CHECK(ra[i].mat->v == rb[i].mat->v);
    CHECK(a.losses.loss_total == b.losses.loss_total);
}

TEST_CASE("distillation gradient identity: d(tau^2 KL)/dz = tau (P_L - P_S) on full support") {
    const int V = 20;
    const double tau = 2.0;
    Rng rng(91);
    // one loss position, alpha = 1 -> dlogits is exactly the KI gradient
    MaskedBatch mb;
    mb.batch = 1;
    mb.seq_len = 2;
    mb.input_ids = {3, 4};
    mb.target_ids = {3, 4};
    mb.loss_positions = {{1}};
    mb.seq_ids = {0};
    mb.domain_tags = {"d"};

    Mat<double> logits(1, V);
    for (int k = 0; k < V; ++k) logits.row(0)[k] = (rng.uniform() - 0.5) * 6;

    std::vector<double> teacher_probs(V);
    double sum = 0;
    for (auto& p : teacher_probs) sum += (p = 0.05 + rng.uniform());
    for (auto& p : teacher_probs) p /= sum;
    std::vector<SparseDistribution> targets = {topk_truncate(teacher_probs, V)};

    LossSpec spec;
    spec.alpha = 1.0;
    spec.tau = tau;
    spec.ki_targets = &targets;
    Mat<double> dlogits;
    LossValues lv = loss_and_dlogits(logits, mb, spec, dlogits);

    auto p_student = temperature_softmax(std::span<const double>(logits.row(0), V), tau);
    for (int k = 0; k < V; ++k) {
        double expect = tau * (p_student[size_t(k)] - teacher_probs[size_t(k)]);
        CHECK(std::fabs(dlogits.row(0)[k] - expect) < 1e-6);
    }
    // and the loss value equals tau^2 * dense KL
    double kl = kl_divergence(std::span<const double>(teacher_probs),
                              std::span<const double>(p_student));
    CHECK(lv.loss_ki == doctest::Approx(tau * tau * kl).epsilon(1e-10));
}
