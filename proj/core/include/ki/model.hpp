#ifndef KI_MODEL_HPP
#define KI_MODEL_HPP

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ki/linalg.hpp"
#include "ki/masking.hpp"
#include "ki/rng.hpp"

namespace ki {

struct ModelConfig {
    Objective objective = Objective::mlm;
    int n_layers = 4;
    int d_model = 256;
    int n_heads = 8;
    int d_ffn = 1024;
    int vocab_size = 0;
    int max_seq_len = 128;
    double dropout = 0.1;

    void validate() const;
    int head_dim() const { return d_model / n_heads; }
};

// Closed-form trainable-parameter count:
//   V*d + S*d + L*(4d^2 + 4d + 2*d*ffn + d + ffn + 4d)
// Pre-norm blocks, tied input/output embedding, no extra head bias.
int64_t param_count(const ModelConfig& c);

enum class TensorKind : uint8_t { weight, bias, norm };

template <typename T>
struct LayerParams {
    Mat<T> ln1_g, ln1_b;
    Mat<T> wq, bq, wk, bk, wv, bv, wo, bo;
    Mat<T> ln2_g, ln2_b;
    Mat<T> w_up, b_up, w_down, b_down;
};

template <typename T>
struct Params {
    Mat<T> tok_emb;  // [V, d]; also the tied output projection
    Mat<T> pos_emb;  // [max_seq_len, d]
    std::vector<LayerParams<T>> layers;

    void init_shapes(const ModelConfig& c);
    int64_t numel() const;
};

template <typename T>
struct TensorRef {
    std::string name;
    TensorKind kind;
    Mat<T>* mat;
};

// Fixed tensor order shared by init, checkpoints and the optimizer.
template <typename T>
std::vector<TensorRef<T>> tensor_refs(Params<T>& p) {
    std::vector<TensorRef<T>> r;
    r.push_back({"tok_emb", TensorKind::weight, &p.tok_emb});
    r.push_back({"pos_emb", TensorKind::weight, &p.pos_emb});
    for (size_t l = 0; l < p.layers.size(); ++l) {
        auto& lp = p.layers[l];
        std::string pre = "layer" + std::to_string(l) + ".";
        auto add = [&](const char* n, TensorKind k, Mat<T>& m) { r.push_back({pre + n, k, &m}); };
        add("ln1_g", TensorKind::norm, lp.ln1_g);
        add("ln1_b", TensorKind::norm, lp.ln1_b);
        add("wq", TensorKind::weight, lp.wq);
        add("bq", TensorKind::bias, lp.bq);
        add("wk", TensorKind::weight, lp.wk);
        add("bk", TensorKind::bias, lp.bk);
        add("wv", TensorKind::weight, lp.wv);
        add("bv", TensorKind::bias, lp.bv);
        add("wo", TensorKind::weight, lp.wo);
        add("bo", TensorKind::bias, lp.bo);
        add("ln2_g", TensorKind::norm, lp.ln2_g);
        add("ln2_b", TensorKind::norm, lp.ln2_b);
        add("w_up", TensorKind::weight, lp.w_up);
        add("b_up", TensorKind::bias, lp.b_up);
        add("w_down", TensorKind::weight, lp.w_down);
        add("b_down", TensorKind::bias, lp.b_down);
    }
    return r;
}

template <typename T>
Params<T> init_params(const ModelConfig& config, uint64_t seed);

// Full [B, S, V] logits; the contract surface for tests and evaluation.
// CLM applies a causal mask; eval mode (train=false) is deterministic.
template <typename T>
Mat<T> forward_logits(const Params<T>& params, const ModelConfig& config,
                      const MaskedBatch& batch, bool train = false, Rng* dropout_rng = nullptr);

// Activation stash for one forward pass; reused across steps.
template <typename T>
struct Workspace;

template <typename T>
Workspace<T>* workspace_new();
template <typename T>
void workspace_free(Workspace<T>*);

template <typename T>
struct WorkspaceDeleter {
    void operator()(Workspace<T>* p) const { workspace_free(p); }
};

// Training-path forward: body over all positions, head only at the batch's
// loss positions. Returns logits rows [n_loss_positions, V] in batch order.
template <typename T>
const Mat<T>& forward_at_loss_positions(const Params<T>& params, const ModelConfig& config,
                                        const MaskedBatch& batch, bool train, Rng* dropout_rng,
                                        Workspace<T>& ws);

// Exact gradients for the forward recorded in ws, given d(loss)/d(logits)
// at the loss positions. Gradients are written (not accumulated) into grads.
template <typename T>
void backward(const Params<T>& params, const ModelConfig& config, const MaskedBatch& batch,
              Workspace<T>& ws, const Mat<T>& dlogits, Params<T>& grads);

extern template struct Params<float>;
extern template struct Params<double>;

}  // namespace ki

#endif
