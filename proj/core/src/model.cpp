#include "ki/model.hpp"

#include <cmath>
#include <cstring>
#include <memory>

#include "ki/errors.hpp"

namespace ki {

void ModelConfig::validate() const {
    require(n_layers >= 1, Errc::ConfigError, "n_layers must be >= 1");
    require(d_model >= 1 && n_heads >= 1 && d_model % n_heads == 0, Errc::ConfigError,
            "d_model must be divisible by n_heads");
    require(d_ffn >= 1, Errc::ConfigError, "d_ffn must be >= 1");
    require(vocab_size >= 6, Errc::ConfigError, "vocab_size must be >= 6");
    require(max_seq_len >= 2, Errc::ConfigError, "max_seq_len must be >= 2");
    require(dropout >= 0.0 && dropout < 1.0, Errc::ConfigError, "dropout must lie in [0,1)");
}

int64_t param_count(const ModelConfig& c) {
    int64_t d = c.d_model, ffn = c.d_ffn;
    int64_t per_layer = 4 * d * d + 4 * d + 2 * d * ffn + d + ffn + 4 * d;
    return int64_t(c.vocab_size) * d + int64_t(c.max_seq_len) * d + c.n_layers * per_layer;
}

template <typename T>
void Params<T>::init_shapes(const ModelConfig& c) {
    int d = c.d_model, ffn = c.d_ffn;
    tok_emb.resize(c.vocab_size, d);
    pos_emb.resize(c.max_seq_len, d);
    layers.assign(size_t(c.n_layers), LayerParams<T>{});
    for (auto& l : layers) {
        l.ln1_g.resize(1, d);
        l.ln1_b.resize(1, d);
        l.wq.resize(d, d);
        l.bq.resize(1, d);
        l.wk.resize(d, d);
        l.bk.resize(1, d);
        l.wv.resize(d, d);
        l.bv.resize(1, d);
        l.wo.resize(d, d);
        l.bo.resize(1, d);
        l.ln2_g.resize(1, d);
        l.ln2_b.resize(1, d);
        l.w_up.resize(d, ffn);
        l.b_up.resize(1, ffn);
        l.w_down.resize(ffn, d);
        l.b_down.resize(1, d);
    }
}

template <typename T>
int64_t Params<T>::numel() const {
    int64_t n = 0;
    auto& self = const_cast<Params<T>&>(*this);
    for (auto& t : tensor_refs(self)) n += int64_t(t.mat->size());
    return n;
}

template <typename T>
Params<T> init_params(const ModelConfig& config, uint64_t seed) {
    config.validate();
    Params<T> p;
    p.init_shapes(config);
    uint64_t index = 0;
    for (auto& t : tensor_refs(p)) {
        Rng rng(derive_seed(seed, 0x696e6974ULL, index++));  // "init"
        switch (t.kind) {
            case TensorKind::weight:
                for (auto& v : t.mat->v) v = T(rng.truncated_normal(0.02));
                break;
            case TensorKind::bias:
                t.mat->zero();
                break;
            case TensorKind::norm: {
                bool gain = t.name.ends_with("_g");
                for (auto& v : t.mat->v) v = gain ? T(1) : T(0);
                break;
            }
        }
    }
    return p;
}

// ---------------------------------------------------------------------------
// kernels

namespace {

constexpr double kLnEps = 1e-5;

template <typename T>
T gelu(T x) {
    const T c0 = T(0.7978845608028654);  // sqrt(2/pi)
    const T c1 = T(0.044715);
    return T(0.5) * x * (T(1) + std::tanh(c0 * (x + c1 * x * x * x)));
}

template <typename T>
T gelu_grad(T x) {
    const T c0 = T(0.7978845608028654);
    const T c1 = T(0.044715);
    T u = c0 * (x + c1 * x * x * x);
    T t = std::tanh(u);
    T du = c0 * (T(1) + T(3) * c1 * x * x);
    return T(0.5) * (T(1) + t) + T(0.5) * x * (T(1) - t * t) * du;
}

// y = ln(x) rowwise; stores mean and rstd for backward
template <typename T>
void layernorm_forward(const Mat<T>& x, const Mat<T>& g, const Mat<T>& b, Mat<T>& y,
                       std::vector<T>& mean, std::vector<T>& rstd) {
    const int R = x.rows, C = x.cols;
    mean.resize(size_t(R));
    rstd.resize(size_t(R));
    for (int i = 0; i < R; ++i) {
        const T* xi = x.row(i);
        double m = 0;
        for (int c = 0; c < C; ++c) m += double(xi[c]);
        m /= C;
        double var = 0;
        for (int c = 0; c < C; ++c) {
            double dv = double(xi[c]) - m;
            var += dv * dv;
        }
        var /= C;
        double rs = 1.0 / std::sqrt(var + kLnEps);
        mean[size_t(i)] = T(m);
        rstd[size_t(i)] = T(rs);
        T* yi = y.row(i);
        for (int c = 0; c < C; ++c)
            yi[c] = T((double(xi[c]) - m) * rs) * g.v[size_t(c)] + b.v[size_t(c)];
    }
}

template <typename T>
void layernorm_backward(const Mat<T>& x, const Mat<T>& g, const std::vector<T>& mean,
                        const std::vector<T>& rstd, const Mat<T>& dy, Mat<T>& dx, Mat<T>& dg,
                        Mat<T>& db) {
    const int R = x.rows, C = x.cols;
    for (int i = 0; i < R; ++i) {
        const T* xi = x.row(i);
        const T* dyi = dy.row(i);
        T* dxi = dx.row(i);
        const double m = double(mean[size_t(i)]);
        const double rs = double(rstd[size_t(i)]);
        double sum_dyg = 0, sum_dyg_xhat = 0;
        for (int c = 0; c < C; ++c) {
            double xh = (double(xi[c]) - m) * rs;
            double dyg = double(dyi[c]) * double(g.v[size_t(c)]);
            sum_dyg += dyg;
            sum_dyg_xhat += dyg * xh;
            dg.v[size_t(c)] += T(double(dyi[c]) * xh);
            db.v[size_t(c)] += dyi[c];
        }
        sum_dyg /= C;
        sum_dyg_xhat /= C;
        for (int c = 0; c < C; ++c) {
            double xh = (double(xi[c]) - m) * rs;
            double dyg = double(dyi[c]) * double(g.v[size_t(c)]);
            dxi[c] += T(rs * (dyg - sum_dyg - xh * sum_dyg_xhat));
        }
    }
}

template <typename T>
void add_bias(Mat<T>& y, const Mat<T>& b) {
    for (int i = 0; i < y.rows; ++i) {
        T* yi = y.row(i);
        for (int c = 0; c < y.cols; ++c) yi[c] += b.v[size_t(c)];
    }
}

template <typename T>
void bias_grad(const Mat<T>& dy, Mat<T>& db) {
    for (int i = 0; i < dy.rows; ++i) {
        const T* dyi = dy.row(i);
        for (int c = 0; c < dy.cols; ++c) db.v[size_t(c)] += dyi[c];
    }
}

// softmax along a row of length n with 64-bit accumulation, in place
template <typename T>
void softmax_row(T* z, int n) {
    double mx = -1e300;
    for (int j = 0; j < n; ++j) mx = std::max(mx, double(z[j]));
    double sum = 0;
    for (int j = 0; j < n; ++j) sum += std::exp(double(z[j]) - mx);
    double inv = 1.0 / sum;
    for (int j = 0; j < n; ++j) z[j] = T(std::exp(double(z[j]) - mx) * inv);
}

// inverted dropout mask: 0 or 1/(1-p); draw order is part of the contract
template <typename T>
void fill_dropout(Mat<T>& mask, double p, Rng& rng) {
    const T keep = T(1.0 / (1.0 - p));
    for (auto& m : mask.v) m = rng.uniform() < p ? T(0) : keep;
}

template <typename T>
void apply_mask(Mat<T>& x, const Mat<T>& mask) {
    for (size_t i = 0; i < x.v.size(); ++i) x.v[i] *= mask.v[i];
}

}  // namespace

// ---------------------------------------------------------------------------
// workspace

template <typename T>
struct LayerActs {
    Mat<T> ln1_out, q, k, v, probs, probs_mask, ctx, attn_mask;
    Mat<T> ln2_out, up_pre, gelu_out, ffn_mask;
    Mat<T> block_in, block_mid;  // residual bases
    std::vector<T> ln1_mean, ln1_rstd, ln2_mean, ln2_rstd;
};

template <typename T>
struct Workspace {
    int B = 0, S = 0;
    bool dropout_active = false;
    Mat<T> emb_mask;
    std::vector<LayerActs<T>> layers;
    Mat<T> x_final;
    std::vector<std::pair<int, int>> head_rows;  // (example, position)
    Mat<T> x_head;   // gathered rows feeding the tied head
    Mat<T> logits;   // [head_rows, V]
    // backward scratch
    Mat<T> d1, d2, d3, dffn, datt;
};

template <typename T>
Workspace<T>* workspace_new() {
    return new Workspace<T>();
}
template <typename T>
void workspace_free(Workspace<T>* p) {
    delete p;
}

// ---------------------------------------------------------------------------
// forward

namespace {

template <typename T>
void forward_body(const Params<T>& P, const ModelConfig& cfg, const MaskedBatch& batch,
                  bool train, Rng* dropout_rng, Workspace<T>& ws) {
    cfg.validate();
    const int B = batch.batch, S = batch.seq_len, d = cfg.d_model, H = cfg.n_heads;
    const int hd = cfg.head_dim(), ffn = cfg.d_ffn, R = B * S;
    require(S <= cfg.max_seq_len, Errc::InvalidArgument, "sequence longer than max_seq_len");
    const bool causal = cfg.objective == Objective::clm;
    ws.B = B;
    ws.S = S;
    ws.dropout_active = train && cfg.dropout > 0.0;
    if (ws.dropout_active)
        require(dropout_rng != nullptr, Errc::InvalidArgument, "dropout requires an rng");
    ws.layers.resize(size_t(cfg.n_layers));

    Mat<T>& x0 = ws.layers[0].block_in;
    x0.resize(R, d);
    for (int b = 0; b < B; ++b) {
        const int32_t* in = batch.input(b);
        for (int j = 0; j < S; ++j) {
            int32_t tok = in[j];
            require(tok >= 0 && tok < cfg.vocab_size, Errc::VocabMismatch,
                    "token id out of range");
            T* xt = x0.row(b * S + j);
            const T* te = P.tok_emb.row(tok);
            const T* pe = P.pos_emb.row(j);
            for (int c = 0; c < d; ++c) xt[c] = te[c] + pe[c];
        }
    }
    if (ws.dropout_active) {
        ws.emb_mask.resize(R, d);
        fill_dropout(ws.emb_mask, cfg.dropout, *dropout_rng);
        apply_mask(x0, ws.emb_mask);
    }

    const T scale = T(1.0 / std::sqrt(double(hd)));
    for (int l = 0; l < cfg.n_layers; ++l) {
        auto& A = ws.layers[size_t(l)];
        Mat<T>& xin = A.block_in;
        A.ln1_out.resize(R, d);
        layernorm_forward(xin, P.layers[size_t(l)].ln1_g, P.layers[size_t(l)].ln1_b, A.ln1_out,
                          A.ln1_mean, A.ln1_rstd);

        A.q.resize(R, d);
        A.k.resize(R, d);
        A.v.resize(R, d);
        const auto& L = P.layers[size_t(l)];
        gemm(false, false, R, d, d, T(1), A.ln1_out.data(), d, L.wq.data(), d, T(0), A.q.data(), d);
        add_bias(A.q, L.bq);
        gemm(false, false, R, d, d, T(1), A.ln1_out.data(), d, L.wk.data(), d, T(0), A.k.data(), d);
        add_bias(A.k, L.bk);
        gemm(false, false, R, d, d, T(1), A.ln1_out.data(), d, L.wv.data(), d, T(0), A.v.data(), d);
        add_bias(A.v, L.bv);

        A.probs.resize(B * H, S * S);
        if (ws.dropout_active) {
            A.probs_mask.resize(B * H, S * S);
            fill_dropout(A.probs_mask, cfg.dropout, *dropout_rng);
        }
        A.ctx.resize(R, d);
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < H; ++h) {
                const T* qs = A.q.data() + size_t(b) * S * d + size_t(h) * hd;
                const T* ks = A.k.data() + size_t(b) * S * d + size_t(h) * hd;
                const T* vs = A.v.data() + size_t(b) * S * d + size_t(h) * hd;
                T* ps = A.probs.row(b * H + h);
                gemm(false, true, S, S, hd, scale, qs, d, ks, d, T(0), ps, S);
                for (int i = 0; i < S; ++i) {
                    T* prow = ps + size_t(i) * S;
                    if (causal)
                        for (int j = i + 1; j < S; ++j) prow[j] = T(-1e30);
                    softmax_row(prow, S);
                }
                T* ctxs = A.ctx.data() + size_t(b) * S * d + size_t(h) * hd;
                if (ws.dropout_active) {
                    // dropped probs live only in scratch; probs keeps the
                    // clean softmax for the backward pass
                    ws.d1.resize(S, S);
                    const T* mk = A.probs_mask.row(b * H + h);
                    for (int e = 0; e < S * S; ++e) ws.d1.v[size_t(e)] = ps[e] * mk[e];
                    gemm(false, false, S, hd, S, T(1), ws.d1.data(), S, vs, d, T(0), ctxs, d);
                } else {
                    gemm(false, false, S, hd, S, T(1), ps, S, vs, d, T(0), ctxs, d);
                }
            }
        }

        A.block_mid.resize(R, d);
        // attn_out = ctx Wo + bo, dropout, then residual add
        Mat<T>& attn = A.block_mid;  // build in place, then add xin
        gemm(false, false, R, d, d, T(1), A.ctx.data(), d, L.wo.data(), d, T(0), attn.data(), d);
        add_bias(attn, L.bo);
        if (ws.dropout_active) {
            A.attn_mask.resize(R, d);
            fill_dropout(A.attn_mask, cfg.dropout, *dropout_rng);
            apply_mask(attn, A.attn_mask);
        }
        for (size_t e = 0; e < attn.v.size(); ++e) attn.v[e] += xin.v[e];

        A.ln2_out.resize(R, d);
        layernorm_forward(A.block_mid, L.ln2_g, L.ln2_b, A.ln2_out, A.ln2_mean, A.ln2_rstd);
        A.up_pre.resize(R, ffn);
        gemm(false, false, R, ffn, d, T(1), A.ln2_out.data(), d, L.w_up.data(), ffn, T(0),
             A.up_pre.data(), ffn);
        add_bias(A.up_pre, L.b_up);
        A.gelu_out.resize(R, ffn);
        for (size_t e = 0; e < A.up_pre.v.size(); ++e) A.gelu_out.v[e] = gelu(A.up_pre.v[e]);

        Mat<T>& next =
            (l + 1 < cfg.n_layers) ? ws.layers[size_t(l + 1)].block_in : ws.x_final;
        next.resize(R, d);
        gemm(false, false, R, d, ffn, T(1), A.gelu_out.data(), ffn, L.w_down.data(), d, T(0),
             next.data(), d);
        add_bias(next, L.b_down);
        if (ws.dropout_active) {
            A.ffn_mask.resize(R, d);
            fill_dropout(A.ffn_mask, cfg.dropout, *dropout_rng);
            apply_mask(next, A.ffn_mask);
        }
        for (size_t e = 0; e < next.v.size(); ++e) next.v[e] += A.block_mid.v[e];
    }
}

template <typename T>
void forward_head(const Params<T>& P, const ModelConfig& cfg, Workspace<T>& ws) {
    const int d = cfg.d_model, V = cfg.vocab_size;
    const int n = int(ws.head_rows.size());
    ws.x_head.resize(n, d);
    for (int r = 0; r < n; ++r) {
        auto [b, j] = ws.head_rows[size_t(r)];
        std::memcpy(ws.x_head.row(r), ws.x_final.row(b * ws.S + j), size_t(d) * sizeof(T));
    }
    ws.logits.resize(n, V);
    gemm(false, true, n, V, d, T(1), ws.x_head.data(), d, P.tok_emb.data(), d, T(0),
         ws.logits.data(), V);
}

}  // namespace

template <typename T>
const Mat<T>& forward_at_loss_positions(const Params<T>& params, const ModelConfig& config,
                                        const MaskedBatch& batch, bool train, Rng* dropout_rng,
                                        Workspace<T>& ws) {
    forward_body(params, config, batch, train, dropout_rng, ws);
    ws.head_rows.clear();
    for (int b = 0; b < batch.batch; ++b)
        for (int j : batch.loss_positions[size_t(b)]) ws.head_rows.emplace_back(b, j);
    require(!ws.head_rows.empty(), Errc::EmptyLossSupport, "batch has no loss positions");
    forward_head(params, config, ws);
    return ws.logits;
}

template <typename T>
Mat<T> forward_logits(const Params<T>& params, const ModelConfig& config, const MaskedBatch& batch,
                      bool train, Rng* dropout_rng) {
    std::unique_ptr<Workspace<T>, WorkspaceDeleter<T>> ws(workspace_new<T>());
    forward_body(params, config, batch, train, dropout_rng, *ws);
    ws->head_rows.clear();
    for (int b = 0; b < batch.batch; ++b)
        for (int j = 0; j < batch.seq_len; ++j) ws->head_rows.emplace_back(b, j);
    forward_head(params, config, *ws);
    return std::move(ws->logits);
}

// ---------------------------------------------------------------------------
// backward

template <typename T>
void backward(const Params<T>& params, const ModelConfig& cfg, const MaskedBatch& batch,
              Workspace<T>& ws, const Mat<T>& dlogits, Params<T>& grads) {
    const int B = ws.B, S = ws.S, d = cfg.d_model, H = cfg.n_heads;
    const int hd = cfg.head_dim(), ffn = cfg.d_ffn, R = B * S;
    const int n = int(ws.head_rows.size());
    const T scale = T(1.0 / std::sqrt(double(hd)));
    if (grads.layers.size() != size_t(cfg.n_layers) || grads.tok_emb.rows != cfg.vocab_size ||
        grads.tok_emb.cols != d)
        grads.init_shapes(cfg);
    for (auto& t : tensor_refs(grads)) t.mat->zero();

    // head: logits = x_head tok_emb^T
    gemm(true, false, cfg.vocab_size, d, n, T(1), dlogits.data(), cfg.vocab_size,
         ws.x_head.data(), d, T(1), grads.tok_emb.data(), d);
    ws.d1.resize(n, d);
    gemm(false, false, n, d, cfg.vocab_size, T(1), dlogits.data(), cfg.vocab_size,
         params.tok_emb.data(), d, T(0), ws.d1.data(), d);
    Mat<T>& dx = ws.d2;
    dx.resize(R, d);
    dx.zero();
    for (int r = 0; r < n; ++r) {
        auto [b, j] = ws.head_rows[size_t(r)];
        axpy(size_t(d), T(1), ws.d1.row(r), dx.row(b * S + j));
    }

    Mat<T>& scratch = ws.d3;
    for (int l = cfg.n_layers - 1; l >= 0; --l) {
        auto& A = ws.layers[size_t(l)];
        const auto& L = params.layers[size_t(l)];
        auto& G = grads.layers[size_t(l)];

        // ffn branch: next = block_mid + drop(gelu(ln2(block_mid)) W_down + b_down)
        Mat<T>& dffn_out = ws.dffn;
        dffn_out.resize(R, d);
        std::memcpy(dffn_out.data(), dx.data(), dx.v.size() * sizeof(T));
        if (ws.dropout_active) apply_mask(dffn_out, A.ffn_mask);
        bias_grad(dffn_out, G.b_down);
        gemm(true, false, ffn, d, R, T(1), A.gelu_out.data(), ffn, dffn_out.data(), d, T(1),
             G.w_down.data(), d);
        Mat<T>& dgelu = ws.datt;
        dgelu.resize(R, ffn);
        gemm(false, true, R, ffn, d, T(1), dffn_out.data(), d, L.w_down.data(), d, T(0),
             dgelu.data(), ffn);
        for (size_t e = 0; e < dgelu.v.size(); ++e) dgelu.v[e] *= gelu_grad(A.up_pre.v[e]);
        bias_grad(dgelu, G.b_up);
        gemm(true, false, d, ffn, R, T(1), A.ln2_out.data(), d, dgelu.data(), ffn, T(1),
             G.w_up.data(), ffn);
        scratch.resize(R, d);
        gemm(false, true, R, d, ffn, T(1), dgelu.data(), ffn, L.w_up.data(), ffn, T(0),
             scratch.data(), d);
        // dmid accumulates the residual path (dx) plus the ln2 path
        layernorm_backward(A.block_mid, L.ln2_g, A.ln2_mean, A.ln2_rstd, scratch, dx, G.ln2_g,
                           G.ln2_b);

        // attention branch: mid = block_in + drop(ctx Wo + bo)
        Mat<T>& dattn = ws.dffn;
        dattn.resize(R, d);
        std::memcpy(dattn.data(), dx.data(), dx.v.size() * sizeof(T));
        if (ws.dropout_active) apply_mask(dattn, A.attn_mask);
        bias_grad(dattn, G.bo);
        gemm(true, false, d, d, R, T(1), A.ctx.data(), d, dattn.data(), d, T(1), G.wo.data(), d);
        Mat<T>& dctx = ws.datt;
        dctx.resize(R, d);
        gemm(false, true, R, d, d, T(1), dattn.data(), d, L.wo.data(), d, T(0), dctx.data(), d);

        Mat<T>& dq = ws.d1;
        dq.resize(R, d);
        dq.zero();
        Mat<T> dk(R, d), dv(R, d);
        Mat<T> dp(S, S), dz(S, S);
        for (int b = 0; b < B; ++b) {
            for (int h = 0; h < H; ++h) {
                const size_t off = size_t(b) * S * d + size_t(h) * hd;
                const T* ps = A.probs.row(b * H + h);
                const T* vs = A.v.data() + off;
                const T* qs = A.q.data() + off;
                const T* ks = A.k.data() + off;
                const T* dctxs = dctx.data() + off;
                // dv += a^T dctx, where a = probs (after dropout mask)
                if (ws.dropout_active) {
                    const T* mk = A.probs_mask.row(b * H + h);
                    for (int e = 0; e < S * S; ++e) dp.v[size_t(e)] = ps[e] * mk[e];
                    gemm(true, false, S, hd, S, T(1), dp.data(), S, dctxs, d, T(1),
                         dv.data() + off, d);
                    gemm(false, true, S, S, hd, T(1), dctxs, d, vs, d, T(0), dz.data(), S);
                    for (int e = 0; e < S * S; ++e) dp.v[size_t(e)] = dz.v[size_t(e)] * mk[e];
                } else {
                    gemm(true, false, S, hd, S, T(1), ps, S, dctxs, d, T(1), dv.data() + off, d);
                    gemm(false, true, S, S, hd, T(1), dctxs, d, vs, d, T(0), dp.data(), S);
                }
                // softmax backward per row
                for (int i = 0; i < S; ++i) {
                    const T* prow = ps + size_t(i) * S;
                    T* dprow = dp.row(i);
                    double dot = 0;
                    for (int j = 0; j < S; ++j) dot += double(dprow[j]) * double(prow[j]);
                    T* dzrow = dz.row(i);
                    for (int j = 0; j < S; ++j)
                        dzrow[j] = T(double(prow[j]) * (double(dprow[j]) - dot));
                }
                gemm(false, false, S, hd, S, scale, dz.data(), S, ks, d, T(1), dq.data() + off, d);
                gemm(true, false, S, hd, S, scale, dz.data(), S, qs, d, T(1), dk.data() + off, d);
            }
        }

        bias_grad(dq, G.bq);
        bias_grad(dk, G.bk);
        bias_grad(dv, G.bv);
        gemm(true, false, d, d, R, T(1), A.ln1_out.data(), d, dq.data(), d, T(1), G.wq.data(), d);
        gemm(true, false, d, d, R, T(1), A.ln1_out.data(), d, dk.data(), d, T(1), G.wk.data(), d);
        gemm(true, false, d, d, R, T(1), A.ln1_out.data(), d, dv.data(), d, T(1), G.wv.data(), d);
        Mat<T>& dh = ws.dffn;
        dh.resize(R, d);
        gemm(false, true, R, d, d, T(1), dq.data(), d, L.wq.data(), d, T(0), dh.data(), d);
        gemm(false, true, R, d, d, T(1), dk.data(), d, L.wk.data(), d, T(1), dh.data(), d);
        gemm(false, true, R, d, d, T(1), dv.data(), d, L.wv.data(), d, T(1), dh.data(), d);
        layernorm_backward(A.block_in, L.ln1_g, A.ln1_mean, A.ln1_rstd, dh, dx, G.ln1_g, G.ln1_b);
    }

    if (ws.dropout_active) apply_mask(dx, ws.emb_mask);
    for (int b = 0; b < B; ++b) {
        const int32_t* in = batch.input(b);
        for (int j = 0; j < S; ++j) {
            const T* dxt = dx.row(b * S + j);
            axpy(size_t(d), T(1), dxt, grads.tok_emb.row(in[j]));
            axpy(size_t(d), T(1), dxt, grads.pos_emb.row(j));
        }
    }
}

// ---------------------------------------------------------------------------

template struct Params<float>;
template struct Params<double>;
template Params<float> init_params<float>(const ModelConfig&, uint64_t);
template Params<double> init_params<double>(const ModelConfig&, uint64_t);
template Workspace<float>* workspace_new<float>();
template Workspace<double>* workspace_new<double>();
template void workspace_free<float>(Workspace<float>*);
template void workspace_free<double>(Workspace<double>*);
template Mat<float> forward_logits<float>(const Params<float>&, const ModelConfig&,
                                          const MaskedBatch&, bool, Rng*);
template Mat<double> forward_logits<double>(const Params<double>&, const ModelConfig&,
                                            const MaskedBatch&, bool, Rng*);
template const Mat<float>& forward_at_loss_positions<float>(const Params<float>&,
                                                            const ModelConfig&,
                                                            const MaskedBatch&, bool, Rng*,
                                                            Workspace<float>&);
template const Mat<double>& forward_at_loss_positions<double>(const Params<double>&,
                                                              const ModelConfig&,
                                                              const MaskedBatch&, bool, Rng*,
                                                              Workspace<double>&);
template void backward<float>(const Params<float>&, const ModelConfig&, const MaskedBatch&,
                              Workspace<float>&, const Mat<float>&, Params<float>&);
template void backward<double>(const Params<double>&, const ModelConfig&, const MaskedBatch&,
                               Workspace<double>&, const Mat<double>&, Params<double>&);

}  // namespace ki
