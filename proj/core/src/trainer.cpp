#include "ki/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>

#include "ki/checkpoint.hpp"
#include "ki/errors.hpp"
#include "ki/logit_cache.hpp"
#include "ki/objective.hpp"
#include "ki/rng.hpp"

namespace ki {

namespace {
constexpr uint64_t kTagInit = 0x696e6974;   // init stream
constexpr uint64_t kTagOrder = 0x6f726472;  // per-epoch batch order
constexpr uint64_t kTagDrop = 0x64726f70;   // per-step dropout

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}
}  // namespace

void TrainConfig::validate() const {
    require(total_steps >= 0, Errc::ConfigError, "total_steps must be >= 0");
    require(batch_size >= 1, Errc::ConfigError, "batch_size must be >= 1");
    require(peak_lr > 0.0, Errc::ConfigError, "peak_lr must be positive");
    require(warmup_frac >= 0.0 && warmup_frac <= 1.0, Errc::ConfigError,
            "warmup_frac must lie in [0,1]");
    require(weight_decay >= 0.0, Errc::ConfigError, "weight_decay must be >= 0");
    require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0,
            Errc::ConfigError, "adam betas must lie in [0,1)");
    require(adam_eps > 0.0, Errc::ConfigError, "adam_eps must be positive");
    require(dropout >= 0.0 && dropout < 1.0, Errc::ConfigError, "dropout must lie in [0,1)");
    require(tau > 0.0, Errc::InvalidTemperature, "tau must be positive");
    require(top_k >= 1, Errc::InvalidK, "top_k must be >= 1");
    require(eval_every >= 1 && (total_steps == 0 || eval_every <= total_steps), Errc::ConfigError,
            "eval_every must lie in [1, total_steps]");
    require(mask_rate >= 0.0 && mask_rate <= 1.0, Errc::ConfigError,
            "mask_rate must lie in [0,1]");
    require(label_smoothing >= 0.0 && label_smoothing < 1.0, Errc::ConfigError,
            "label_smoothing must lie in [0,1)");
    schedule.validate();
    require(schedule.total_steps == total_steps, Errc::ConfigError,
            "schedule.total_steps must equal total_steps");
}

std::string metrics_csv_header() {
    return "step,alpha,lr,loss_self,loss_ki,loss_total,valid_ppl,tokens_seen\n";
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
    std::string out = metrics_csv_header();
    char buf[256];
    for (const auto& r : rows) {
        std::string ppl = r.valid_ppl ? fmt(*r.valid_ppl) : std::string();
        std::snprintf(buf, sizeof buf, "%lld,%s,%s,%s,%s,%s,%s,%lld\n",
                      static_cast<long long>(r.step), fmt(r.alpha).c_str(), fmt(r.lr).c_str(),
                      fmt(r.loss_self).c_str(), fmt(r.loss_ki).c_str(), fmt(r.loss_total).c_str(),
                      ppl.c_str(), static_cast<long long>(r.tokens_seen));
        out += buf;
    }
    return out;
}

double lr_at(int64_t t, const TrainConfig& config) {
    const int64_t T = config.total_steps;
    if (T <= 0) return 0.0;
    t = std::clamp<int64_t>(t, 0, T);
    const auto warmup = int64_t(std::llround(config.warmup_frac * double(T)));
    if (t <= warmup && warmup > 0) return config.peak_lr * double(t) / double(warmup);
    if (T == warmup) return config.peak_lr;
    return config.peak_lr * double(T - t) / double(T - warmup);
}

double evaluate_ppl(const Params<float>& params, const ModelConfig& config, const Corpus& corpus,
                    double mask_rate, uint64_t eval_mask_seed) {
    auto valid = corpus.split_indices(Split::valid);
    require(!valid.empty(), Errc::EmptyCorpus, "corpus has no valid split");
    ModelConfig eval_cfg = config;
    eval_cfg.dropout = 0.0;

    std::unique_ptr<Workspace<float>, WorkspaceDeleter<float>> ws(workspace_new<float>());
    double nll = 0;
    size_t positions = 0;
    constexpr size_t kEvalBatch = 64;
    for (size_t at = 0; at < valid.size(); at += kEvalBatch) {
        size_t n = std::min(kEvalBatch, valid.size() - at);
        MaskedBatch mb;
        try {
            mb = apply_masking(corpus, std::span<const size_t>(valid.data() + at, n), mask_rate,
                               eval_mask_seed, config.objective);
        } catch (const Error& e) {
            if (e.code() == Errc::EmptyLossSupport) continue;
            throw;
        }
        const Mat<float>& logits =
            forward_at_loss_positions(params, eval_cfg, mb, false, nullptr, *ws);
        int row = 0;
        for (int b = 0; b < mb.batch; ++b) {
            const int32_t* tgt = mb.target(b);
            for (int j : mb.loss_positions[size_t(b)]) {
                std::span<const float> zrow(logits.row(row), size_t(logits.cols));
                auto p = temperature_softmax(zrow, 1.0);
                nll += -std::log(std::max(p[size_t(tgt[j])], 1e-300));
                ++positions;
                ++row;
            }
        }
    }
    require(positions > 0, Errc::EmptyLossSupport, "valid split yields no loss positions");
    double ppl = std::exp(nll / double(positions));
    require(std::isfinite(ppl), Errc::NumericFailure, "non-finite validation perplexity");
    return ppl;
}

// ---------------------------------------------------------------------------

namespace {

struct Adam {
    Params<float> m, v;
    int64_t t = 0;

    void init(const ModelConfig& cfg) {
        m.init_shapes(cfg);
        v.init_shapes(cfg);
    }

    void step(Params<float>& params, Params<float>& grads, const TrainConfig& cfg, double lr) {
        ++t;
        const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
        const double bc1 = 1.0 - std::pow(b1, double(t));
        const double bc2 = 1.0 - std::pow(b2, double(t));
        auto pr = tensor_refs(params);
        auto gr = tensor_refs(grads);
        auto mr = tensor_refs(m);
        auto vr = tensor_refs(v);
        for (size_t i = 0; i < pr.size(); ++i) {
            const bool decay = pr[i].kind == TensorKind::weight && cfg.weight_decay > 0.0;
            float* p = pr[i].mat->data();
            const float* g = gr[i].mat->data();
            float* mm = mr[i].mat->data();
            float* vv = vr[i].mat->data();
            const size_t n = pr[i].mat->size();
            for (size_t e = 0; e < n; ++e) {
                double ge = double(g[e]);
                double me = b1 * double(mm[e]) + (1.0 - b1) * ge;
                double ve = b2 * double(vv[e]) + (1.0 - b2) * ge * ge;
                mm[e] = float(me);
                vv[e] = float(ve);
                double update = (me / bc1) / (std::sqrt(ve / bc2) + cfg.adam_eps);
                if (decay) update += cfg.weight_decay * double(p[e]);
                p[e] = float(double(p[e]) - lr * update);
            }
        }
    }
};

// Sequences whose masking yields at least one loss position; precomputed so
// every training batch has support.
std::vector<size_t> eligible_train_indices(const Corpus& corpus, const TrainConfig& cfg,
                                           Objective objective) {
    std::vector<size_t> eligible;
    auto train = corpus.split_indices(Split::train);
    if (objective == Objective::clm) return train;
    for (size_t idx : train) {
        Rng rng(derive_seed(cfg.mask_seed, corpus.seq_ids[idx]));
        const int32_t* seq = corpus.sequence(idx);
        bool any = false;
        for (int j = 0; j < corpus.seq_len && !any; ++j) {
            double u = rng.uniform();
            if (Vocab::maskable(seq[j]) && u < cfg.mask_rate) any = true;
        }
        if (any) eligible.push_back(idx);
    }
    return eligible;
}

void validate_registry(const TeacherRegistry& reg, const TrainConfig& cfg,
                       const ModelConfig& model) {
    for (const auto& [tag, handle] : reg.entries()) {
        if (const auto* cachep = std::get_if<const LogitCache*>(&handle)) {
            const CacheHeader& h = (*cachep)->header;
            require(h.vocab_size == uint32_t(model.vocab_size), Errc::CacheMismatch,
                    "cache vocab_size does not match the model (" + tag + ")");
            require(h.objective == model.objective, Errc::CacheMismatch,
                    "cache objective does not match the run (" + tag + ")");
            require(h.mask_seed == cfg.mask_seed, Errc::CacheMismatch,
                    "cache mask_seed does not match the run (" + tag + ")");
            require(h.tau == float(cfg.tau), Errc::TemperatureMismatch,
                    "cache tau " + std::to_string(h.tau) + " does not match run tau (" + tag +
                        ")");
        } else {
            const auto& live = std::get<LiveTeacher>(handle);
            require(live.config->vocab_size == model.vocab_size, Errc::CacheMismatch,
                    "live teacher vocab_size does not match the model (" + tag + ")");
            require(live.config->objective == model.objective, Errc::CacheMismatch,
                    "live teacher objective does not match the run (" + tag + ")");
            require(live.tau == cfg.tau, Errc::TemperatureMismatch,
                    "live teacher tau does not match run tau (" + tag + ")");
        }
    }
}

// Row-aligned teacher targets for one batch.
std::vector<SparseDistribution> assemble_targets(const MaskedBatch& mb,
                                                 const TeacherRegistry& reg,
                                                 Workspace<float>& teacher_ws) {
    std::vector<SparseDistribution> targets;
    targets.reserve(mb.total_loss_positions());
    for (int b = 0; b < mb.batch; ++b) {
        const TeacherHandle& handle = route_teacher(mb.domain_tags[size_t(b)], reg);
        if (const auto* cachep = std::get_if<const LogitCache*>(&handle)) {
            const LogitCache& cache = **cachep;
            for (int pos : mb.loss_positions[size_t(b)]) {
                try {
                    targets.push_back(cache.lookup(mb.seq_ids[size_t(b)], pos));
                } catch (const Error& e) {
                    if (e.code() == Errc::MissingPosition)
                        fail(Errc::CacheMismatch,
                             "cache does not cover sequence " +
                                 std::to_string(mb.seq_ids[size_t(b)]) + " position " +
                                 std::to_string(pos));
                    throw;
                }
            }
        } else {
            const auto& live = std::get<LiveTeacher>(handle);
            // single-example sub-batch through the teacher, eval mode
            MaskedBatch sub;
            sub.batch = 1;
            sub.seq_len = mb.seq_len;
            sub.input_ids.assign(mb.input(b), mb.input(b) + mb.seq_len);
            sub.target_ids.assign(mb.target(b), mb.target(b) + mb.seq_len);
            sub.loss_positions.push_back(mb.loss_positions[size_t(b)]);
            sub.domain_tags.push_back(mb.domain_tags[size_t(b)]);
            sub.seq_ids.push_back(mb.seq_ids[size_t(b)]);
            const Mat<float>& logits = forward_at_loss_positions(*live.params, *live.config, sub,
                                                                 false, nullptr, teacher_ws);
            int k = live.top_k >= 1 ? std::min(live.top_k, live.config->vocab_size)
                                    : live.config->vocab_size;
            for (int row = 0; row < logits.rows; ++row) {
                std::span<const float> zrow(logits.row(row), size_t(logits.cols));
                targets.push_back(topk_truncate(temperature_softmax(zrow, live.tau), k));
            }
        }
    }
    return targets;
}

}  // namespace

RunOutputs train_run(const TrainConfig& config, const ModelConfig& model_config,
                     const Corpus& corpus, const TeacherRegistry* teachers,
                     const RunOptions& options) {
    config.validate();
    ModelConfig run_cfg = model_config;
    run_cfg.dropout = config.dropout;
    run_cfg.validate();
    require(run_cfg.vocab_size == corpus.vocab_size, Errc::VocabMismatch,
            "model vocab_size does not match the corpus");
    require(corpus.seq_len <= run_cfg.max_seq_len, Errc::ConfigError,
            "corpus seq_len exceeds model max_seq_len");
    const bool needs_teacher = config.schedule.uses_teacher();
    if (needs_teacher) {
        require(teachers != nullptr && !teachers->empty(), Errc::ConfigError,
                "schedule requires a teacher registry");
        validate_registry(*teachers, config, run_cfg);
    }

    RunOutputs out;
    out.model_config = run_cfg;
    out.params = options.init ? *options.init
                              : init_params<float>(run_cfg, derive_seed(config.seed, kTagInit));

    const bool write_files = !options.out_dir.empty();
    if (write_files) std::filesystem::create_directories(options.out_dir);
    auto checkpoint_path = [&](int64_t step) {
        return options.out_dir + "/ckpt_step" + std::to_string(step) + ".kickpt";
    };

    auto eligible = eligible_train_indices(corpus, config, run_cfg.objective);
    require(config.total_steps == 0 || !eligible.empty(), Errc::EmptyCorpus,
            "no train sequences with loss support");

    Adam adam;
    adam.init(run_cfg);
    Params<float> grads;
    std::unique_ptr<Workspace<float>, WorkspaceDeleter<float>> ws(workspace_new<float>());
    std::unique_ptr<Workspace<float>, WorkspaceDeleter<float>> teacher_ws(workspace_new<float>());
    Mat<float> dlogits;

    std::vector<size_t> order;
    size_t order_pos = 0;
    uint64_t epoch = 0;
    auto next_batch = [&]() {
        if (order.empty() || order_pos + size_t(config.batch_size) > order.size()) {
            order = eligible;
            Rng rng(derive_seed(config.seed, kTagOrder, epoch++));
            shuffle(order, rng);
            order_pos = 0;
        }
        std::span<const size_t> idxs(order.data() + order_pos, size_t(config.batch_size));
        order_pos += size_t(config.batch_size);
        return idxs;
    };

    out.metrics.reserve(size_t(config.total_steps));
    for (int64_t t = 0; t < config.total_steps; ++t) {
        const double alpha = inheritance_rate(t, config.schedule);
        const double lr = lr_at(t, config);
        MaskedBatch mb = apply_masking(corpus, next_batch(), config.mask_rate, config.mask_seed,
                                       run_cfg.objective);
        Rng drop_rng(derive_seed(config.seed, kTagDrop, uint64_t(t)));
        const Mat<float>& logits =
            forward_at_loss_positions(out.params, run_cfg, mb, true, &drop_rng, *ws);

        LossSpec spec;
        spec.alpha = alpha;
        spec.tau = config.tau;
        spec.label_smoothing = config.label_smoothing;
        std::vector<SparseDistribution> targets;
        if (alpha > 0.0) {
            targets = assemble_targets(mb, *teachers, *teacher_ws);
            spec.ki_targets = &targets;
        }
        LossValues losses = loss_and_dlogits(logits, mb, spec, dlogits);
        backward(out.params, run_cfg, mb, *ws, dlogits, grads);
        adam.step(out.params, grads, config, lr);

        MetricsRow row;
        row.step = t + 1;
        row.alpha = alpha;
        row.lr = lr;
        row.loss_self = losses.loss_self;
        row.loss_ki = losses.loss_ki;
        row.loss_total = losses.loss_total;
        row.tokens_seen = (t + 1) * int64_t(config.batch_size) * corpus.seq_len;
        if ((t + 1) % config.eval_every == 0 || t + 1 == config.total_steps) {
            row.valid_ppl =
                evaluate_ppl(out.params, run_cfg, corpus, config.mask_rate, config.mask_seed);
            if (write_files && options.checkpoint_at_evals && t + 1 != config.total_steps) {
                save_checkpoint(checkpoint_path(t + 1), run_cfg, out.params);
                out.checkpoint_files.emplace_back(t + 1, checkpoint_path(t + 1));
            }
        }
        out.metrics.push_back(std::move(row));
    }

    std::string final_bytes = serialize_checkpoint(run_cfg, out.params);
    out.final_hash = sha256(final_bytes);
    if (write_files) {
        std::string path = checkpoint_path(config.total_steps);
        std::ofstream f(path, std::ios::binary);
        require(bool(f), Errc::IoError, "cannot open " + path);
        f.write(final_bytes.data(), std::streamsize(final_bytes.size()));
        require(bool(f), Errc::IoError, "write failed: " + path);
        out.checkpoint_files.emplace_back(config.total_steps, path);
        std::ofstream mf(options.out_dir + "/metrics.csv", std::ios::binary);
        std::string csv = metrics_csv(out.metrics);
        mf.write(csv.data(), std::streamsize(csv.size()));
        require(bool(mf), Errc::IoError, "metrics write failed");
    }
    return out;
}

std::string corpus_fingerprint(const Corpus& c) {
    std::string blob = c.vocab_hash + "#" + std::to_string(c.seq_len) + "#";
    blob.append(reinterpret_cast<const char*>(c.tokens.data()), c.tokens.size() * sizeof(int32_t));
    blob.append(reinterpret_cast<const char*>(c.seq_ids.data()),
                c.seq_ids.size() * sizeof(uint64_t));
    for (Split s : c.splits) blob.push_back(char('0' + int(s)));
    return to_hex(sha256(blob)).substr(0, 16);
}

ChainResult chain_generations(std::span<const ChainStage> stages, const Corpus& corpus,
                              const std::string& work_dir) {
    require(!stages.empty(), Errc::InvalidArgument, "chain needs at least one stage");
    ChainResult result;
    const std::string corpus_id = corpus_fingerprint(corpus);

    for (size_t i = 0; i < stages.size(); ++i) {
        const ChainStage& stage = stages[i];
        int teacher_idx = stage.teacher_stage;
        if (teacher_idx == -1) teacher_idx = int(i) - 1;  // previous stage by default
        require(teacher_idx == -2 || (teacher_idx >= 0 && teacher_idx < int(i)) ||
                    (i == 0 && teacher_idx < 0),
                Errc::ConfigError, "teacher stage must precede its student");

        TeacherRegistry registry;
        LogitCache cache;
        std::string teacher_id;
        const bool wants_teacher = stage.train.schedule.uses_teacher();
        if (wants_teacher) {
            require(teacher_idx >= 0, Errc::ConfigError,
                    "stage " + std::to_string(i) + " needs a teacher but none precedes it");
            const RunOutputs& teacher = result.generations[size_t(teacher_idx)];
            ModelConfig teacher_cfg = teacher.model_config;
            teacher_cfg.dropout = 0.0;
            cache = precompute_cache(teacher.params, teacher_cfg, corpus, stage.train.mask_seed,
                                     stage.train.tau, stage.train.top_k, teacher.final_hash,
                                     stage.train.mask_rate);
            registry.add(TeacherRegistry::kWildcard, &cache);
            teacher_id = to_hex(teacher.final_hash);
            if (!work_dir.empty())
                write_cache(cache, work_dir + "/gen" + std::to_string(i) + "_teacher.kilc");
        }

        RunOptions opts;
        if (!work_dir.empty()) {
            opts.out_dir = work_dir + "/gen" + std::to_string(i);
            std::filesystem::create_directories(opts.out_dir);
        }
        RunOutputs run = train_run(stage.train, stage.model, corpus,
                                   wants_teacher ? &registry : nullptr, opts);
        result.lineage.push_back({to_hex(run.final_hash), teacher_id,
                                  stage.train.schedule.guided_steps, corpus_id});
        result.generations.push_back(std::move(run));
    }
    return result;
}

AdaptResult adapt_domain(const Params<float>& student, const ModelConfig& student_config,
                         const Corpus& domain_corpus, const TeacherRegistry* teachers,
                         const TrainConfig& config, const Corpus& source_valid,
                         const RunOptions& options) {
    AdaptResult r;
    ModelConfig eval_cfg = student_config;
    r.target_ppl_before =
        evaluate_ppl(student, eval_cfg, domain_corpus, config.mask_rate, config.mask_seed);
    r.source_ppl_before =
        evaluate_ppl(student, eval_cfg, source_valid, config.mask_rate, config.mask_seed);

    RunOptions opts = options;
    opts.init = &student;
    RunOutputs run = train_run(config, student_config, domain_corpus, teachers, opts);
    r.params = std::move(run.params);
    r.metrics = std::move(run.metrics);

    r.target_ppl_after =
        evaluate_ppl(r.params, eval_cfg, domain_corpus, config.mask_rate, config.mask_seed);
    r.source_ppl_after =
        evaluate_ppl(r.params, eval_cfg, source_valid, config.mask_rate, config.mask_seed);
    return r;
}

}  // namespace ki
