#ifndef KI_TRAINER_HPP
#define KI_TRAINER_HPP

#include <optional>
#include <string>
#include <vector>

#include "ki/corpus.hpp"
#include "ki/hash.hpp"
#include "ki/model.hpp"
#include "ki/schedule.hpp"
#include "ki/teacher.hpp"

namespace ki {

struct TrainConfig {
    int64_t total_steps = 20000;
    int batch_size = 32;
    double peak_lr = 3e-4;
    double warmup_frac = 0.10;
    double weight_decay = 0.01;
    double adam_beta1 = 0.9;
    double adam_beta2 = 0.98;
    double adam_eps = 1e-6;
    double dropout = 0.1;
    ScheduleSpec schedule;
    double tau = 2.0;
    int top_k = 10;
    uint64_t seed = 0;
    int64_t eval_every = 1000;
    double mask_rate = 0.15;
    double label_smoothing = 0.0;
    uint64_t mask_seed = 77;  // data-level: must match the cache's header

    void validate() const;
};

struct MetricsRow {
    int64_t step = 0;  // completed steps, 1-based
    double alpha = 0.0;
    double lr = 0.0;
    double loss_self = 0.0;
    double loss_ki = 0.0;
    double loss_total = 0.0;
    std::optional<double> valid_ppl;
    int64_t tokens_seen = 0;
};

std::string metrics_csv_header();
std::string metrics_csv(const std::vector<MetricsRow>& rows);

// Linear warmup over the first warmup_frac*T steps, then linear decay to 0
// at T.
double lr_at(int64_t t, const TrainConfig& config);

// exp(mean NLL) over every loss position of the valid split, eval mode,
// fixed evaluation mask seed.
double evaluate_ppl(const Params<float>& params, const ModelConfig& config, const Corpus& corpus,
                    double mask_rate, uint64_t eval_mask_seed);

struct RunOptions {
    std::string out_dir;              // empty: keep everything in memory
    bool checkpoint_at_evals = true;  // ckpt_step<N>.kickpt at every eval point
    const Params<float>* init = nullptr;  // continue from these weights
};

struct RunOutputs {
    Params<float> params;
    ModelConfig model_config;
    std::vector<MetricsRow> metrics;
    std::vector<std::pair<int64_t, std::string>> checkpoint_files;
    Sha256 final_hash{};  // hash of the final serialized checkpoint
};

RunOutputs train_run(const TrainConfig& config, const ModelConfig& model_config,
                     const Corpus& corpus, const TeacherRegistry* teachers,
                     const RunOptions& options = {});

// Generation chains: stage i >= 1 inherits from the stage named by
// teacher_stage (default: the previous one); stage 0 self-learns unless its
// schedule says otherwise.
struct ChainStage {
    ModelConfig model;
    TrainConfig train;
    int teacher_stage = -1;  // -1: previous stage; -2: none
};

struct LineageEntry {
    std::string model_id;    // final checkpoint hash (hex)
    std::string teacher_id;  // empty when self-trained
    int64_t guided_steps = 0;
    std::string corpus_id;
};

struct ChainResult {
    std::vector<RunOutputs> generations;
    std::vector<LineageEntry> lineage;
};

ChainResult chain_generations(std::span<const ChainStage> stages, const Corpus& corpus,
                              const std::string& work_dir = {});

// Continues training on a new domain; reports target and source validation
// PPL before and after (the forgetting measurement).
struct AdaptResult {
    Params<float> params;
    std::vector<MetricsRow> metrics;
    double target_ppl_before = 0, target_ppl_after = 0;
    double source_ppl_before = 0, source_ppl_after = 0;
};

AdaptResult adapt_domain(const Params<float>& student, const ModelConfig& student_config,
                         const Corpus& domain_corpus, const TeacherRegistry* teachers,
                         const TrainConfig& config, const Corpus& source_valid,
                         const RunOptions& options = {});

std::string corpus_fingerprint(const Corpus& c);

}  // namespace ki

#endif
