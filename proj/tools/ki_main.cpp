// ki: corpus building, pre-training, offline logit pre-computation,
// teacher-guided training, generation chains, domain adaptation, evaluation,
// proximity and reports. Exit codes: 0 ok, 1 usage/config, 2 data, 3 numeric.

#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "ki/checkpoint.hpp"
#include "ki/config_file.hpp"
#include "ki/corpus.hpp"
#include "ki/errors.hpp"
#include "ki/linalg.hpp"
#include "ki/logit_cache.hpp"
#include "ki/report.hpp"
#include "ki/trainer.hpp"

namespace {

using namespace ki;

std::vector<std::string> read_documents(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), Errc::IoError, "cannot open " + path);
    std::vector<std::string> docs;
    std::string line, doc;
    while (std::getline(in, line)) {
        if (line.empty()) {
            if (!doc.empty()) docs.push_back(std::move(doc)), doc.clear();
        } else {
            if (!doc.empty()) doc += ' ';
            doc += line;
        }
    }
    if (!doc.empty()) docs.push_back(std::move(doc));
    return docs;
}

Corpus load_corpus_checked(const std::string& corpus_path, const Vocab& vocab) {
    Corpus c = load_corpus(corpus_path);
    require(c.vocab_hash == vocab.hash_hex(), Errc::VocabMismatch,
            "corpus " + corpus_path + " was not encoded with this vocab");
    require(c.vocab_size <= vocab.size(), Errc::VocabMismatch,
            "corpus contains token ids outside the vocab");
    c.vocab_size = vocab.size();
    return c;
}

// --teacher-cache [domain=]path, repeated
struct LoadedTeachers {
    std::vector<std::unique_ptr<LogitCache>> caches;
    TeacherRegistry registry;
};

LoadedTeachers load_teacher_caches(const std::vector<std::string>& specs) {
    LoadedTeachers t;
    for (const auto& s : specs) {
        std::string domain = TeacherRegistry::kWildcard, path = s;
        if (auto eq = s.find('='); eq != std::string::npos) {
            domain = s.substr(0, eq);
            path = s.substr(eq + 1);
            require(!domain.empty() && !path.empty(), Errc::ConfigError,
                    "bad --teacher-cache spec: " + s);
        }
        t.caches.push_back(std::make_unique<LogitCache>(read_cache(path)));
        t.registry.add(domain, t.caches.back().get());
    }
    return t;
}

void apply_vocab_default(RunFileConfig& cfg, const Vocab& vocab) {
    if (!cfg.vocab_size_explicit) cfg.model.vocab_size = vocab.size();
    require(cfg.model.vocab_size == vocab.size(), Errc::VocabMismatch,
            "config vocab_size does not match the vocab file");
}

int cmd_build_corpus(const std::vector<std::string>& inputs, const std::string& vocab_in,
                     int vocab_size, int seq_len, uint64_t seed, const std::string& domain,
                     const std::string& out_corpus, const std::string& out_vocab) {
    std::vector<std::string> docs;
    for (const auto& p : inputs) {
        auto d = read_documents(p);
        docs.insert(docs.end(), d.begin(), d.end());
    }
    Vocab vocab;
    if (!vocab_in.empty()) {
        vocab = load_vocab(vocab_in);
    } else {
        vocab = build_vocab(docs, vocab_size);
        require(!out_vocab.empty(), Errc::ConfigError,
                "--out-vocab is required when building a new vocab");
    }
    Corpus corpus = encode_corpus(docs, vocab, seq_len, seed, domain);
    if (corpus.no_valid_warning)
        std::cerr << "warning: corpus too small for a validation split (199:1)\n";
    if (!out_vocab.empty()) save_vocab(vocab, out_vocab);
    save_corpus(corpus, out_corpus);
    std::cout << "sequences=" << corpus.num_sequences() << " train=" << corpus.count(Split::train)
              << " valid=" << corpus.count(Split::valid) << " vocab=" << vocab.size() << "\n";
    return 0;
}

int cmd_train(const std::string& config_path, const std::string& corpus_path,
              const std::string& vocab_path, const std::vector<std::string>& teacher_specs,
              const std::string& out_dir, bool force_self_only) {
    RunFileConfig cfg = parse_config(config_path);
    Vocab vocab = load_vocab(vocab_path);
    apply_vocab_default(cfg, vocab);
    Corpus corpus = load_corpus_checked(corpus_path, vocab);
    if (force_self_only) {
        cfg.train.schedule.strategy = ScheduleSpec::Strategy::self_only;
        cfg.train.schedule.guided_steps = 0;
    }
    LoadedTeachers teachers = load_teacher_caches(teacher_specs);
    RunOptions opts;
    opts.out_dir = out_dir;
    RunOutputs run = train_run(cfg.train, cfg.model, corpus,
                               teachers.registry.empty() ? nullptr : &teachers.registry, opts);
    double final_ppl =
        run.metrics.empty() || !run.metrics.back().valid_ppl ? 0.0 : *run.metrics.back().valid_ppl;
    std::cout << "steps=" << cfg.train.total_steps << " final_valid_ppl=" << final_ppl
              << " checkpoint=" << out_dir << "/ckpt_step" << cfg.train.total_steps << ".kickpt\n";
    return 0;
}

int cmd_precompute(const std::string& teacher_path, const std::string& corpus_path,
                   const std::string& vocab_path, double tau, int top_k, uint64_t mask_seed,
                   double mask_rate, const std::string& domain, const std::string& out_path) {
    Checkpoint teacher = load_checkpoint(teacher_path);
    Vocab vocab = load_vocab(vocab_path);
    require(teacher.config.vocab_size == vocab.size(), Errc::VocabMismatch,
            "teacher vocab_size does not match the vocab file");
    Corpus corpus = load_corpus_checked(corpus_path, vocab);
    std::optional<std::string> filter;
    if (!domain.empty()) filter = domain;
    LogitCache cache = precompute_cache(teacher.params, teacher.config, corpus, mask_seed, tau,
                                        top_k, teacher.hash, mask_rate, filter);
    write_cache(cache, out_path);
    std::cout << "sequences=" << cache.num_sequences() << " positions=" << cache.num_positions()
              << " bytes=" << std::filesystem::file_size(out_path) << "\n";
    return 0;
}

int cmd_chain(const std::vector<std::string>& stage_configs, const std::string& corpus_path,
              const std::string& vocab_path, const std::string& out_dir) {
    Vocab vocab = load_vocab(vocab_path);
    Corpus corpus = load_corpus_checked(corpus_path, vocab);
    std::vector<ChainStage> stages;
    for (const auto& p : stage_configs) {
        RunFileConfig cfg = parse_config(p);
        apply_vocab_default(cfg, vocab);
        stages.push_back({cfg.model, cfg.train, -1});
    }
    std::filesystem::create_directories(out_dir);
    ChainResult chain = chain_generations(stages, corpus, out_dir);
    std::ofstream lineage(out_dir + "/lineage.txt");
    for (size_t i = 0; i < chain.lineage.size(); ++i) {
        const auto& e = chain.lineage[i];
        lineage << "gen" << i << " model=" << e.model_id
                << " teacher=" << (e.teacher_id.empty() ? "-" : e.teacher_id)
                << " guided_steps=" << e.guided_steps << " corpus=" << e.corpus_id << "\n";
        const auto& m = chain.generations[i].metrics;
        double ppl = m.empty() || !m.back().valid_ppl ? 0.0 : *m.back().valid_ppl;
        std::cout << "gen" << i << " final_valid_ppl=" << ppl << "\n";
    }
    return 0;
}

int cmd_adapt(const std::string& config_path, const std::string& model_path,
              const std::string& corpus_path, const std::string& source_valid_path,
              const std::string& vocab_path, const std::vector<std::string>& teacher_specs,
              const std::string& out_dir) {
    RunFileConfig cfg = parse_config(config_path);
    Checkpoint base = load_checkpoint(model_path);
    Vocab vocab = load_vocab(vocab_path);
    require(base.config.vocab_size == vocab.size(), Errc::VocabMismatch,
            "model vocab_size does not match the vocab file");
    Corpus target = load_corpus_checked(corpus_path, vocab);
    Corpus source = load_corpus_checked(source_valid_path, vocab);
    LoadedTeachers teachers = load_teacher_caches(teacher_specs);
    RunOptions opts;
    opts.out_dir = out_dir;
    // adapt continues the loaded model; its architecture wins over the config
    cfg.model = base.config;
    AdaptResult r = adapt_domain(base.params, base.config, target,
                                 teachers.registry.empty() ? nullptr : &teachers.registry,
                                 cfg.train, source, opts);
    std::cout << "target_ppl_before=" << r.target_ppl_before
              << " target_ppl_after=" << r.target_ppl_after
              << " source_ppl_before=" << r.source_ppl_before
              << " source_ppl_after=" << r.source_ppl_after << "\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& corpus_path,
             const std::string& vocab_path, uint64_t mask_seed, double mask_rate) {
    Checkpoint ck = load_checkpoint(model_path);
    Vocab vocab = load_vocab(vocab_path);
    require(ck.config.vocab_size == vocab.size(), Errc::VocabMismatch,
            "model vocab_size does not match the vocab file");
    Corpus corpus = load_corpus_checked(corpus_path, vocab);
    double ppl = evaluate_ppl(ck.params, ck.config, corpus, mask_rate, mask_seed);
    char buf[64];
    std::snprintf(buf, sizeof buf, "valid_ppl=%.6f\n", ppl);
    std::cout << buf;
    return 0;
}

int cmd_proximity(const std::string& corpus_a, const std::string& vocab_a,
                  const std::string& corpus_b, const std::string& vocab_b, int top_n,
                  const std::string& stopword_file) {
    Vocab va = load_vocab(vocab_a);
    Vocab vb = load_vocab(vocab_b);
    Corpus a = load_corpus_checked(corpus_a, va);
    Corpus b = load_corpus_checked(corpus_b, vb);
    std::vector<std::string> stopwords;
    if (!stopword_file.empty()) {
        std::ifstream in(stopword_file);
        require(bool(in), Errc::IoError, "cannot open " + stopword_file);
        std::string w;
        while (in >> w) stopwords.push_back(w);
    }
    double p = domain_proximity(a, va, b, vb, top_n, stopwords);
    char buf[64];
    std::snprintf(buf, sizeof buf, "proximity=%.4f\n", p);
    std::cout << buf;
    return 0;
}

int cmd_report(const std::vector<std::string>& metric_specs, const std::string& title,
               const std::string& out_path) {
    std::vector<CurveSeries> series;
    for (const auto& s : metric_specs) {
        auto eq = s.find('=');
        require(eq != std::string::npos && eq > 0 && eq + 1 < s.size(), Errc::ConfigError,
                "--metrics expects label=path, got: " + s);
        series.push_back(read_ppl_series(s.substr(eq + 1), s.substr(0, eq)));
    }
    write_report(series, title, out_path);
    std::cout << "wrote " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"knowledge-inheritance training toolkit"};
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker threads for matrix kernels");

    // build-corpus
    auto* bc = app.add_subcommand("build-corpus", "tokenize, pack and split documents");
    std::vector<std::string> bc_inputs;
    std::string bc_vocab_in, bc_domain = "default", bc_out_corpus, bc_out_vocab;
    int bc_vocab_size = 8000, bc_seq_len = 128;
    uint64_t bc_seed = 0;
    bc->add_option("--input", bc_inputs, "input text file(s), blank-line separated documents")
        ->required();
    bc->add_option("--vocab", bc_vocab_in, "reuse an existing vocab file");
    bc->add_option("--vocab-size", bc_vocab_size, "vocabulary size incl. specials");
    bc->add_option("--seq-len", bc_seq_len, "packed sequence length");
    bc->add_option("--seed", bc_seed, "shuffle seed");
    bc->add_option("--domain", bc_domain, "domain tag for every sequence");
    bc->add_option("--out-corpus", bc_out_corpus, "output corpus path")->required();
    bc->add_option("--out-vocab", bc_out_vocab, "output vocab path");

    // pretrain / ki-train share flags
    std::string tr_config, tr_corpus, tr_vocab, tr_out = "run_out";
    std::vector<std::string> tr_teachers;
    auto* pt = app.add_subcommand("pretrain", "self-learning pre-training");
    auto* kt = app.add_subcommand("ki-train", "training with teacher guidance");
    for (auto* sc : {pt, kt}) {
        sc->add_option("--config", tr_config, "run config file")->required();
        sc->add_option("--corpus", tr_corpus, "corpus file")->required();
        sc->add_option("--vocab", tr_vocab, "vocab file")->required();
        sc->add_option("--out", tr_out, "output directory");
    }
    kt->add_option("--teacher-cache", tr_teachers, "[domain=]cache.kilc, repeatable");

    // precompute-logits
    auto* pc = app.add_subcommand("precompute-logits", "cache teacher top-K predictions");
    std::string pc_teacher, pc_corpus, pc_vocab, pc_domain, pc_out;
    double pc_tau = 2.0, pc_mask_rate = 0.15;
    int pc_top_k = 10;
    uint64_t pc_mask_seed = 77;
    pc->add_option("--teacher", pc_teacher, "teacher checkpoint")->required();
    pc->add_option("--corpus", pc_corpus, "corpus file")->required();
    pc->add_option("--vocab", pc_vocab, "vocab file")->required();
    pc->add_option("--tau", pc_tau, "softmax temperature");
    pc->add_option("--top-k", pc_top_k, "entries kept per position");
    pc->add_option("--mask-seed", pc_mask_seed, "static masking seed");
    pc->add_option("--mask-rate", pc_mask_rate, "masking rate");
    pc->add_option("--domain", pc_domain, "only cache sequences with this domain tag");
    pc->add_option("--out", pc_out, "output cache path")->required();

    // chain
    auto* ch = app.add_subcommand("chain", "train a generation chain");
    std::vector<std::string> ch_stages;
    std::string ch_corpus, ch_vocab, ch_out = "chain_out";
    ch->add_option("--stage", ch_stages, "config file per generation, smallest first")
        ->required();
    ch->add_option("--corpus", ch_corpus, "corpus file")->required();
    ch->add_option("--vocab", ch_vocab, "vocab file")->required();
    ch->add_option("--out", ch_out, "output directory");

    // adapt
    auto* ad = app.add_subcommand("adapt", "continue training on a new domain");
    std::string ad_config, ad_model, ad_corpus, ad_source, ad_vocab, ad_out = "adapt_out";
    std::vector<std::string> ad_teachers;
    ad->add_option("--config", ad_config, "run config file")->required();
    ad->add_option("--model", ad_model, "starting checkpoint")->required();
    ad->add_option("--corpus", ad_corpus, "target-domain corpus")->required();
    ad->add_option("--source-valid", ad_source, "source-domain corpus for forgetting PPL")
        ->required();
    ad->add_option("--vocab", ad_vocab, "vocab file")->required();
    ad->add_option("--teacher-cache", ad_teachers, "[domain=]cache.kilc, repeatable");
    ad->add_option("--out", ad_out, "output directory");

    // eval
    auto* ev = app.add_subcommand("eval", "validation perplexity of a checkpoint");
    std::string ev_model, ev_corpus, ev_vocab;
    uint64_t ev_mask_seed = 77;
    double ev_mask_rate = 0.15;
    ev->add_option("--model", ev_model, "checkpoint")->required();
    ev->add_option("--corpus", ev_corpus, "corpus file")->required();
    ev->add_option("--vocab", ev_vocab, "vocab file")->required();
    ev->add_option("--mask-seed", ev_mask_seed, "evaluation mask seed");
    ev->add_option("--mask-rate", ev_mask_rate, "masking rate");

    // proximity
    auto* px = app.add_subcommand("proximity", "top-N vocabulary overlap of two corpora");
    std::string px_a, px_va, px_b, px_vb, px_stop;
    int px_top_n = 1000;
    px->add_option("--corpus-a", px_a)->required();
    px->add_option("--vocab-a", px_va)->required();
    px->add_option("--corpus-b", px_b)->required();
    px->add_option("--vocab-b", px_vb)->required();
    px->add_option("--top-n", px_top_n, "words per side");
    px->add_option("--stopwords", px_stop, "stopword file, one per line");

    // report
    auto* rp = app.add_subcommand("report", "merge metrics CSVs into an SVG of PPL curves");
    std::vector<std::string> rp_metrics;
    std::string rp_title = "validation PPL", rp_out = "report.svg";
    rp->add_option("--metrics", rp_metrics, "label=metrics.csv, repeatable")->required();
    rp->add_option("--title", rp_title, "plot title");
    rp->add_option("--out", rp_out, "output SVG path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        if (e.get_exit_code() == 0) return app.exit(e);  // --help / --version
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        ki::set_threads(threads);
        if (bc->parsed())
            return cmd_build_corpus(bc_inputs, bc_vocab_in, bc_vocab_size, bc_seq_len, bc_seed,
                                    bc_domain, bc_out_corpus, bc_out_vocab);
        if (pt->parsed()) return cmd_train(tr_config, tr_corpus, tr_vocab, {}, tr_out, true);
        if (kt->parsed())
            return cmd_train(tr_config, tr_corpus, tr_vocab, tr_teachers, tr_out, false);
        if (pc->parsed())
            return cmd_precompute(pc_teacher, pc_corpus, pc_vocab, pc_tau, pc_top_k, pc_mask_seed,
                                  pc_mask_rate, pc_domain, pc_out);
        if (ch->parsed()) return cmd_chain(ch_stages, ch_corpus, ch_vocab, ch_out);
        if (ad->parsed())
            return cmd_adapt(ad_config, ad_model, ad_corpus, ad_source, ad_vocab, ad_teachers,
                             ad_out);
        if (ev->parsed()) return cmd_eval(ev_model, ev_corpus, ev_vocab, ev_mask_seed, ev_mask_rate);
        if (px->parsed()) return cmd_proximity(px_a, px_va, px_b, px_vb, px_top_n, px_stop);
        if (rp->parsed()) return cmd_report(rp_metrics, rp_title, rp_out);
    } catch (const ki::Error& e) {
        std::cerr << e.what() << "\n";
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
