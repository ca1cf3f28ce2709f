#include <doctest.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "ki/config_file.hpp"
#include "ki/errors.hpp"
#include "ki/report.hpp"
#include "ki/textgen.hpp"
#include "ki/trainer.hpp"

using namespace ki;

TEST_CASE("empty config yields the documented optimizer defaults") {
    RunFileConfig cfg = parse_config_text("");
    CHECK(cfg.train.adam_beta1 == 0.9);
    CHECK(cfg.train.adam_beta2 == 0.98);
    CHECK(cfg.train.adam_eps == 1e-6);
    CHECK(cfg.train.weight_decay == 0.01);
    CHECK(cfg.train.dropout == 0.1);
    CHECK(cfg.train.warmup_frac == 0.10);
    CHECK(cfg.train.mask_rate == 0.15);
    CHECK(cfg.train.tau == 2.0);
    CHECK(cfg.train.top_k == 10);
    CHECK(cfg.train.schedule.strategy == ScheduleSpec::Strategy::self_only);
    CHECK_FALSE(cfg.vocab_size_explicit);
}

TEST_CASE("type errors and unknown keys name the offending key") {
    try {
        parse_config_text("train.tau=abc\n");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == Errc::ConfigError);
        CHECK(std::string(e.what()).find("train.tau") != std::string::npos);
    }
    try {
        parse_config_text("train.learning_rate=1\n");
        CHECK(false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("train.learning_rate") != std::string::npos);
    }
    CHECK_THROWS_AS(parse_config_text("train.tau=2\ntrain.tau=3\n"), Error);
    CHECK_THROWS_AS(parse_config_text("just a line\n"), Error);
}

TEST_CASE("schedule keys map onto the ScheduleSpec") {
    RunFileConfig cfg = parse_config_text(
        "train.total_steps=20000\nschedule.strategy=linear\nschedule.guided_steps=6000\n");
    CHECK(cfg.train.schedule.strategy == ScheduleSpec::Strategy::linear);
    CHECK(cfg.train.schedule.guided_steps == 6000);
    CHECK(cfg.train.schedule.total_steps == 20000);

    // guided_steps defaults to 30% of T for decaying strategies
    RunFileConfig d = parse_config_text("train.total_steps=20000\nschedule.strategy=linear\n");
    CHECK(d.train.schedule.guided_steps == 6000);
}

TEST_CASE("comments, blank lines and whitespace are tolerated") {
    RunFileConfig cfg = parse_config_text(
        "# a comment\n\n  model.d_model = 64   # trailing\nmodel.n_heads=4\n");
    CHECK(cfg.model.d_model == 64);
    CHECK(cfg.model.n_heads == 4);
}

TEST_CASE("KI_SEED overrides the default seed but not an explicit one") {
    setenv("KI_SEED", "4242", 1);
    CHECK(parse_config_text("").train.seed == 4242);
    CHECK(parse_config_text("train.seed=7\n").train.seed == 7);
    unsetenv("KI_SEED");
    CHECK(parse_config_text("").train.seed == 0);
}

TEST_CASE("report renders PPL curves from metrics files") {
    auto dir = std::filesystem::temp_directory_path();
    std::string p1 = (dir / "ki_m1.csv").string(), p2 = (dir / "ki_m2.csv").string();
    std::vector<MetricsRow> rows;
    for (int i = 1; i <= 10; ++i) {
        MetricsRow r;
        r.step = i;
        r.alpha = 0.5;
        r.lr = 1e-4;
        r.loss_self = 5.0 / i;
        r.loss_ki = 4.0 / i;
        r.loss_total = 4.5 / i;
        r.tokens_seen = i * 64;
        if (i % 2 == 0) r.valid_ppl = 100.0 / i;
        rows.push_back(r);
    }
    {
        std::ofstream f(p1);
        f << metrics_csv(rows);
    }
    for (auto& r : rows)
        if (r.valid_ppl) r.valid_ppl = *r.valid_ppl * 1.1;
    {
        std::ofstream f(p2);
        f << metrics_csv(rows);
    }
    CurveSeries s1 = read_ppl_series(p1, "ki");
    CurveSeries s2 = read_ppl_series(p2, "baseline");
    CHECK(s1.points.size() == 5);  // only eval rows carry a ppl
    CHECK(s1.points.front().first == 2);
    CHECK(s1.points.front().second == doctest::Approx(50.0));

    std::vector<CurveSeries> series = {s1, s2};
    std::string svg = render_ppl_svg(series, "demo");
    CHECK(svg.find("<svg") != std::string::npos);
    CHECK(svg.find("polyline") != std::string::npos);
    CHECK(svg.find("ki") != std::string::npos);
    CHECK(svg.find("baseline") != std::string::npos);
    CHECK(svg.find("validation PPL") != std::string::npos);
    std::remove(p1.c_str());
    std::remove(p2.c_str());
}

TEST_CASE("textgen is deterministic and respects domains") {
    TextgenSpec spec;
    spec.domain = "prose";
    spec.seed = 5;
    spec.target_tokens = 5000;
    auto a = generate_documents(spec);
    auto b = generate_documents(spec);
    CHECK(a == b);
    CHECK(a.size() > 10);
    size_t tokens = 0;
    for (const auto& d : a) tokens += size_t(std::count(d.begin(), d.end(), ' ')) + 1;
    CHECK(tokens >= 5000);

    spec.domain = "tech";
    auto c = generate_documents(spec);
    CHECK(c != a);
    TextgenSpec bad = spec;
    bad.domain = "news";
    CHECK_THROWS_AS(generate_documents(bad), Error);
}

// ---------------------------------------------------------------------------
// end-to-end exercises of the installed binary; runs only when the harness
// passes --cli-binary

extern std::string g_cli_binary;

namespace {
int run_cli(const std::string& args, std::string* stdout_text = nullptr) {
    std::string cmd = g_cli_binary + " " + args;
    if (!stdout_text) {
        int rc = std::system((cmd + " >/dev/null 2>/dev/null").c_str());
        return WEXITSTATUS(rc);
    }
    FILE* pipe = popen((cmd + " 2>/dev/null").c_str(), "r");
    REQUIRE(pipe != nullptr);
    char buf[512];
    while (fgets(buf, sizeof buf, pipe)) *stdout_text += buf;
    return WEXITSTATUS(pclose(pipe));
}
}  // namespace

TEST_SUITE("cli") {
    TEST_CASE("exit-code contract and end-to-end pipeline") {
        REQUIRE_FALSE(g_cli_binary.empty());
        auto dir = std::filesystem::temp_directory_path() / "ki_cli_test";
        std::filesystem::remove_all(dir);
        std::filesystem::create_directories(dir);
        auto in_dir = [&](const std::string& f) { return (dir / f).string(); };

        CHECK(run_cli("--help") == 0);
        CHECK(run_cli("ki-train --config " + in_dir("missing.cfg") + " --corpus x --vocab y") ==
              1);

        // corpus inputs
        {
            TextgenSpec spec;
            spec.domain = "prose";
            spec.seed = 1;
            spec.target_tokens = 30000;
            auto docs = generate_documents(spec);
            std::ofstream f(in_dir("text.txt"));
            for (auto& d : docs) f << d << "\n\n";
        }
        CHECK(run_cli("build-corpus --input " + in_dir("text.txt") +
                      " --vocab-size 300 --seq-len 16 --seed 3 --domain prose --out-corpus " +
                      in_dir("c.kicorpus") + " --out-vocab " + in_dir("v.vocab")) == 0);

        // tiny config
        {
            std::ofstream f(in_dir("run.cfg"));
            f << "model.n_layers=1\nmodel.d_model=16\nmodel.n_heads=2\nmodel.d_ffn=32\n"
                 "model.max_seq_len=16\ntrain.total_steps=6\ntrain.batch_size=4\n"
                 "train.peak_lr=1e-3\ntrain.eval_every=3\ntrain.dropout=0\ntrain.seed=5\n";
        }
        CHECK(run_cli("pretrain --config " + in_dir("run.cfg") + " --corpus " +
                      in_dir("c.kicorpus") + " --vocab " + in_dir("v.vocab") + " --out " +
                      in_dir("teacher_run")) == 0);

        std::string out;
        CHECK(run_cli("eval --model " + in_dir("teacher_run/ckpt_step6.kickpt") + " --corpus " +
                          in_dir("c.kicorpus") + " --vocab " + in_dir("v.vocab"),
                      &out) == 0);
        CHECK(out.find("valid_ppl=") == 0);

        CHECK(run_cli("precompute-logits --teacher " + in_dir("teacher_run/ckpt_step6.kickpt") +
                      " --corpus " + in_dir("c.kicorpus") + " --vocab " + in_dir("v.vocab") +
                      " --top-k 8 --out " + in_dir("t.kilc")) == 0);

        {
            std::ofstream f(in_dir("ki.cfg"));
            f << "model.n_layers=1\nmodel.d_model=16\nmodel.n_heads=2\nmodel.d_ffn=32\n"
                 "model.max_seq_len=16\ntrain.total_steps=6\ntrain.batch_size=4\n"
                 "train.peak_lr=1e-3\ntrain.eval_every=3\ntrain.dropout=0\ntrain.seed=6\n"
                 "schedule.strategy=linear\nschedule.guided_steps=3\n";
        }
        CHECK(run_cli("ki-train --config " + in_dir("ki.cfg") + " --corpus " +
                      in_dir("c.kicorpus") + " --vocab " + in_dir("v.vocab") +
                      " --teacher-cache " + in_dir("t.kilc") + " --out " + in_dir("ki_run")) == 0);

        CHECK(run_cli("report --metrics ki=" + in_dir("ki_run/metrics.csv") +
                      " --metrics self=" + in_dir("teacher_run/metrics.csv") + " --out " +
                      in_dir("r.svg")) == 0);
        CHECK(std::filesystem::exists(in_dir("r.svg")));

        CHECK(run_cli("proximity --corpus-a " + in_dir("c.kicorpus") + " --vocab-a " +
                          in_dir("v.vocab") + " --corpus-b " + in_dir("c.kicorpus") +
                          " --vocab-b " + in_dir("v.vocab") + " --top-n 50",
                      &out) == 0);
        CHECK(out.find("proximity=1.0000") != std::string::npos);

        // data errors exit 2
        {
            std::ofstream f(in_dir("bad.kicorpus"));
            f << "NOTACORPUS v9\n";
        }
        CHECK(run_cli("eval --model " + in_dir("teacher_run/ckpt_step6.kickpt") + " --corpus " +
                      in_dir("bad.kicorpus") + " --vocab " + in_dir("v.vocab")) == 2);

        // temperature mismatch between cache and run is a data error
        {
            std::ofstream f(in_dir("tau.cfg"));
            f << "model.n_layers=1\nmodel.d_model=16\nmodel.n_heads=2\nmodel.d_ffn=32\n"
                 "model.max_seq_len=16\ntrain.total_steps=4\ntrain.batch_size=4\n"
                 "train.eval_every=2\ntrain.dropout=0\ntrain.tau=7\n"
                 "schedule.strategy=linear\nschedule.guided_steps=2\n";
        }
        CHECK(run_cli("ki-train --config " + in_dir("tau.cfg") + " --corpus " +
                      in_dir("c.kicorpus") + " --vocab " + in_dir("v.vocab") +
                      " --teacher-cache " + in_dir("t.kilc") + " --out " + in_dir("x")) == 2);

        std::filesystem::remove_all(dir);
    }
}
