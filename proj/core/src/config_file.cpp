#include "ki/config_file.hpp"

#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "ki/errors.hpp"

namespace ki {

namespace {

int64_t parse_i64(const std::string& key, const std::string& v) {
    int64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc{} && p == v.data() + v.size(), Errc::ConfigError,
            "expected integer for " + key + ", got '" + v + "'");
    return out;
}

int parse_int(const std::string& key, const std::string& v) {
    int64_t x = parse_i64(key, v);
    require(x >= INT32_MIN && x <= INT32_MAX, Errc::ConfigError, "integer out of range: " + key);
    return int(x);
}

uint64_t parse_u64(const std::string& key, const std::string& v) {
    uint64_t out = 0;
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    require(ec == std::errc{} && p == v.data() + v.size(), Errc::ConfigError,
            "expected unsigned integer for " + key + ", got '" + v + "'");
    return out;
}

double parse_f64(const std::string& key, const std::string& v) {
    try {
        size_t used = 0;
        double out = std::stod(v, &used);
        require(used == v.size(), Errc::ConfigError, "trailing characters in " + key);
        return out;
    } catch (const Error&) {
        throw;
    } catch (...) {
        fail(Errc::ConfigError, "expected number for " + key + ", got '" + v + "'");
    }
}

std::string trim(std::string s) {
    size_t a = s.find_first_not_of(" \t\r");
    size_t b = s.find_last_not_of(" \t\r");
    return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
}

}  // namespace

RunFileConfig parse_config_text(const std::string& text) {
    RunFileConfig cfg;
    // desk-scale model defaults; optimizer defaults live in TrainConfig
    cfg.model.objective = Objective::mlm;
    cfg.model.n_layers = 4;
    cfg.model.d_model = 256;
    cfg.model.n_heads = 8;
    cfg.model.d_ffn = 1024;
    cfg.model.vocab_size = 8000;
    cfg.model.max_seq_len = 128;
    cfg.model.dropout = 0.1;

    bool saw_strategy = false, saw_guided = false, saw_seed = false;
    std::string strategy_value;
    std::set<std::string> seen;

    std::istringstream in(text);
    std::string raw;
    int lineno = 0;
    while (std::getline(in, raw)) {
        ++lineno;
        std::string line = raw;
        if (auto h = line.find('#'); h != std::string::npos) line.resize(h);
        line = trim(line);
        if (line.empty()) continue;
        auto eq = line.find('=');
        require(eq != std::string::npos, Errc::ConfigError,
                "line " + std::to_string(lineno) + ": expected key=value");
        std::string key = trim(line.substr(0, eq));
        std::string val = trim(line.substr(eq + 1));
        require(!key.empty() && !val.empty(), Errc::ConfigError,
                "line " + std::to_string(lineno) + ": empty key or value");
        require(seen.insert(key).second, Errc::ConfigError, "duplicate key " + key);

        auto& m = cfg.model;
        auto& t = cfg.train;
        if (key == "model.objective") {
            require(val == "mlm" || val == "clm", Errc::ConfigError,
                    "model.objective must be mlm or clm");
            m.objective = val == "mlm" ? Objective::mlm : Objective::clm;
        } else if (key == "model.n_layers") m.n_layers = parse_int(key, val);
        else if (key == "model.d_model") m.d_model = parse_int(key, val);
        else if (key == "model.n_heads") m.n_heads = parse_int(key, val);
        else if (key == "model.d_ffn") m.d_ffn = parse_int(key, val);
        else if (key == "model.vocab_size") {
            m.vocab_size = parse_int(key, val);
            cfg.vocab_size_explicit = true;
        }
        else if (key == "model.max_seq_len") m.max_seq_len = parse_int(key, val);
        else if (key == "model.dropout") m.dropout = parse_f64(key, val);
        else if (key == "train.total_steps") t.total_steps = parse_i64(key, val);
        else if (key == "train.batch_size") t.batch_size = parse_int(key, val);
        else if (key == "train.peak_lr") t.peak_lr = parse_f64(key, val);
        else if (key == "train.warmup_frac") t.warmup_frac = parse_f64(key, val);
        else if (key == "train.weight_decay") t.weight_decay = parse_f64(key, val);
        else if (key == "train.adam_beta1") t.adam_beta1 = parse_f64(key, val);
        else if (key == "train.adam_beta2") t.adam_beta2 = parse_f64(key, val);
        else if (key == "train.adam_eps") t.adam_eps = parse_f64(key, val);
        else if (key == "train.dropout") t.dropout = parse_f64(key, val);
        else if (key == "train.tau") t.tau = parse_f64(key, val);
        else if (key == "train.top_k") t.top_k = parse_int(key, val);
        else if (key == "train.seed") { t.seed = parse_u64(key, val); saw_seed = true; }
        else if (key == "train.eval_every") t.eval_every = parse_i64(key, val);
        else if (key == "train.mask_rate") t.mask_rate = parse_f64(key, val);
        else if (key == "train.label_smoothing") t.label_smoothing = parse_f64(key, val);
        else if (key == "train.mask_seed") t.mask_seed = parse_u64(key, val);
        else if (key == "schedule.strategy") { strategy_value = val; saw_strategy = true; }
        else if (key == "schedule.guided_steps") {
            cfg.train.schedule.guided_steps = parse_i64(key, val);
            saw_guided = true;
        } else if (key == "schedule.constant_alpha")
            cfg.train.schedule.constant_alpha = parse_f64(key, val);
        else fail(Errc::ConfigError, "unknown key " + key);
    }

    if (!saw_seed) {
        if (const char* env = std::getenv("KI_SEED"))
            cfg.train.seed = parse_u64("KI_SEED", env);
    }
    auto& sched = cfg.train.schedule;
    sched.strategy = saw_strategy ? parse_strategy(strategy_value)
                                  : ScheduleSpec::Strategy::self_only;
    sched.total_steps = cfg.train.total_steps;
    const bool guided_kind = sched.strategy == ScheduleSpec::Strategy::linear ||
                             sched.strategy == ScheduleSpec::Strategy::heviside;
    if (guided_kind && !saw_guided)
        sched.guided_steps = (cfg.train.total_steps * 3 + 5) / 10;  // default: 30% of T
    if (!guided_kind) sched.guided_steps = std::min(sched.guided_steps, cfg.train.total_steps);
    if (cfg.train.eval_every > cfg.train.total_steps && cfg.train.total_steps > 0)
        cfg.train.eval_every = cfg.train.total_steps;

    cfg.model.validate();
    cfg.train.validate();
    return cfg;
}

RunFileConfig parse_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), Errc::ConfigError, "cannot open config file " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(std::move(buf).str());
}

}  // namespace ki
