#include "ki/checkpoint.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ki/errors.hpp"

namespace ki {

namespace {
std::string fmt_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}
}  // namespace

std::string serialize_checkpoint(const ModelConfig& config, const Params<float>& params) {
    auto& p = const_cast<Params<float>&>(params);
    auto refs = tensor_refs(p);
    std::ostringstream out;
    out << "KICKPT v1\n";
    out << "objective=" << objective_name(config.objective) << " n_layers=" << config.n_layers
        << " d_model=" << config.d_model << " n_heads=" << config.n_heads
        << " d_ffn=" << config.d_ffn << " vocab_size=" << config.vocab_size
        << " max_seq_len=" << config.max_seq_len << " dropout=" << fmt_double(config.dropout)
        << "\n";
    out << "tensors=" << refs.size() << "\n";
    size_t offset = 0;
    for (auto& t : refs) {
        out << t.name << ' ' << offset << ' ' << t.mat->rows << ' ' << t.mat->cols << "\n";
        offset += t.mat->size();
    }
    out << "blob\n";
    for (auto& t : refs)
        out.write(reinterpret_cast<const char*>(t.mat->data()),
                  std::streamsize(t.mat->size() * sizeof(float)));
    return std::move(out).str();
}

Sha256 save_checkpoint(const std::string& path, const ModelConfig& config,
                       const Params<float>& params) {
    std::string bytes = serialize_checkpoint(config, params);
    std::ofstream out(path, std::ios::binary);
    require(bool(out), Errc::IoError, "cannot open " + path);
    out.write(bytes.data(), std::streamsize(bytes.size()));
    require(bool(out), Errc::IoError, "write failed: " + path);
    return sha256(bytes);
}

Checkpoint parse_checkpoint(const std::string& bytes) {
    std::istringstream in(bytes);
    std::string line;
    require(bool(std::getline(in, line)) && line == "KICKPT v1", Errc::FormatError,
            "bad checkpoint magic");
    require(bool(std::getline(in, line)), Errc::FormatError, "missing config line");

    Checkpoint ck;
    {
        std::istringstream cs(line);
        std::string kv;
        while (cs >> kv) {
            auto eq = kv.find('=');
            require(eq != std::string::npos, Errc::FormatError, "bad config entry: " + kv);
            std::string key = kv.substr(0, eq), val = kv.substr(eq + 1);
            auto& c = ck.config;
            if (key == "objective") {
                require(val == "mlm" || val == "clm", Errc::FormatError, "bad objective");
                c.objective = val == "mlm" ? Objective::mlm : Objective::clm;
            } else if (key == "n_layers") c.n_layers = std::stoi(val);
            else if (key == "d_model") c.d_model = std::stoi(val);
            else if (key == "n_heads") c.n_heads = std::stoi(val);
            else if (key == "d_ffn") c.d_ffn = std::stoi(val);
            else if (key == "vocab_size") c.vocab_size = std::stoi(val);
            else if (key == "max_seq_len") c.max_seq_len = std::stoi(val);
            else if (key == "dropout") c.dropout = std::stod(val);
            else fail(Errc::FormatError, "unknown checkpoint config key: " + key);
        }
    }
    ck.config.validate();
    ck.params.init_shapes(ck.config);
    auto refs = tensor_refs(ck.params);

    require(bool(std::getline(in, line)) && line.rfind("tensors=", 0) == 0, Errc::FormatError,
            "missing tensor count");
    size_t n = std::stoul(line.substr(8));
    require(n == refs.size(), Errc::FormatError, "tensor count does not match config");
    size_t expect_offset = 0;
    for (size_t i = 0; i < n; ++i) {
        require(bool(std::getline(in, line)), Errc::FormatError, "truncated tensor index");
        std::istringstream ts(line);
        std::string name;
        size_t offset = 0;
        int rows = 0, cols = 0;
        require(bool(ts >> name >> offset >> rows >> cols), Errc::FormatError,
                "bad tensor index line");
        require(name == refs[i].name && rows == refs[i].mat->rows && cols == refs[i].mat->cols &&
                    offset == expect_offset,
                Errc::FormatError, "tensor index mismatch at " + name);
        expect_offset += refs[i].mat->size();
    }
    require(bool(std::getline(in, line)) && line == "blob", Errc::FormatError,
            "missing blob marker");

    size_t blob_at = size_t(in.tellg());
    size_t need = expect_offset * sizeof(float);
    require(bytes.size() - blob_at == need, Errc::FormatError, "checkpoint blob size mismatch");
    const char* src = bytes.data() + blob_at;
    for (auto& t : refs) {
        std::memcpy(t.mat->data(), src, t.mat->size() * sizeof(float));
        src += t.mat->size() * sizeof(float);
    }
    for (auto& t : refs)
        for (float v : t.mat->v)
            require(std::isfinite(v), Errc::FormatError, "non-finite value in " + t.name);
    ck.hash = sha256(bytes);
    return ck;
}

Checkpoint load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), Errc::IoError, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(std::move(buf).str());
}

}  // namespace ki
