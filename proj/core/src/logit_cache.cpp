#include "ki/logit_cache.hpp"

#include <zlib.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <memory>

#include "ki/errors.hpp"

namespace ki {

namespace {

void put_bytes(std::string& out, const void* p, size_t n) {
    out.append(reinterpret_cast<const char*>(p), n);
}
template <typename T>
void put(std::string& out, T v) {
    put_bytes(out, &v, sizeof v);
}

struct Reader {
    const uint8_t* p;
    size_t left;
    void take(void* dst, size_t n) {
        require(left >= n, Errc::CorruptCache, "cache file truncated");
        std::memcpy(dst, p, n);
        p += n;
        left -= n;
    }
    template <typename T>
    T get() {
        T v;
        take(&v, sizeof v);
        return v;
    }
};

}  // namespace

void LogitCache::add(uint64_t seq_id, int position, const SparseDistribution& dist) {
    require(position >= 0 && position <= 0xffff, Errc::InvalidArgument, "position out of range");
    auto it = seqs_.find(seq_id);
    if (it == seqs_.end()) {
        it = seqs_.emplace(seq_id, SeqBlock{}).first;
        it->second.offsets.push_back(0);
        order_.push_back(seq_id);
    }
    SeqBlock& blk = it->second;
    require(blk.positions.empty() || blk.positions.back() < uint16_t(position),
            Errc::InvalidArgument, "positions must be added in ascending order");
    blk.positions.push_back(uint16_t(position));
    for (const auto& e : dist.entries) {
        blk.ids.push_back(e.token_id);
        blk.probs.push_back(float(e.prob));
    }
    blk.offsets.push_back(uint32_t(blk.ids.size()));
}

bool LogitCache::contains(uint64_t seq_id, int position) const {
    auto it = seqs_.find(seq_id);
    if (it == seqs_.end()) return false;
    const auto& pos = it->second.positions;
    return std::binary_search(pos.begin(), pos.end(), uint16_t(position));
}

SparseDistribution LogitCache::lookup(uint64_t seq_id, int position) const {
    auto it = seqs_.find(seq_id);
    require(it != seqs_.end(), Errc::MissingPosition,
            "no cached records for sequence " + std::to_string(seq_id));
    const SeqBlock& blk = it->second;
    auto pit = std::lower_bound(blk.positions.begin(), blk.positions.end(), uint16_t(position));
    require(pit != blk.positions.end() && *pit == uint16_t(position), Errc::MissingPosition,
            "position " + std::to_string(position) + " not cached for sequence " +
                std::to_string(seq_id));
    size_t pi = size_t(pit - blk.positions.begin());
    SparseDistribution d;
    d.entries.reserve(blk.offsets[pi + 1] - blk.offsets[pi]);
    for (uint32_t e = blk.offsets[pi]; e < blk.offsets[pi + 1]; ++e)
        d.entries.push_back({blk.ids[e], double(blk.probs[e])});
    return d;
}

size_t LogitCache::num_positions() const {
    size_t n = 0;
    for (const auto& [id, blk] : seqs_) n += blk.positions.size();
    return n;
}

bool LogitCache::operator==(const LogitCache& o) const {
    auto hdr_eq = [](const CacheHeader& a, const CacheHeader& b) {
        return a.version == b.version && a.objective == b.objective &&
               a.vocab_size == b.vocab_size && a.top_k == b.top_k && a.tau == b.tau &&
               a.mask_seed == b.mask_seed && a.teacher_hash == b.teacher_hash;
    };
    if (!hdr_eq(header, o.header) || order_ != o.order_) return false;
    for (uint64_t id : order_) {
        const auto& a = seqs_.at(id);
        const auto& b = o.seqs_.at(id);
        if (a.positions != b.positions || a.offsets != b.offsets || a.ids != b.ids ||
            a.probs != b.probs)
            return false;
    }
    return true;
}

LogitCache precompute_cache(const Params<float>& teacher_params, const ModelConfig& teacher_config,
                            const Corpus& corpus, uint64_t mask_seed, double tau, int top_k,
                            const Sha256& teacher_hash, double mask_rate,
                            const std::optional<std::string>& domain_filter) {
    teacher_config.validate();
    require(teacher_config.vocab_size == corpus.vocab_size, Errc::VocabMismatch,
            "teacher vocab_size does not match the corpus");
    require(tau > 0.0, Errc::InvalidTemperature, "temperature must be positive");
    require(top_k >= 1, Errc::InvalidK, "K must be positive");

    LogitCache cache;
    cache.header.version = 1;
    cache.header.objective = teacher_config.objective;
    cache.header.vocab_size = uint32_t(teacher_config.vocab_size);
    cache.header.top_k = uint16_t(std::min<int>(top_k, teacher_config.vocab_size));
    cache.header.tau = float(tau);
    cache.header.mask_seed = mask_seed;
    cache.header.teacher_hash = teacher_hash;

    std::vector<size_t> todo;
    for (size_t i = 0; i < corpus.num_sequences(); ++i) {
        if (corpus.splits[i] != Split::train) continue;
        if (domain_filter && corpus.domains[i] != *domain_filter) continue;
        todo.push_back(i);
    }
    require(!todo.empty(), Errc::EmptyCorpus, "no train sequences to precompute");

    std::unique_ptr<Workspace<float>, WorkspaceDeleter<float>> ws(workspace_new<float>());
    constexpr size_t kBatch = 32;  // fixed grouping keeps the output byte-stable
    for (size_t at = 0; at < todo.size(); at += kBatch) {
        size_t n = std::min(kBatch, todo.size() - at);
        std::span<const size_t> idxs(todo.data() + at, n);
        MaskedBatch mb;
        try {
            mb = apply_masking(corpus, idxs, mask_rate, mask_seed, teacher_config.objective);
        } catch (const Error& e) {
            if (e.code() == Errc::EmptyLossSupport) continue;  // nothing to cache in this group
            throw;
        }
        const Mat<float>& logits =
            forward_at_loss_positions(teacher_params, teacher_config, mb, false, nullptr, *ws);
        int row = 0;
        for (int b = 0; b < mb.batch; ++b) {
            for (int pos : mb.loss_positions[size_t(b)]) {
                std::span<const float> zrow(logits.row(row), size_t(logits.cols));
                for (float z : zrow)
                    require(std::isfinite(z), Errc::NumericFailure, "non-finite teacher logits");
                auto probs = temperature_softmax(zrow, tau);
                SparseDistribution d = topk_truncate(probs, top_k);
                d.quantize_to_f32();
                cache.add(mb.seq_ids[size_t(b)], pos, d);
                ++row;
            }
        }
    }
    return cache;
}

void write_cache(const LogitCache& cache, const std::string& path) {
    std::string body;
    body.reserve(64 + cache.num_positions() * (4 + size_t(cache.header.top_k) * 8));
    put_bytes(body, "KILC", 4);
    put<uint16_t>(body, cache.header.version);
    put<uint8_t>(body, uint8_t(cache.header.objective));
    put<uint8_t>(body, 0);
    put<uint32_t>(body, cache.header.vocab_size);
    put<uint16_t>(body, cache.header.top_k);
    put<uint16_t>(body, 0);
    put<float>(body, cache.header.tau);
    put<uint64_t>(body, cache.header.mask_seed);
    put_bytes(body, cache.header.teacher_hash.data(), cache.header.teacher_hash.size());
    put<uint64_t>(body, uint64_t(cache.order_.size()));

    for (uint64_t id : cache.order_) {
        const auto& blk = cache.seqs_.at(id);
        put<uint64_t>(body, id);
        put<uint32_t>(body, uint32_t(blk.positions.size()));
        for (size_t pi = 0; pi < blk.positions.size(); ++pi) {
            put<uint16_t>(body, blk.positions[pi]);
            uint32_t e0 = blk.offsets[pi], e1 = blk.offsets[pi + 1];
            put<uint16_t>(body, uint16_t(e1 - e0));
            for (uint32_t e = e0; e < e1; ++e) {
                put<uint32_t>(body, uint32_t(blk.ids[e]));
                put<float>(body, blk.probs[e]);
            }
        }
    }
    uint32_t crc = uint32_t(::crc32(0, reinterpret_cast<const Bytef*>(body.data()), uInt(body.size())));
    put<uint32_t>(body, crc);

    std::ofstream out(path, std::ios::binary);
    require(bool(out), Errc::IoError, "cannot open " + path);
    out.write(body.data(), std::streamsize(body.size()));
    require(bool(out), Errc::IoError, "write failed: " + path);
}

LogitCache read_cache(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(bool(in), Errc::IoError, "cannot open " + path);
    std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    require(bytes.size() >= 4 && std::memcmp(bytes.data(), "KILC", 4) == 0, Errc::FormatError,
            "bad cache magic");
    require(bytes.size() >= 4 + 4, Errc::CorruptCache, "cache file truncated");
    uint32_t stored_crc;
    std::memcpy(&stored_crc, bytes.data() + bytes.size() - 4, 4);
    uint32_t crc = uint32_t(
        ::crc32(0, reinterpret_cast<const Bytef*>(bytes.data()), uInt(bytes.size() - 4)));
    require(crc == stored_crc, Errc::CorruptCache, "cache checksum mismatch");

    Reader r{reinterpret_cast<const uint8_t*>(bytes.data()) + 4, bytes.size() - 8};
    LogitCache cache;
    cache.header.version = r.get<uint16_t>();
    require(cache.header.version == 1, Errc::FormatError, "unsupported cache version");
    uint8_t obj = r.get<uint8_t>();
    require(obj <= 1, Errc::FormatError, "bad objective byte");
    cache.header.objective = Objective(obj);
    (void)r.get<uint8_t>();
    cache.header.vocab_size = r.get<uint32_t>();
    cache.header.top_k = r.get<uint16_t>();
    (void)r.get<uint16_t>();
    cache.header.tau = r.get<float>();
    require(cache.header.tau > 0, Errc::FormatError, "non-positive tau in cache header");
    cache.header.mask_seed = r.get<uint64_t>();
    r.take(cache.header.teacher_hash.data(), cache.header.teacher_hash.size());
    uint64_t n_seqs = r.get<uint64_t>();

    for (uint64_t s = 0; s < n_seqs; ++s) {
        uint64_t seq_id = r.get<uint64_t>();
        uint32_t n_pos = r.get<uint32_t>();
        int last_pos = -1;
        for (uint32_t pi = 0; pi < n_pos; ++pi) {
            uint16_t pos = r.get<uint16_t>();
            uint16_t k = r.get<uint16_t>();
            require(int(pos) > last_pos, Errc::CorruptCache, "cache positions out of order");
            require(k >= 1 && k <= cache.header.top_k, Errc::CorruptCache,
                    "bad entry count in cache record");
            last_pos = pos;
            SparseDistribution d;
            d.entries.reserve(k);
            double sum = 0;
            for (uint16_t e = 0; e < k; ++e) {
                uint32_t id = r.get<uint32_t>();
                float p = r.get<float>();
                require(id < cache.header.vocab_size, Errc::CorruptCache,
                        "token id out of range in cache");
                require(p > 0 && std::isfinite(p), Errc::CorruptCache,
                        "bad probability in cache");
                d.entries.push_back({int32_t(id), double(p)});
                sum += double(p);
            }
            // quantization drift is re-normalized only when it exceeds the
            // storage precision's plausible range
            if (std::fabs(sum - 1.0) > 1e-5) {
                require(sum > 0, Errc::CorruptCache, "zero-mass cache record");
                for (auto& e : d.entries) e.prob /= sum;
                d.quantize_to_f32();
            }
            cache.add(seq_id, int(pos), d);
        }
    }
    require(r.left == 0, Errc::CorruptCache, "trailing bytes in cache file");
    return cache;
}

}  // namespace ki
