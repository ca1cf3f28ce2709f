#include "ki/hash.hpp"

#include <openssl/evp.h>

#include <stdexcept>

namespace ki {

Sha256 sha256(const void* data, size_t len) {
    Sha256 out{};
    unsigned int out_len = 0;
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    if (!ctx || EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr) != 1 ||
        EVP_DigestUpdate(ctx, data, len) != 1 || EVP_DigestFinal_ex(ctx, out.data(), &out_len) != 1) {
        EVP_MD_CTX_free(ctx);
        throw std::runtime_error("sha256 failed");
    }
    EVP_MD_CTX_free(ctx);
    return out;
}

Sha256 sha256(const std::string& s) { return sha256(s.data(), s.size()); }

std::string to_hex(const uint8_t* data, size_t len) {
    static const char digits[] = "0123456789abcdef";
    std::string s(len * 2, '0');
    for (size_t i = 0; i < len; ++i) {
        s[2 * i] = digits[data[i] >> 4];
        s[2 * i + 1] = digits[data[i] & 0xf];
    }
    return s;
}

std::string to_hex(const Sha256& h) { return to_hex(h.data(), h.size()); }

}  // namespace ki
