#ifndef KI_HASH_HPP
#define KI_HASH_HPP

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace ki {

using Sha256 = std::array<uint8_t, 32>;

Sha256 sha256(const void* data, size_t len);
Sha256 sha256(const std::string& s);
std::string to_hex(const Sha256& h);
std::string to_hex(const uint8_t* data, size_t len);

}  // namespace ki

#endif
