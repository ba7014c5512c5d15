#include "qm/sha256.hpp"

#include <openssl/evp.h>

#include <array>
#include <stdexcept>

namespace qm {

static std::array<unsigned char, 32> sha256_bytes(std::string_view data) {
    std::array<unsigned char, 32> out{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), out.data(), &len, EVP_sha256(), nullptr) != 1 ||
        len != out.size()) {
        throw std::runtime_error("sha256: digest failed");
    }
    return out;
}

std::string sha256_hex(std::string_view data) {
    static const char* hex = "0123456789abcdef";
    auto bytes = sha256_bytes(data);
    std::string s;
    s.reserve(64);
    for (unsigned char b : bytes) {
        s.push_back(hex[b >> 4]);
        s.push_back(hex[b & 0xf]);
    }
    return s;
}

uint64_t sha256_u64(std::string_view data) {
    auto bytes = sha256_bytes(data);
    uint64_t v = 0;
    for (int i = 0; i < 8; ++i) {
        v = (v << 8) | bytes[static_cast<size_t>(i)];
    }
    return v;
}

}  // namespace qm
