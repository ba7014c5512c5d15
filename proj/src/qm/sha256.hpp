#pragma once

#include <string>
#include <string_view>

namespace qm {

// Hex-encoded SHA-256 of the given bytes.
std::string sha256_hex(std::string_view data);

// First 8 bytes of SHA-256 as a u64 (big-endian). Used to derive seeds and
// deterministic bits from string keys; stable across platforms and runs.
uint64_t sha256_u64(std::string_view data);

}  // namespace qm
