#pragma once
#include <string>

namespace llmpred {

// Hex-encoded SHA-256 of the input bytes.
std::string sha256_hex(const std::string& data);

} // namespace llmpred
