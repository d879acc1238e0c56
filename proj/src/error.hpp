#pragma once

#include <stdexcept>
#include <string>

namespace bitw {

// Stable failure categories. The C API and CLI map these 1:1 onto
// bitw_status values, so the numbering is part of the library contract.
enum class ErrorCode {
    ok = 0,
    io = 1,
    bad_magic = 2,
    bad_version = 3,
    truncated = 4,
    trailing_bytes = 5,
    bad_kind = 6,
    bad_index = 7,
    bad_dtype = 8,
    malformed = 9,
    invalid_argument = 10,
    huffman_malformed = 11,
    mismatch = 12,
    diverged = 13,
    no_match = 14,
};

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void raise(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

} // namespace bitw
