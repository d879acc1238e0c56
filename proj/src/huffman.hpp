#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

namespace bitw {

// Canonical Huffman code over the byte alphabet. Only the 256 code lengths
// are needed to rebuild the code (codes are assigned in (length, symbol)
// order), which keeps the serialized table at a fixed 256 bytes.
struct HuffmanCodedPayload {
    std::array<uint8_t, 256> code_lengths{}; // 0 = symbol absent
    std::vector<uint8_t> bitstream;          // MSB-first within each byte
    uint64_t symbol_count = 0;
};

// Builds the code from symbol frequencies (ties broken by ascending symbol
// value) and encodes. A single-symbol input gets a degenerate 1-bit code.
// Empty input is an error.
HuffmanCodedPayload huffman_encode(std::span<const uint8_t> symbols);

// Exact inverse: returns the original symbol sequence of length symbol_count.
std::vector<uint8_t> huffman_decode(const HuffmanCodedPayload& payload);

// Exact coded length in bits (excludes byte padding and the table).
uint64_t huffman_bit_length(const HuffmanCodedPayload& payload,
                            std::span<const uint64_t> symbol_counts);

// Serialized form used inside archive payloads:
// 256 length bytes, u64 LE symbol count, bitstream.
std::vector<uint8_t> serialize_huffman(const HuffmanCodedPayload& payload);
HuffmanCodedPayload parse_huffman(std::span<const uint8_t> bytes);

} // namespace bitw
