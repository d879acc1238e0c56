#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "tensor.hpp"

namespace bitw {

constexpr int kDefaultBlockSize = 5;
constexpr int kMaxBlockSize = 5; // 3^5 = 243 <= 256, the largest block that fits an 8-bit index

uint32_t pow3(int exponent);

// Bijection between indices [0, 3^block_size) and ternary blocks. The block's
// first element is the least significant base-3 digit (digits: 0 -> 0,
// 1 -> 1, -1 -> 2); this order is part of the on-disk format.
class PatternTable {
public:
    explicit PatternTable(int block_size = kDefaultBlockSize);

    int block_size() const { return block_size_; }
    uint32_t size() const { return size_; }

    // Pattern for an index, length block_size (high digits of short blocks
    // decode as trailing zeros and are simply not emitted by the caller).
    std::span<const int8_t> pattern(uint32_t index) const;

    // Index of a block of length 1..block_size; missing high digits are 0.
    uint32_t index_of(std::span<const int8_t> block) const;

private:
    int block_size_;
    uint32_t size_;
    std::vector<int8_t> patterns_; // size_ * block_size_, row-major
};

// Shared table cache for the common block sizes (1..5).
const PatternTable& pattern_table(int block_size);

// Flattened ternary tensor stored as one unsigned 8-bit index per block.
struct PackedWeights {
    std::vector<uint8_t> indices;
    uint64_t total_length = 0;
    uint8_t block_size = kDefaultBlockSize;
    std::vector<uint32_t> shape;

    uint64_t block_count() const { return indices.size(); }
};

PackedWeights encode(const TernaryTensor& tensor, int block_size = kDefaultBlockSize);
PackedWeights encode(std::span<const int8_t> values, std::span<const uint32_t> shape,
                     int block_size = kDefaultBlockSize);

// Exact inverse of encode; beta is carried separately by the caller.
std::vector<int8_t> decode(const PackedWeights& packed);
TernaryTensor decode_to_tensor(const PackedWeights& packed, float beta);

struct IndexHistogram {
    std::vector<uint64_t> counts; // 3^block_size entries
    uint64_t total = 0;

    explicit IndexHistogram(int block_size = kDefaultBlockSize)
        : counts(pow3(block_size), 0) {}
};

void histogram_add(IndexHistogram& hist, const PackedWeights& packed);
IndexHistogram histogram(const PackedWeights& packed);
IndexHistogram histogram(std::span<const PackedWeights> packed);

enum class SizeMode {
    ideal_158, // num_weights * log2(3) / 8
    raw_int8,  // one byte per weight
    indexed,   // ceil(num_weights / 5), one index byte per 5 weights
    int4,      // ceil(num_weights / 2), two nibbles per byte
};

double packed_size_bytes(uint64_t num_weights, SizeMode mode);

} // namespace bitw
