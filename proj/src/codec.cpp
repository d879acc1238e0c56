#include "codec.hpp"

#include <algorithm>
#include <cmath>

namespace bitw {

uint32_t pow3(int exponent) {
    uint32_t v = 1;
    for (int i = 0; i < exponent; ++i) {
        v *= 3;
    }
    return v;
}

namespace {

void check_block_size(int block_size) {
    if (block_size < 1 || block_size > kMaxBlockSize) {
        raise(ErrorCode::invalid_argument,
              "block size must be in [1, 5] so indices fit an 8-bit value (3^5 = 243 <= 256)");
    }
}

int8_t digit_to_value(uint32_t digit) {
    // 0 -> 0, 1 -> 1, 2 -> -1
    return digit == 2 ? int8_t{-1} : static_cast<int8_t>(digit);
}

uint32_t value_to_digit(int8_t value) {
    switch (value) {
    case 0: return 0;
    case 1: return 1;
    case -1: return 2;
    default:
        raise(ErrorCode::invalid_argument, "encode input contains a non-ternary value");
    }
}

} // namespace

PatternTable::PatternTable(int block_size) : block_size_(block_size) {
    check_block_size(block_size);
    size_ = pow3(block_size);
    patterns_.resize(static_cast<size_t>(size_) * block_size_);
    for (uint32_t index = 0; index < size_; ++index) {
        uint32_t n = index;
        for (int i = 0; i < block_size_; ++i) {
            patterns_[static_cast<size_t>(index) * block_size_ + i] = digit_to_value(n % 3);
            n /= 3;
        }
    }
}

std::span<const int8_t> PatternTable::pattern(uint32_t index) const {
    if (index >= size_) {
        raise(ErrorCode::bad_index, "invalid index " + std::to_string(index) +
                                        " for block size " + std::to_string(block_size_));
    }
    return {patterns_.data() + static_cast<size_t>(index) * block_size_,
            static_cast<size_t>(block_size_)};
}

uint32_t PatternTable::index_of(std::span<const int8_t> block) const {
    if (block.empty() || block.size() > static_cast<size_t>(block_size_)) {
        raise(ErrorCode::invalid_argument, "block length must be in [1, block_size]");
    }
    uint32_t n = 0;
    for (size_t i = block.size(); i-- > 0;) {
        n = n * 3 + value_to_digit(block[i]);
    }
    return n;
}

const PatternTable& pattern_table(int block_size) {
    check_block_size(block_size);
    static const std::array<PatternTable, kMaxBlockSize> tables = {
        PatternTable(1), PatternTable(2), PatternTable(3), PatternTable(4), PatternTable(5)};
    return tables[block_size - 1];
}

PackedWeights encode(const TernaryTensor& tensor, int block_size) {
    return encode(tensor.values, tensor.shape, block_size);
}

PackedWeights encode(std::span<const int8_t> values, std::span<const uint32_t> shape,
                     int block_size) {
    check_block_size(block_size);
    if (shape_numel(shape) != values.size()) {
        raise(ErrorCode::invalid_argument, "value count does not match shape");
    }

    PackedWeights packed;
    packed.total_length = values.size();
    packed.block_size = static_cast<uint8_t>(block_size);
    packed.shape.assign(shape.begin(), shape.end());
    packed.indices.reserve((values.size() + block_size - 1) / block_size);

    for (size_t base = 0; base < values.size(); base += block_size) {
        const size_t len = std::min(static_cast<size_t>(block_size), values.size() - base);
        uint32_t n = 0;
        for (size_t i = len; i-- > 0;) {
            n = n * 3 + value_to_digit(values[base + i]);
        }
        packed.indices.push_back(static_cast<uint8_t>(n));
    }
    return packed;
}

std::vector<int8_t> decode(const PackedWeights& packed) {
    check_block_size(packed.block_size);
    const size_t expected_blocks =
        static_cast<size_t>((packed.total_length + packed.block_size - 1) / packed.block_size);
    if (packed.indices.size() != expected_blocks) {
        raise(ErrorCode::malformed, "declared total_length inconsistent with index count");
    }
    if (!packed.shape.empty() && shape_numel(packed.shape) != packed.total_length) {
        raise(ErrorCode::malformed, "declared shape inconsistent with total_length");
    }
    const uint32_t table_size = pow3(packed.block_size);

    std::vector<int8_t> values(packed.total_length);
    size_t out = 0;
    for (size_t b = 0; b < packed.indices.size(); ++b) {
        uint32_t n = packed.indices[b];
        if (n >= table_size) {
            raise(ErrorCode::bad_index, "invalid index " + std::to_string(n));
        }
        const size_t len = std::min<size_t>(packed.block_size, packed.total_length - out);
        for (size_t i = 0; i < len; ++i) {
            values[out + i] = digit_to_value(n % 3);
            n /= 3;
        }
        if (n != 0) {
            // A short final block only uses the low digits; anything above
            // them would decode past total_length.
            raise(ErrorCode::bad_index, "invalid index in short final block");
        }
        out += len;
    }
    return values;
}

TernaryTensor decode_to_tensor(const PackedWeights& packed, float beta) {
    std::vector<int8_t> values = decode(packed);
    std::vector<uint32_t> shape = packed.shape;
    if (shape.empty() && packed.total_length > 0) {
        shape = {static_cast<uint32_t>(packed.total_length)};
    }
    return TernaryTensor(std::move(shape), std::move(values), beta);
}

void histogram_add(IndexHistogram& hist, const PackedWeights& packed) {
    if (hist.counts.size() != pow3(packed.block_size)) {
        raise(ErrorCode::invalid_argument, "histogram and payload block sizes differ");
    }
    for (uint8_t index : packed.indices) {
        if (index >= hist.counts.size()) {
            raise(ErrorCode::bad_index, "invalid index " + std::to_string(index));
        }
        hist.counts[index] += 1;
        hist.total += 1;
    }
}

IndexHistogram histogram(const PackedWeights& packed) {
    IndexHistogram hist(packed.block_size);
    histogram_add(hist, packed);
    return hist;
}

IndexHistogram histogram(std::span<const PackedWeights> packed) {
    IndexHistogram hist(packed.empty() ? kDefaultBlockSize : packed.front().block_size);
    for (const PackedWeights& p : packed) {
        histogram_add(hist, p);
    }
    return hist;
}

double packed_size_bytes(uint64_t num_weights, SizeMode mode) {
    switch (mode) {
    case SizeMode::ideal_158:
        return static_cast<double>(num_weights) * std::log2(3.0) / 8.0;
    case SizeMode::raw_int8:
        return static_cast<double>(num_weights);
    case SizeMode::indexed:
        return static_cast<double>((num_weights + 4) / 5);
    case SizeMode::int4:
        return static_cast<double>((num_weights + 1) / 2);
    }
    raise(ErrorCode::invalid_argument, "unknown size mode");
}

} // namespace bitw
