#include <random>

#include "codec.hpp"
#include "doctest.h"

using namespace bitw;

namespace {

PackedWeights encode_values(std::vector<int8_t> values, int block_size = 5) {
    const std::vector<uint32_t> shape = {static_cast<uint32_t>(values.size())};
    return encode(std::span<const int8_t>(values), shape, block_size);
}

} // namespace

TEST_CASE("canonical block indices") {
    CHECK(encode_values({0, 0, 0, 0, 0}).indices == std::vector<uint8_t>{0});
    CHECK(encode_values({1, 1, 1, 1, 1}).indices == std::vector<uint8_t>{121});
    CHECK(encode_values({-1, -1, -1, -1, -1}).indices == std::vector<uint8_t>{242});
    // first element is the least significant digit
    CHECK(encode_values({1, 0, 0, 0, 0}).indices == std::vector<uint8_t>{1});
    CHECK(encode_values({0, 1, 0, 0, 0}).indices == std::vector<uint8_t>{3});
}

TEST_CASE("short final block") {
    const PackedWeights p = encode_values({0, 0, 0, 0, 0, 1, -1});
    CHECK(p.indices == std::vector<uint8_t>{0, 7});
    CHECK(p.total_length == 7);
    CHECK(decode(p) == std::vector<int8_t>{0, 0, 0, 0, 0, 1, -1});
}

TEST_CASE("decode worked examples") {
    PackedWeights p;
    p.block_size = 5;

    p.indices = {121};
    p.total_length = 5;
    CHECK(decode(p) == std::vector<int8_t>{1, 1, 1, 1, 1});

    p.indices = {0};
    p.total_length = 3;
    CHECK(decode(p) == std::vector<int8_t>{0, 0, 0});

    p.indices = {7};
    p.total_length = 2;
    CHECK(decode(p) == std::vector<int8_t>{1, -1});
}

TEST_CASE("round trip is exact for every short vector") {
    // lengths 1..8 here; the acceptance suite extends this to 12
    for (int len = 1; len <= 8; ++len) {
        uint64_t total = 1;
        for (int i = 0; i < len; ++i) {
            total *= 3;
        }
        std::vector<int8_t> values(len);
        for (uint64_t n = 0; n < total; ++n) {
            uint64_t v = n;
            for (int i = 0; i < len; ++i) {
                const uint32_t digit = v % 3;
                values[i] = digit == 2 ? -1 : static_cast<int8_t>(digit);
                v /= 3;
            }
            const PackedWeights packed = encode_values(values);
            CHECK(decode(packed) == values);
        }
    }
}

TEST_CASE("indices never exceed 242 for block size 5") {
    std::mt19937 rng(3);
    for (int iter = 0; iter < 500; ++iter) {
        std::vector<int8_t> values(1 + rng() % 64);
        for (auto& v : values) {
            v = static_cast<int8_t>(static_cast<int>(rng() % 3) - 1);
        }
        const PackedWeights p = encode_values(values);
        CHECK(p.indices.size() == (values.size() + 4) / 5);
        for (uint8_t index : p.indices) {
            CHECK(index <= 242);
        }
    }
}

TEST_CASE("encode rejects bad input") {
    std::vector<int8_t> bad = {0, 2, 0};
    const std::vector<uint32_t> shape = {3};
    CHECK_THROWS_AS(encode(std::span<const int8_t>(bad), shape, 5), Error);
    std::vector<int8_t> ok = {0, 1, 0};
    CHECK_THROWS_AS(encode(std::span<const int8_t>(ok), shape, 6), Error);
    CHECK_THROWS_AS(encode(std::span<const int8_t>(ok), shape, 0), Error);
}

TEST_CASE("decode validates indices and lengths") {
    PackedWeights p;
    p.block_size = 5;
    p.indices = {243};
    p.total_length = 5;
    CHECK_THROWS_AS(decode(p), Error);

    p.indices = {0, 9}; // second block holds one value, so 9 >= 3^1 is out of range
    p.total_length = 6;
    CHECK_THROWS_AS(decode(p), Error);

    p.indices = {0, 0};
    p.total_length = 20; // needs 4 blocks
    CHECK_THROWS_AS(decode(p), Error);
}

TEST_CASE("pattern table is a bijection") {
    const PatternTable& table = pattern_table(5);
    CHECK(table.size() == 243);
    for (uint32_t index = 0; index < table.size(); ++index) {
        CHECK(table.index_of(table.pattern(index)) == index);
    }
    CHECK_THROWS_AS(table.pattern(243), Error);
}

TEST_CASE("histogram counts blocks") {
    PackedWeights p;
    p.block_size = 5;
    p.indices = {0, 0, 121};
    p.total_length = 15;
    const IndexHistogram hist = histogram(p);
    CHECK(hist.counts[0] == 2);
    CHECK(hist.counts[121] == 1);
    CHECK(hist.total == 3);

    IndexHistogram empty(5);
    CHECK(empty.total == 0);
    for (uint64_t c : empty.counts) {
        CHECK(c == 0);
    }

    const PackedWeights zeros = encode_values(std::vector<int8_t>(25, 0));
    const IndexHistogram zh = histogram(zeros);
    CHECK(zh.counts[0] == 5);
    CHECK(zh.total == 5);
}

TEST_CASE("histogram total equals the number of blocks") {
    std::mt19937 rng(5);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<PackedWeights> payloads;
        uint64_t blocks = 0;
        for (int j = 0; j < 4; ++j) {
            std::vector<int8_t> values(1 + rng() % 40);
            for (auto& v : values) {
                v = static_cast<int8_t>(static_cast<int>(rng() % 3) - 1);
            }
            payloads.push_back(encode_values(values));
            blocks += payloads.back().indices.size();
        }
        const IndexHistogram hist = histogram(std::span<const PackedWeights>(payloads));
        CHECK(hist.total == blocks);
        uint64_t sum = 0;
        for (uint64_t c : hist.counts) {
            sum += c;
        }
        CHECK(sum == hist.total);
    }
}

TEST_CASE("packed storage sizes") {
    CHECK(packed_size_bytes(327680, SizeMode::ideal_158) == doctest::Approx(64920.06).epsilon(1e-6));
    CHECK(packed_size_bytes(327680, SizeMode::ideal_158) / 1024.0 ==
          doctest::Approx(63.4).epsilon(1e-3));
    CHECK(packed_size_bytes(327680, SizeMode::raw_int8) == 327680.0);
    CHECK(packed_size_bytes(327680, SizeMode::indexed) == 65536.0);
    CHECK(packed_size_bytes(327680, SizeMode::int4) == 163840.0);

    CHECK(packed_size_bytes(0, SizeMode::ideal_158) == 0.0);
    CHECK(packed_size_bytes(0, SizeMode::indexed) == 0.0);
    CHECK(packed_size_bytes(7, SizeMode::indexed) == 2.0);
    CHECK(packed_size_bytes(7, SizeMode::int4) == 4.0);
}
