#include <random>

#include "doctest.h"
#include "huffman.hpp"
#include "oracles.hpp"

#include "error.hpp"

using namespace bitw;

TEST_CASE("degenerate single-symbol stream") {
    const std::vector<uint8_t> symbols(1000, 0);
    const HuffmanCodedPayload payload = huffman_encode(symbols);
    CHECK(payload.code_lengths[0] == 1);
    for (int s = 1; s < 256; ++s) {
        CHECK(payload.code_lengths[s] == 0);
    }
    CHECK(payload.bitstream.size() <= 126); // 1 bit per symbol plus padding
    CHECK(huffman_decode(payload) == symbols);
}

TEST_CASE("uniform distribution gets no compression") {
    std::vector<uint8_t> symbols;
    for (int rep = 0; rep < 4; ++rep) {
        for (int s = 0; s < 256; ++s) {
            symbols.push_back(static_cast<uint8_t>(s));
        }
    }
    const HuffmanCodedPayload payload = huffman_encode(symbols);
    CHECK(payload.bitstream.size() >= symbols.size()); // mean code length >= 8 bits
    CHECK(huffman_decode(payload) == symbols);
}

TEST_CASE("small round trips") {
    const std::vector<uint8_t> stream = {0, 121, 242, 0};
    CHECK(huffman_decode(huffman_encode(stream)) == stream);

    std::vector<uint8_t> all_indices;
    for (int s = 0; s <= 242; ++s) {
        all_indices.push_back(static_cast<uint8_t>(s));
    }
    CHECK(huffman_decode(huffman_encode(all_indices)) == all_indices);

    CHECK_THROWS_AS(huffman_encode({}), Error);
}

TEST_CASE("random streams round trip and respect the entropy bounds") {
    std::mt19937 rng(31);
    for (int iter = 0; iter < 60; ++iter) {
        // alternate between near-uniform and heavily biased streams
        const size_t n = 200 + rng() % 2000;
        std::vector<uint8_t> symbols(n);
        std::vector<uint64_t> counts(256, 0);
        const bool biased = iter % 2 == 0;
        for (auto& s : symbols) {
            if (biased && rng() % 10 < 7) {
                const uint8_t hot[3] = {0, 121, 242};
                s = hot[rng() % 3];
            } else {
                s = static_cast<uint8_t>(rng() % 243);
            }
            counts[s] += 1;
        }
        const HuffmanCodedPayload payload = huffman_encode(symbols);
        CHECK(huffman_decode(payload) == symbols);

        const double h = oracle::entropy_bits(counts, n);
        const auto bits = static_cast<double>(huffman_bit_length(payload, counts));
        CHECK(bits >= h * static_cast<double>(n) - 1e-6);
        CHECK(bits <= (h + 1.0) * static_cast<double>(n) + 1e-6);
        CHECK(payload.bitstream.size() == (huffman_bit_length(payload, counts) + 7) / 8);
    }
}

TEST_CASE("encoding is deterministic") {
    std::mt19937 rng(37);
    std::vector<uint8_t> symbols(5000);
    for (auto& s : symbols) {
        s = static_cast<uint8_t>(rng() % 243);
    }
    const HuffmanCodedPayload a = huffman_encode(symbols);
    const HuffmanCodedPayload b = huffman_encode(symbols);
    CHECK(a.code_lengths == b.code_lengths);
    CHECK(a.bitstream == b.bitstream);
}

TEST_CASE("malformed payloads are rejected") {
    std::vector<uint8_t> symbols(100);
    std::mt19937 rng(41);
    for (auto& s : symbols) {
        s = static_cast<uint8_t>(rng() % 7);
    }
    HuffmanCodedPayload payload = huffman_encode(symbols);

    HuffmanCodedPayload truncated = payload;
    truncated.bitstream.resize(truncated.bitstream.size() / 4);
    CHECK_THROWS_AS(huffman_decode(truncated), Error);

    HuffmanCodedPayload bad_table = payload;
    bad_table.code_lengths.fill(1); // Kraft sum far above 1
    CHECK_THROWS_AS(huffman_decode(bad_table), Error);

    HuffmanCodedPayload no_table = payload;
    no_table.code_lengths.fill(0);
    CHECK_THROWS_AS(huffman_decode(no_table), Error);

    HuffmanCodedPayload forged_count = payload;
    forged_count.symbol_count = uint64_t{1} << 40; // far beyond the bitstream
    CHECK_THROWS_AS(huffman_decode(forged_count), Error);
}

TEST_CASE("serialized payload parses back") {
    std::vector<uint8_t> symbols(777);
    std::mt19937 rng(43);
    for (auto& s : symbols) {
        s = static_cast<uint8_t>(rng() % 243);
    }
    const HuffmanCodedPayload payload = huffman_encode(symbols);
    const std::vector<uint8_t> bytes = serialize_huffman(payload);
    CHECK(bytes.size() == 256 + 8 + payload.bitstream.size());

    const HuffmanCodedPayload parsed = parse_huffman(bytes);
    CHECK(parsed.code_lengths == payload.code_lengths);
    CHECK(parsed.symbol_count == payload.symbol_count);
    CHECK(parsed.bitstream == payload.bitstream);
    CHECK(huffman_decode(parsed) == symbols);

    CHECK_THROWS_AS(parse_huffman(std::span<const uint8_t>(bytes.data(), 100)), Error);
}
