#include "huffman.hpp"

#include <algorithm>
#include <cstring>
#include <queue>

#include "error.hpp"

namespace bitw {

namespace {

constexpr int kMaxCodeLength = 63;

struct TreeNode {
    uint64_t freq;
    uint32_t order; // symbol value for leaves, 256+ creation order for internal
    int16_t symbol; // -1 for internal
    int32_t left = -1;
    int32_t right = -1;
};

struct NodeOrder {
    const std::vector<TreeNode>* nodes;
    bool operator()(int32_t a, int32_t b) const {
        const TreeNode& na = (*nodes)[a];
        const TreeNode& nb = (*nodes)[b];
        if (na.freq != nb.freq) {
            return na.freq > nb.freq;
        }
        return na.order > nb.order;
    }
};

void assign_depths(const std::vector<TreeNode>& nodes, int32_t root,
                   std::array<uint8_t, 256>& lengths) {
    // Iterative DFS; depth fits in a u8 because the alphabet has 256 symbols.
    std::vector<std::pair<int32_t, int>> stack{{root, 0}};
    while (!stack.empty()) {
        auto [id, depth] = stack.back();
        stack.pop_back();
        const TreeNode& n = nodes[id];
        if (n.symbol >= 0) {
            lengths[static_cast<size_t>(n.symbol)] = static_cast<uint8_t>(depth);
        } else {
            stack.emplace_back(n.left, depth + 1);
            stack.emplace_back(n.right, depth + 1);
        }
    }
}

struct CanonicalCode {
    std::array<uint64_t, 256> codes{};
    // Decode tables indexed by code length.
    std::array<uint64_t, kMaxCodeLength + 1> first_code{};
    std::array<uint32_t, kMaxCodeLength + 1> count{};
    std::array<uint32_t, kMaxCodeLength + 1> first_index{};
    std::vector<uint8_t> sorted_symbols; // ordered by (length, symbol)
    int max_length = 0;
};

CanonicalCode build_canonical(const std::array<uint8_t, 256>& lengths) {
    CanonicalCode cc;
    const uint64_t kraft_limit = uint64_t{1} << kMaxCodeLength;
    uint64_t kraft = 0; // scaled by 2^kMaxCodeLength
    for (int s = 0; s < 256; ++s) {
        const int len = lengths[s];
        if (len == 0) {
            continue;
        }
        if (len > kMaxCodeLength) {
            raise(ErrorCode::huffman_malformed, "code length exceeds supported maximum");
        }
        cc.count[len] += 1;
        cc.max_length = std::max(cc.max_length, len);
        const uint64_t share = uint64_t{1} << (kMaxCodeLength - len);
        if (share > kraft_limit - kraft) {
            raise(ErrorCode::huffman_malformed, "code lengths violate the Kraft inequality");
        }
        kraft += share;
    }
    if (cc.max_length == 0) {
        raise(ErrorCode::huffman_malformed, "code table has no symbols");
    }

    uint64_t code = 0;
    uint32_t index = 0;
    for (int len = 1; len <= cc.max_length; ++len) {
        code = (code + cc.count[len - 1]) << 1;
        cc.first_code[len] = code;
        cc.first_index[len] = index;
        index += cc.count[len];
    }

    // Assign codes in (length, symbol) order.
    std::array<uint64_t, kMaxCodeLength + 1> next = cc.first_code;
    cc.sorted_symbols.resize(index);
    std::array<uint32_t, kMaxCodeLength + 1> fill = cc.first_index;
    for (int s = 0; s < 256; ++s) {
        const int len = lengths[s];
        if (len == 0) {
            continue;
        }
        cc.codes[s] = next[len]++;
        cc.sorted_symbols[fill[len]++] = static_cast<uint8_t>(s);
    }
    return cc;
}

class BitWriter {
public:
    void put(uint64_t code, int length) {
        for (int i = length - 1; i >= 0; --i) {
            buffer_ = (buffer_ << 1) | ((code >> i) & 1);
            if (++filled_ == 8) {
                bytes_.push_back(static_cast<uint8_t>(buffer_));
                buffer_ = 0;
                filled_ = 0;
            }
        }
    }

    std::vector<uint8_t> finish() {
        if (filled_ > 0) {
            bytes_.push_back(static_cast<uint8_t>(buffer_ << (8 - filled_)));
        }
        return std::move(bytes_);
    }

private:
    std::vector<uint8_t> bytes_;
    uint32_t buffer_ = 0;
    int filled_ = 0;
};

class BitReader {
public:
    explicit BitReader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

    int next() {
        if (pos_ >= bytes_.size() * 8) {
            return -1;
        }
        const uint8_t byte = bytes_[pos_ / 8];
        const int bit = (byte >> (7 - pos_ % 8)) & 1;
        ++pos_;
        return bit;
    }

private:
    std::span<const uint8_t> bytes_;
    size_t pos_ = 0;
};

} // namespace

HuffmanCodedPayload huffman_encode(std::span<const uint8_t> symbols) {
    if (symbols.empty()) {
        raise(ErrorCode::invalid_argument, "huffman_encode needs at least one symbol");
    }

    std::array<uint64_t, 256> freq{};
    for (uint8_t s : symbols) {
        freq[s] += 1;
    }

    HuffmanCodedPayload payload;
    payload.symbol_count = symbols.size();

    std::vector<TreeNode> nodes;
    std::priority_queue<int32_t, std::vector<int32_t>, NodeOrder> queue{NodeOrder{&nodes}};
    nodes.reserve(511); // 256 leaves + at most 255 internal nodes
    for (int s = 0; s < 256; ++s) {
        if (freq[s] > 0) {
            nodes.push_back({freq[s], static_cast<uint32_t>(s), static_cast<int16_t>(s)});
            queue.push(static_cast<int32_t>(nodes.size()) - 1);
        }
    }

    if (queue.size() == 1) {
        payload.code_lengths[nodes[0].symbol] = 1;
    } else {
        uint32_t order = 256;
        while (queue.size() > 1) {
            const int32_t a = queue.top();
            queue.pop();
            const int32_t b = queue.top();
            queue.pop();
            nodes.push_back({nodes[a].freq + nodes[b].freq, order++, -1, a, b});
            queue.push(static_cast<int32_t>(nodes.size()) - 1);
        }
        assign_depths(nodes, queue.top(), payload.code_lengths);
    }

    const CanonicalCode cc = build_canonical(payload.code_lengths);
    BitWriter writer;
    for (uint8_t s : symbols) {
        writer.put(cc.codes[s], payload.code_lengths[s]);
    }
    payload.bitstream = writer.finish();
    return payload;
}

std::vector<uint8_t> huffman_decode(const HuffmanCodedPayload& payload) {
    const CanonicalCode cc = build_canonical(payload.code_lengths);
    BitReader reader(payload.bitstream);

    // every symbol consumes at least one bit, so a count beyond the available
    // bits is malformed; checking first keeps a forged count from allocating
    if (payload.symbol_count > payload.bitstream.size() * 8) {
        raise(ErrorCode::huffman_malformed, "symbol count exceeds the bitstream length");
    }
    std::vector<uint8_t> symbols;
    symbols.reserve(payload.symbol_count);
    for (uint64_t i = 0; i < payload.symbol_count; ++i) {
        uint64_t code = 0;
        int len = 0;
        for (;;) {
            const int bit = reader.next();
            if (bit < 0) {
                raise(ErrorCode::huffman_malformed, "bitstream ends mid-symbol");
            }
            code = (code << 1) | static_cast<uint64_t>(bit);
            ++len;
            if (len > cc.max_length) {
                raise(ErrorCode::huffman_malformed, "bit pattern matches no code");
            }
            if (cc.count[len] > 0 && code >= cc.first_code[len] &&
                code < cc.first_code[len] + cc.count[len]) {
                symbols.push_back(
                    cc.sorted_symbols[cc.first_index[len] + (code - cc.first_code[len])]);
                break;
            }
        }
    }
    return symbols;
}

uint64_t huffman_bit_length(const HuffmanCodedPayload& payload,
                            std::span<const uint64_t> symbol_counts) {
    uint64_t bits = 0;
    for (size_t s = 0; s < symbol_counts.size() && s < 256; ++s) {
        bits += symbol_counts[s] * payload.code_lengths[s];
    }
    return bits;
}

std::vector<uint8_t> serialize_huffman(const HuffmanCodedPayload& payload) {
    std::vector<uint8_t> out;
    out.reserve(256 + 8 + payload.bitstream.size());
    out.insert(out.end(), payload.code_lengths.begin(), payload.code_lengths.end());
    for (int i = 0; i < 8; ++i) {
        out.push_back(static_cast<uint8_t>((payload.symbol_count >> (8 * i)) & 0xff));
    }
    out.insert(out.end(), payload.bitstream.begin(), payload.bitstream.end());
    return out;
}

HuffmanCodedPayload parse_huffman(std::span<const uint8_t> bytes) {
    if (bytes.size() < 256 + 8) {
        raise(ErrorCode::truncated, "huffman payload shorter than its header");
    }
    HuffmanCodedPayload payload;
    std::memcpy(payload.code_lengths.data(), bytes.data(), 256);
    payload.symbol_count = 0;
    for (int i = 0; i < 8; ++i) {
        payload.symbol_count |= static_cast<uint64_t>(bytes[256 + i]) << (8 * i);
    }
    payload.bitstream.assign(bytes.begin() + 264, bytes.end());
    return payload;
}

} // namespace bitw
