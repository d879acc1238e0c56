#include "archive.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "huffman.hpp"
#include "quantize.hpp"

namespace bitw {

bool glob_match(std::string_view pattern, std::string_view text) {
    size_t p = 0, t = 0;
    size_t star = std::string_view::npos, mark = 0;
    while (t < text.size()) {
        if (p < pattern.size() && (pattern[p] == '?' || pattern[p] == text[t])) {
            ++p;
            ++t;
        } else if (p < pattern.size() && pattern[p] == '*') {
            star = p++;
            mark = t;
        } else if (star != std::string_view::npos) {
            p = star + 1;
            t = ++mark;
        } else {
            return false;
        }
    }
    while (p < pattern.size() && pattern[p] == '*') {
        ++p;
    }
    return p == pattern.size();
}

namespace {

constexpr char kFloatMagic[4] = {'B', 'I', 'T', 'W'};
constexpr char kQuantMagic[4] = {'B', 'I', 'T', 'Q'};
constexpr uint8_t kFormatVersion = 1;
constexpr uint8_t kDtypeFloat32 = 0;

class Writer {
public:
    void u8(uint8_t v) { bytes_.push_back(v); }
    void u16(uint16_t v) {
        bytes_.push_back(static_cast<uint8_t>(v & 0xff));
        bytes_.push_back(static_cast<uint8_t>(v >> 8));
    }
    void u32(uint32_t v) {
        for (int i = 0; i < 4; ++i) {
            bytes_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
        }
    }
    void u64(uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            bytes_.push_back(static_cast<uint8_t>((v >> (8 * i)) & 0xff));
        }
    }
    void f32(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, 4);
        u32(bits);
    }
    void raw(std::span<const uint8_t> data) { bytes_.insert(bytes_.end(), data.begin(), data.end()); }
    void raw(const char* data, size_t n) {
        bytes_.insert(bytes_.end(), data, data + n);
    }

    std::vector<uint8_t> take() { return std::move(bytes_); }

private:
    std::vector<uint8_t> bytes_;
};

class Reader {
public:
    explicit Reader(std::span<const uint8_t> bytes) : bytes_(bytes) {}

    uint8_t u8() { return take(1)[0]; }
    uint16_t u16() {
        auto b = take(2);
        return static_cast<uint16_t>(b[0] | (b[1] << 8));
    }
    uint32_t u32() {
        auto b = take(4);
        uint32_t v = 0;
        for (int i = 0; i < 4; ++i) {
            v |= static_cast<uint32_t>(b[i]) << (8 * i);
        }
        return v;
    }
    uint64_t u64() {
        auto b = take(8);
        uint64_t v = 0;
        for (int i = 0; i < 8; ++i) {
            v |= static_cast<uint64_t>(b[i]) << (8 * i);
        }
        return v;
    }
    float f32() {
        const uint32_t bits = u32();
        float v;
        std::memcpy(&v, &bits, 4);
        return v;
    }
    std::span<const uint8_t> take(size_t n) {
        // overflow-safe form: pos_ + n could wrap on a hostile length field
        if (n > bytes_.size() - pos_) {
            raise(ErrorCode::truncated, "file truncated");
        }
        auto s = bytes_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    std::string str(size_t n) {
        auto s = take(n);
        return std::string(reinterpret_cast<const char*>(s.data()), s.size());
    }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const uint8_t> bytes_;
    size_t pos_ = 0;
};

void check_name(const std::string& name) {
    if (name.empty() || name.size() > 0xffff) {
        raise(ErrorCode::invalid_argument, "tensor name must be 1..65535 bytes");
    }
}

void check_dims(std::span<const uint32_t> dims) {
    if (dims.empty() || dims.size() > 0xff) {
        raise(ErrorCode::malformed, "tensor rank must be 1..255");
    }
    shape_numel(dims); // validates positivity and overflow
}

uint64_t expected_payload_bytes(const QuantLayer& layer) {
    const uint64_t n = layer.num_weights();
    switch (layer.kind) {
    case LayerKind::ternary_indexed:
        return (n + layer.block_size - 1) / layer.block_size;
    case LayerKind::int4_packed:
        return (n + 1) / 2;
    case LayerKind::int8_raw:
        return n;
    case LayerKind::float32_passthrough:
        return n * 4;
    }
    raise(ErrorCode::bad_kind, "invalid layer kind");
}

void validate_layer(const QuantLayer& layer) {
    check_name(layer.name);
    check_dims(layer.dims);
    if (layer.kind == LayerKind::ternary_indexed &&
        (layer.block_size < 1 || layer.block_size > kMaxBlockSize)) {
        raise(ErrorCode::malformed, "block size must be in [1, 5]");
    }
    if (layer.payload.size() != expected_payload_bytes(layer)) {
        raise(ErrorCode::malformed, "payload length does not match dims for layer '" +
                                        layer.name + "'");
    }
    if (layer.kind == LayerKind::ternary_indexed) {
        // Validates every index, including the short-final-block bound.
        PackedWeights packed;
        packed.indices = layer.payload;
        packed.total_length = layer.num_weights();
        packed.block_size = layer.block_size;
        packed.shape = layer.dims;
        decode(packed);
    }
}

void check_unique_names(const std::vector<std::string>& names) {
    std::unordered_set<std::string_view> seen;
    for (const auto& n : names) {
        if (!seen.insert(n).second) {
            raise(ErrorCode::malformed, "duplicate tensor name '" + n + "'");
        }
    }
}

std::vector<uint8_t> read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        raise(ErrorCode::io, "cannot open '" + path + "'");
    }
    std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                               std::istreambuf_iterator<char>());
    if (!in.good() && !in.eof()) {
        raise(ErrorCode::io, "read failed for '" + path + "'");
    }
    return bytes;
}

void write_file(const std::string& path, std::span<const uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        raise(ErrorCode::io, "cannot create '" + path + "'");
    }
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    if (!out.good()) {
        raise(ErrorCode::io, "write failed for '" + path + "'");
    }
}

} // namespace

const FloatEntry* FloatArchive::find(std::string_view name) const {
    for (const auto& e : tensors) {
        if (e.name == name) {
            return &e;
        }
    }
    return nullptr;
}

const QuantLayer* QuantArchive::find(std::string_view name) const {
    for (const auto& l : layers) {
        if (l.name == name) {
            return &l;
        }
    }
    return nullptr;
}

const char* layer_kind_name(LayerKind kind) {
    switch (kind) {
    case LayerKind::ternary_indexed: return "ternary";
    case LayerKind::int4_packed: return "int4";
    case LayerKind::int8_raw: return "int8";
    case LayerKind::float32_passthrough: return "float32";
    }
    return "?";
}

std::vector<uint8_t> write_float_archive(const FloatArchive& archive) {
    if (archive.tensors.size() > 0xffff) {
        raise(ErrorCode::invalid_argument, "too many tensors for a u16 count");
    }
    std::vector<std::string> names;
    for (const auto& e : archive.tensors) {
        names.push_back(e.name);
    }
    check_unique_names(names);

    Writer w;
    w.raw(kFloatMagic, 4);
    w.u8(kFormatVersion);
    w.u16(static_cast<uint16_t>(archive.tensors.size()));
    for (const auto& e : archive.tensors) {
        check_name(e.name);
        check_dims(e.tensor.shape);
        w.u16(static_cast<uint16_t>(e.name.size()));
        w.raw(e.name.data(), e.name.size());
        w.u8(static_cast<uint8_t>(e.tensor.shape.size()));
        for (uint32_t d : e.tensor.shape) {
            w.u32(d);
        }
        w.u8(kDtypeFloat32);
        for (float v : e.tensor.data) {
            w.f32(v);
        }
    }
    return w.take();
}

FloatArchive read_float_archive(std::span<const uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.take(4);
    if (std::memcmp(magic.data(), kFloatMagic, 4) != 0) {
        raise(ErrorCode::bad_magic, "bad magic: not a float weight archive");
    }
    const uint8_t version = r.u8();
    if (version != kFormatVersion) {
        raise(ErrorCode::bad_version, "unsupported version " + std::to_string(version));
    }
    const uint16_t count = r.u16();

    FloatArchive archive;
    std::vector<std::string> names;
    for (uint16_t i = 0; i < count; ++i) {
        const uint16_t name_len = r.u16();
        std::string name = r.str(name_len);
        check_name(name);
        const uint8_t rank = r.u8();
        if (rank == 0) {
            raise(ErrorCode::malformed, "zero-rank tensor");
        }
        std::vector<uint32_t> dims(rank);
        for (auto& d : dims) {
            d = r.u32();
        }
        check_dims(dims);
        const uint8_t dtype = r.u8();
        if (dtype != kDtypeFloat32) {
            raise(ErrorCode::bad_dtype, "unsupported dtype " + std::to_string(dtype));
        }
        const uint64_t n = shape_numel(dims);
        std::vector<float> data(n);
        for (uint64_t j = 0; j < n; ++j) {
            data[j] = r.f32();
        }
        names.push_back(name);
        archive.tensors.push_back({std::move(name), FloatTensor(std::move(dims), std::move(data))});
    }
    if (!r.done()) {
        raise(ErrorCode::trailing_bytes, "trailing bytes after last tensor");
    }
    check_unique_names(names);
    return archive;
}

std::vector<uint8_t> write_quant_archive(const QuantArchive& archive) {
    if (archive.layers.size() > 0xffff) {
        raise(ErrorCode::invalid_argument, "too many layers for a u16 count");
    }
    std::vector<std::string> names;
    for (const auto& l : archive.layers) {
        names.push_back(l.name);
    }
    check_unique_names(names);

    Writer w;
    w.raw(kQuantMagic, 4);
    w.u8(kFormatVersion);
    w.u16(static_cast<uint16_t>(archive.layers.size()));
    for (const auto& layer : archive.layers) {
        validate_layer(layer);
        w.u16(static_cast<uint16_t>(layer.name.size()));
        w.raw(layer.name.data(), layer.name.size());
        w.u8(static_cast<uint8_t>(layer.kind));
        w.u8(static_cast<uint8_t>(layer.dims.size()));
        for (uint32_t d : layer.dims) {
            w.u32(d);
        }
        if (layer.kind == LayerKind::ternary_indexed) {
            w.u8(layer.block_size);
        }
        if (layer.kind != LayerKind::float32_passthrough) {
            w.f32(layer.beta);
        }
        w.u8(layer.huffman ? 1 : 0);
        if (layer.huffman) {
            const auto coded = serialize_huffman(huffman_encode(layer.payload));
            w.u64(coded.size());
            w.raw(coded);
        } else {
            w.u64(layer.payload.size());
            w.raw(layer.payload);
        }
    }
    return w.take();
}

QuantArchive read_quant_archive(std::span<const uint8_t> bytes) {
    Reader r(bytes);
    const auto magic = r.take(4);
    if (std::memcmp(magic.data(), kQuantMagic, 4) != 0) {
        raise(ErrorCode::bad_magic, "bad magic: not a quantized archive");
    }
    const uint8_t version = r.u8();
    if (version != kFormatVersion) {
        raise(ErrorCode::bad_version, "unsupported version " + std::to_string(version));
    }
    const uint16_t count = r.u16();

    QuantArchive archive;
    std::vector<std::string> names;
    for (uint16_t i = 0; i < count; ++i) {
        QuantLayer layer;
        const uint16_t name_len = r.u16();
        layer.name = r.str(name_len);
        check_name(layer.name);
        const uint8_t kind = r.u8();
        if (kind > 3) {
            raise(ErrorCode::bad_kind, "invalid layer kind " + std::to_string(kind));
        }
        layer.kind = static_cast<LayerKind>(kind);
        const uint8_t rank = r.u8();
        if (rank == 0) {
            raise(ErrorCode::malformed, "zero-rank layer");
        }
        layer.dims.resize(rank);
        for (auto& d : layer.dims) {
            d = r.u32();
        }
        check_dims(layer.dims);
        if (layer.kind == LayerKind::ternary_indexed) {
            layer.block_size = r.u8();
        }
        if (layer.kind != LayerKind::float32_passthrough) {
            layer.beta = r.f32();
        }
        layer.huffman = r.u8() != 0;
        const uint64_t payload_len = r.u64();
        const auto payload = r.take(payload_len);
        if (layer.huffman) {
            const HuffmanCodedPayload coded = parse_huffman(payload);
            if (coded.symbol_count != expected_payload_bytes(layer)) {
                raise(ErrorCode::malformed, "huffman symbol count does not match dims for layer '" +
                                                layer.name + "'");
            }
            layer.payload = huffman_decode(coded);
        } else {
            layer.payload.assign(payload.begin(), payload.end());
        }
        validate_layer(layer);
        names.push_back(layer.name);
        archive.layers.push_back(std::move(layer));
    }
    if (!r.done()) {
        raise(ErrorCode::trailing_bytes, "trailing bytes after last layer");
    }
    check_unique_names(names);
    return archive;
}

void save_float_archive(const FloatArchive& archive, const std::string& path) {
    write_file(path, write_float_archive(archive));
}

FloatArchive load_float_archive(const std::string& path) {
    return read_float_archive(read_file(path));
}

void save_quant_archive(const QuantArchive& archive, const std::string& path) {
    write_file(path, write_quant_archive(archive));
}

QuantArchive load_quant_archive(const std::string& path) {
    return read_quant_archive(read_file(path));
}

std::vector<uint8_t> pack_int4(std::span<const int32_t> values) {
    std::vector<uint8_t> bytes((values.size() + 1) / 2, 0);
    for (size_t i = 0; i < values.size(); ++i) {
        const int32_t v = values[i];
        if (v < -8 || v > 7) {
            raise(ErrorCode::invalid_argument, "int4 value outside [-8, 7]");
        }
        const uint8_t nibble = static_cast<uint8_t>(v & 0x0f);
        if (i % 2 == 0) {
            bytes[i / 2] |= nibble;
        } else {
            bytes[i / 2] |= static_cast<uint8_t>(nibble << 4);
        }
    }
    return bytes;
}

std::vector<int32_t> unpack_int4(std::span<const uint8_t> bytes, uint64_t count) {
    if (bytes.size() != (count + 1) / 2) {
        raise(ErrorCode::malformed, "int4 payload length does not match value count");
    }
    std::vector<int32_t> values(count);
    for (uint64_t i = 0; i < count; ++i) {
        const uint8_t byte = bytes[i / 2];
        const uint8_t nibble = (i % 2 == 0) ? (byte & 0x0f) : (byte >> 4);
        values[i] = nibble >= 8 ? static_cast<int32_t>(nibble) - 16 : nibble;
    }
    return values;
}

QuantLayer quantize_layer(const std::string& name, const FloatTensor& tensor, LayerKind kind,
                          int block_size, bool huffman, float epsilon) {
    QuantLayer layer;
    layer.name = name;
    layer.kind = kind;
    layer.dims = tensor.shape;
    layer.huffman = huffman;

    QuantConfig cfg;
    cfg.epsilon = epsilon;
    switch (kind) {
    case LayerKind::ternary_indexed: {
        cfg.ternary = true;
        const TernaryTensor tern = quantize_ternary(tensor, cfg);
        layer.beta = tern.beta;
        layer.block_size = static_cast<uint8_t>(block_size);
        layer.payload = encode(tern, block_size).indices;
        break;
    }
    case LayerKind::int4_packed: {
        cfg.ternary = false;
        cfg.weight_bits = 4;
        const IntQuantTensor q = quantize_b_bit(tensor, cfg);
        layer.beta = q.beta;
        layer.payload = pack_int4(q.values);
        break;
    }
    case LayerKind::int8_raw: {
        cfg.ternary = false;
        cfg.weight_bits = 8;
        const IntQuantTensor q = quantize_b_bit(tensor, cfg);
        layer.beta = q.beta;
        layer.payload.resize(q.values.size());
        for (size_t i = 0; i < q.values.size(); ++i) {
            layer.payload[i] = static_cast<uint8_t>(static_cast<int8_t>(q.values[i]));
        }
        break;
    }
    case LayerKind::float32_passthrough: {
        layer.payload.resize(tensor.data.size() * 4);
        std::memcpy(layer.payload.data(), tensor.data.data(), layer.payload.size());
        break;
    }
    }
    return layer;
}

QuantArchive quantize_archive(const FloatArchive& archive, const QuantizeOptions& options) {
    LayerKind kind = LayerKind::ternary_indexed;
    switch (options.mode) {
    case WeightMode::ternary: kind = LayerKind::ternary_indexed; break;
    case WeightMode::int4: kind = LayerKind::int4_packed; break;
    case WeightMode::int8: kind = LayerKind::int8_raw; break;
    }

    QuantArchive out;
    for (const auto& entry : archive.tensors) {
        const bool keep_float = !options.keep_float_glob.empty() &&
                                glob_match(options.keep_float_glob, entry.name);
        out.layers.push_back(quantize_layer(
            entry.name, entry.tensor,
            keep_float ? LayerKind::float32_passthrough : kind, options.block_size,
            keep_float ? false : options.huffman, options.epsilon));
    }
    return out;
}

QuantArchive pack_archive(const QuantArchive& archive, int block_size, bool huffman) {
    QuantArchive out;
    for (const auto& layer : archive.layers) {
        if (layer.kind != LayerKind::int8_raw) {
            out.layers.push_back(layer);
            continue;
        }
        bool ternary = true;
        std::vector<int8_t> values(layer.payload.size());
        for (size_t i = 0; i < layer.payload.size(); ++i) {
            values[i] = static_cast<int8_t>(layer.payload[i]);
            if (values[i] < -1 || values[i] > 1) {
                ternary = false;
                break;
            }
        }
        if (!ternary) {
            out.layers.push_back(layer);
            continue;
        }
        QuantLayer packed = layer;
        packed.kind = LayerKind::ternary_indexed;
        packed.block_size = static_cast<uint8_t>(block_size);
        packed.huffman = huffman;
        packed.payload = encode(values, layer.dims, block_size).indices;
        out.layers.push_back(std::move(packed));
    }
    return out;
}

QuantArchive unpack_archive(const QuantArchive& archive) {
    QuantArchive out;
    for (const auto& layer : archive.layers) {
        if (layer.kind == LayerKind::ternary_indexed) {
            PackedWeights packed;
            packed.indices = layer.payload;
            packed.total_length = layer.num_weights();
            packed.block_size = layer.block_size;
            packed.shape = layer.dims;
            const std::vector<int8_t> values = decode(packed);
            QuantLayer raw = layer;
            raw.kind = LayerKind::int8_raw;
            raw.huffman = false;
            raw.payload.resize(values.size());
            for (size_t i = 0; i < values.size(); ++i) {
                raw.payload[i] = static_cast<uint8_t>(values[i]);
            }
            out.layers.push_back(std::move(raw));
        } else if (layer.kind == LayerKind::int4_packed) {
            const std::vector<int32_t> values = unpack_int4(layer.payload, layer.num_weights());
            QuantLayer raw = layer;
            raw.kind = LayerKind::int8_raw;
            raw.huffman = false;
            raw.payload.resize(values.size());
            for (size_t i = 0; i < values.size(); ++i) {
                raw.payload[i] = static_cast<uint8_t>(static_cast<int8_t>(values[i]));
            }
            out.layers.push_back(std::move(raw));
        } else {
            out.layers.push_back(layer);
        }
    }
    return out;
}

FloatTensor dequantize_layer(const QuantLayer& layer) {
    const uint64_t n = layer.num_weights();
    std::vector<float> data(n);
    switch (layer.kind) {
    case LayerKind::ternary_indexed: {
        PackedWeights packed;
        packed.indices = layer.payload;
        packed.total_length = n;
        packed.block_size = layer.block_size;
        packed.shape = layer.dims;
        const std::vector<int8_t> values = decode(packed);
        for (uint64_t i = 0; i < n; ++i) {
            data[i] = static_cast<float>(values[i]) * layer.beta;
        }
        break;
    }
    case LayerKind::int4_packed: {
        const std::vector<int32_t> values = unpack_int4(layer.payload, n);
        for (uint64_t i = 0; i < n; ++i) {
            data[i] = static_cast<float>(values[i]) * layer.beta;
        }
        break;
    }
    case LayerKind::int8_raw: {
        for (uint64_t i = 0; i < n; ++i) {
            data[i] = static_cast<float>(static_cast<int8_t>(layer.payload[i])) * layer.beta;
        }
        break;
    }
    case LayerKind::float32_passthrough: {
        std::memcpy(data.data(), layer.payload.data(), n * 4);
        break;
    }
    }
    return FloatTensor(layer.dims, std::move(data));
}

double reduction_percent(double raw_bytes, double stored_bytes) {
    if (raw_bytes <= 0.0) {
        return 0.0;
    }
    return (raw_bytes - stored_bytes) / raw_bytes * 100.0;
}

SizeReport size_report(const QuantArchive& archive) {
    SizeReport report;
    for (const auto& layer : archive.layers) {
        LayerSize entry;
        entry.name = layer.name;
        entry.kind = layer.kind;
        entry.num_weights = layer.num_weights();
        entry.raw_float_bytes = entry.num_weights * 4;
        if (layer.huffman) {
            entry.payload_bytes = serialize_huffman(huffman_encode(layer.payload)).size();
        } else {
            entry.payload_bytes = layer.payload.size();
        }
        uint64_t metadata = 2 + layer.name.size() + 1 + 1 + 4 * layer.dims.size() + 1 + 8;
        if (layer.kind == LayerKind::ternary_indexed) {
            metadata += 1;
        }
        if (layer.kind != LayerKind::float32_passthrough) {
            metadata += 4;
        }
        entry.stored_bytes = entry.payload_bytes + metadata;
        report.total_raw += entry.raw_float_bytes;
        report.total_stored += entry.stored_bytes;
        report.layers.push_back(std::move(entry));
    }
    report.reduction_percent = reduction_percent(static_cast<double>(report.total_raw),
                                                 static_cast<double>(report.total_stored));
    return report;
}

VerifyResult verify_archive(const QuantArchive& quant, const FloatArchive& source,
                            const VerifyOptions& options) {
    VerifyResult result;
    for (const auto& layer : quant.layers) {
        const FloatEntry* entry = source.find(layer.name);
        if (entry == nullptr) {
            result.ok = false;
            result.first_mismatch = layer.name;
            result.detail = "layer '" + layer.name + "' missing from the float archive";
            return result;
        }
        if (entry->tensor.shape != layer.dims) {
            result.ok = false;
            result.first_mismatch = layer.name;
            result.detail = "layer '" + layer.name + "' has different dims";
            return result;
        }
        const QuantLayer fresh =
            quantize_layer(layer.name, entry->tensor, layer.kind, options.block_size,
                           layer.huffman, options.epsilon);
        if (fresh.payload != layer.payload) {
            result.ok = false;
            result.first_mismatch = layer.name;
            if (fresh.payload.size() != layer.payload.size()) {
                result.detail = "layer '" + layer.name + "': payload length " +
                                std::to_string(layer.payload.size()) + " != re-quantized " +
                                std::to_string(fresh.payload.size()) +
                                " (check --block-size)";
            } else {
                result.detail = "layer '" + layer.name + "': payload bytes differ";
            }
            return result;
        }
        if (layer.kind != LayerKind::float32_passthrough) {
            const float tol = options.beta_tolerance * std::max(std::fabs(fresh.beta), 1e-30f);
            if (std::fabs(fresh.beta - layer.beta) > tol) {
                result.ok = false;
                result.first_mismatch = layer.name;
                result.detail = "layer '" + layer.name + "': scale differs";
                return result;
            }
        }
    }
    return result;
}

} // namespace bitw
