#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "codec.hpp"
#include "tensor.hpp"

namespace bitw {

// Minimal glob matcher (* and ?) used for layer-name selection.
bool glob_match(std::string_view pattern, std::string_view text);

// ---------------------------------------------------------------------------
// Float interchange archive (.btw): "BITW", version 1, little-endian.
// ---------------------------------------------------------------------------

struct FloatEntry {
    std::string name;
    FloatTensor tensor;
};

struct FloatArchive {
    std::vector<FloatEntry> tensors;

    const FloatEntry* find(std::string_view name) const;
};

std::vector<uint8_t> write_float_archive(const FloatArchive& archive);
FloatArchive read_float_archive(std::span<const uint8_t> bytes);
void save_float_archive(const FloatArchive& archive, const std::string& path);
FloatArchive load_float_archive(const std::string& path);

// ---------------------------------------------------------------------------
// Quantized container (.btq): "BITQ", version 1, little-endian.
// ---------------------------------------------------------------------------

enum class LayerKind : uint8_t {
    ternary_indexed = 0,  // base-3 block indices, one byte per block
    int4_packed = 1,      // two signed nibbles per byte, low nibble first
    int8_raw = 2,         // one signed byte per value
    float32_passthrough = 3,
};

const char* layer_kind_name(LayerKind kind);

// One layer record. `payload` holds the logical bytes for the kind (indices,
// nibbles, int8 values, or raw float32); the Huffman stage, when enabled, is
// applied on write and undone on read.
struct QuantLayer {
    std::string name;
    LayerKind kind = LayerKind::ternary_indexed;
    std::vector<uint32_t> dims;
    uint8_t block_size = kDefaultBlockSize; // ternary kind only
    float beta = 0.0f;                      // kinds 0-2
    bool huffman = false;
    std::vector<uint8_t> payload;

    uint64_t num_weights() const { return shape_numel(dims); }
    bool operator==(const QuantLayer&) const = default;
};

struct QuantArchive {
    std::vector<QuantLayer> layers;

    const QuantLayer* find(std::string_view name) const;
    bool operator==(const QuantArchive&) const = default;
};

std::vector<uint8_t> write_quant_archive(const QuantArchive& archive);
QuantArchive read_quant_archive(std::span<const uint8_t> bytes);
void save_quant_archive(const QuantArchive& archive, const std::string& path);
QuantArchive load_quant_archive(const std::string& path);

// int4 nibble packing helpers (values in [-8, 7], low nibble first).
std::vector<uint8_t> pack_int4(std::span<const int32_t> values);
std::vector<int32_t> unpack_int4(std::span<const uint8_t> bytes, uint64_t count);

// ---------------------------------------------------------------------------
// Quantization of a float archive.
// ---------------------------------------------------------------------------

enum class WeightMode {
    ternary, // 1.58-bit + weight indexing (kind 0)
    int4,    // 4-bit, nibble packed (kind 1)
    int8,    // 8-bit (kind 2)
};

struct QuantizeOptions {
    WeightMode mode = WeightMode::ternary;
    int block_size = kDefaultBlockSize;
    bool huffman = false;
    float epsilon = 1e-5f;
    std::string keep_float_glob; // matching tensors stay float32 (kind 3)
};

QuantArchive quantize_archive(const FloatArchive& archive, const QuantizeOptions& options);

// Builds a single layer from a float tensor (used by quantize_archive and
// by verification).
QuantLayer quantize_layer(const std::string& name, const FloatTensor& tensor, LayerKind kind,
                          int block_size, bool huffman, float epsilon);

// Converts int8_raw layers whose values are all ternary into indexed form.
QuantArchive pack_archive(const QuantArchive& archive, int block_size, bool huffman);
// Converts indexed / nibble-packed layers back to int8_raw.
QuantArchive unpack_archive(const QuantArchive& archive);

// Dequantized float view of a layer (values * beta; passthrough as stored).
FloatTensor dequantize_layer(const QuantLayer& layer);

// ---------------------------------------------------------------------------
// Size accounting.
// ---------------------------------------------------------------------------

struct LayerSize {
    std::string name;
    LayerKind kind = LayerKind::ternary_indexed;
    uint64_t num_weights = 0;
    uint64_t raw_float_bytes = 0; // 4 bytes per weight
    uint64_t payload_bytes = 0;   // serialized payload only
    uint64_t stored_bytes = 0;    // payload + per-layer metadata
};

struct SizeReport {
    std::vector<LayerSize> layers;
    uint64_t total_raw = 0;
    uint64_t total_stored = 0;
    double reduction_percent = 0.0;
};

double reduction_percent(double raw_bytes, double stored_bytes);
SizeReport size_report(const QuantArchive& archive);

// ---------------------------------------------------------------------------
// Verification: re-quantize the float source and compare payload bytes.
// ---------------------------------------------------------------------------

struct VerifyOptions {
    int block_size = kDefaultBlockSize;
    float epsilon = 1e-5f;
    float beta_tolerance = 0.0f; // relative
};

struct VerifyResult {
    bool ok = true;
    std::string first_mismatch; // layer name
    std::string detail;
};

VerifyResult verify_archive(const QuantArchive& quant, const FloatArchive& source,
                            const VerifyOptions& options);

} // namespace bitw
