#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "error.hpp"

namespace bitw {

uint64_t shape_numel(std::span<const uint32_t> shape);

// Dense row-major float32 tensor. Construction validates that every value is
// finite and that the data length matches the shape. A default-constructed
// tensor is empty (numel 0) and is only valid as an error-path input.
struct FloatTensor {
    std::vector<uint32_t> shape;
    std::vector<float> data;

    FloatTensor() = default;
    FloatTensor(std::vector<uint32_t> shape_in, std::vector<float> data_in);

    uint64_t numel() const { return data.size(); }
    bool empty() const { return data.empty(); }
};

// Ternary-quantized weights: values in {-1, 0, 1} plus the per-tensor scale
// beta (mean absolute value of the source weights, 0 for all-zero sources).
struct TernaryTensor {
    std::vector<uint32_t> shape;
    std::vector<int8_t> values;
    float beta = 0.0f;

    TernaryTensor() = default;
    TernaryTensor(std::vector<uint32_t> shape_in, std::vector<int8_t> values_in, float beta_in);

    uint64_t numel() const { return values.size(); }
};

// b-bit integer-quantized weights, values in [-2^(b-1), 2^(b-1)-1].
struct IntQuantTensor {
    std::vector<uint32_t> shape;
    std::vector<int32_t> values;
    int bits = 4;
    float beta = 0.0f;

    IntQuantTensor() = default;
    IntQuantTensor(std::vector<uint32_t> shape_in, std::vector<int32_t> values_in, int bits_in,
                   float beta_in);

    uint64_t numel() const { return values.size(); }
};

// Scaled-and-clipped activations: float values strictly inside (-Q_p, Q_p)
// where Q_p = 2^(p-1), plus the infinity norm gamma of the source tensor.
struct QuantActivation {
    std::vector<uint32_t> shape;
    std::vector<float> values;
    float gamma = 0.0f;
    int p = 8;

    uint64_t numel() const { return values.size(); }
};

enum class Rounding {
    half_away_from_zero,
};

// Quantization settings. weight_bits is ignored in ternary mode.
struct QuantConfig {
    bool ternary = true;
    int weight_bits = 4;
    int activation_bits = 8;
    float epsilon = 1e-5f;
    Rounding rounding = Rounding::half_away_from_zero;

    void validate() const;
    int qp() const { return 1 << (activation_bits - 1); }
};

} // namespace bitw
