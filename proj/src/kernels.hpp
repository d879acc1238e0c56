#pragma once

#include "codec.hpp"
#include "quantize.hpp"

namespace bitw {

// weight shape (out_features, in_features); no bias
struct LinearSpec {
    uint32_t in_features = 0;
    uint32_t out_features = 0;
};

// weight shape (c_out, c_in, K); no bias
struct Conv1dSpec {
    uint32_t c_in = 0;
    uint32_t c_out = 0;
    uint32_t kernel_size = 1;
    uint32_t stride = 1;
    uint32_t padding = 0;

    uint32_t output_length(uint32_t input_length) const;
};

// Intermediates of the quantized forward pass, cached for backpropagation.
// The normalization step uses singleton passthrough: a group of size one is
// left unchanged instead of collapsing to zero (inv_std entry 0 marks it).
struct ForwardTrace {
    std::vector<float> normalized;   // h, same layout as the input
    std::vector<float> group_mean;   // per normalization group
    std::vector<float> group_invstd; // per group; 0 for passthrough groups
    std::vector<float> x_quant;      // x~ after clipping
    std::vector<uint8_t> clip_mask;  // 1 where the clip was inactive
    float gamma = 0.0f;
    std::vector<float> y_tilde;      // f(W~, x~), pre-rescale
};

// Channel-wise layer normalization used by the quantized pipeline:
//  - linear inputs [features] or [rows, features]: per row over features
//  - conv inputs [c_in, T]: per time step over channels
// Groups of size one pass through unchanged.
FloatTensor layer_norm_features(const FloatTensor& x, float eps);
FloatTensor layer_norm_channels(const FloatTensor& x, float eps);

// Variants that fill trace.normalized/group_mean/group_invstd for backprop.
FloatTensor layer_norm_features_traced(const FloatTensor& x, float eps, ForwardTrace& trace);
FloatTensor layer_norm_channels_traced(const FloatTensor& x, float eps, ForwardTrace& trace);

// Full pipeline: layer norm -> activation scaling -> f(W~, x~) -> y~*gamma*beta/Q_p.
// x is [in] or [rows, in]; weights w are ternary with shape (out, in).
FloatTensor ternary_linear_forward(const FloatTensor& x, const TernaryTensor& w,
                                   const QuantConfig& cfg, ForwardTrace* trace = nullptr);

// x is [c_in, T]; weights w are ternary with shape (c_out, c_in, K). Padding
// is applied after activation quantization (quantized zero is exactly zero).
FloatTensor ternary_conv1d_forward(const FloatTensor& x, const Conv1dSpec& spec,
                                   const TernaryTensor& w, const QuantConfig& cfg,
                                   ForwardTrace* trace = nullptr);

// Same pipelines driven from packed indices; identical output to decoding
// first and calling the dense path.
FloatTensor packed_linear_forward(const FloatTensor& x, const PackedWeights& packed, float beta,
                                  const QuantConfig& cfg);
FloatTensor packed_conv1d_forward(const FloatTensor& x, const Conv1dSpec& spec,
                                  const PackedWeights& packed, float beta,
                                  const QuantConfig& cfg);

// Generic integer-weight pipeline shared with fake-quant training; covers
// ternary (values in {-1,0,1}) and b-bit (b <= 8) weights.
FloatTensor int_weight_linear_forward(const FloatTensor& x, std::span<const int8_t> weights,
                                      const LinearSpec& spec, float beta, const QuantConfig& cfg,
                                      ForwardTrace* trace);
FloatTensor int_weight_conv1d_forward(const FloatTensor& x, std::span<const int8_t> weights,
                                      const Conv1dSpec& spec, float beta, const QuantConfig& cfg,
                                      ForwardTrace* trace);

// Plain float paths (no normalization or quantization).
FloatTensor float_linear_forward(const FloatTensor& x, std::span<const float> weights,
                                 const LinearSpec& spec);
FloatTensor float_conv1d_forward(const FloatTensor& x, std::span<const float> weights,
                                 const Conv1dSpec& spec);

} // namespace bitw
