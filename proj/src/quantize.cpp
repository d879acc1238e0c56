#include "quantize.hpp"

#include <algorithm>
#include <cmath>

namespace bitw {

float compute_beta(const FloatTensor& weights) {
    if (weights.empty()) {
        raise(ErrorCode::invalid_argument, "empty weight tensor");
    }
    double sum = 0.0;
    for (float w : weights.data) {
        sum += std::fabs(static_cast<double>(w));
    }
    return static_cast<float>(sum / static_cast<double>(weights.numel()));
}

TernaryTensor quantize_ternary(const FloatTensor& weights, const QuantConfig& cfg) {
    cfg.validate();
    const float beta = compute_beta(weights);
    const double denom = static_cast<double>(beta) + static_cast<double>(cfg.epsilon);

    std::vector<int8_t> values(weights.data.size());
    for (size_t i = 0; i < weights.data.size(); ++i) {
        double scaled = static_cast<double>(weights.data[i]) / denom;
        scaled = std::clamp(scaled, -1.0, 1.0);
        values[i] = static_cast<int8_t>(round_half_away(scaled));
    }
    return TernaryTensor(weights.shape, std::move(values), beta);
}

IntQuantTensor quantize_b_bit(const FloatTensor& weights, const QuantConfig& cfg) {
    cfg.validate();
    if (cfg.ternary || cfg.weight_bits < 2) {
        raise(ErrorCode::invalid_argument,
              "quantize_b_bit needs an integer precision >= 2; use quantize_ternary for 1.58-bit");
    }
    const float beta = compute_beta(weights);
    const double denom = static_cast<double>(beta) + static_cast<double>(cfg.epsilon);
    const double q = static_cast<double>(int64_t{1} << (cfg.weight_bits - 1));

    std::vector<int32_t> values(weights.data.size());
    for (size_t i = 0; i < weights.data.size(); ++i) {
        double scaled = static_cast<double>(weights.data[i]) / denom;
        scaled = std::clamp(scaled, -q, q - 1.0);
        values[i] = static_cast<int32_t>(round_half_away(scaled));
    }
    return IntQuantTensor(weights.shape, std::move(values), cfg.weight_bits, beta);
}

FloatTensor layer_norm(const FloatTensor& x, float eps) {
    if (x.empty()) {
        raise(ErrorCode::invalid_argument, "layer_norm of an empty tensor");
    }
    const size_t axis = x.shape.back();
    const size_t groups = x.data.size() / axis;

    std::vector<float> out(x.data.size());
    for (size_t g = 0; g < groups; ++g) {
        const float* src = x.data.data() + g * axis;
        double mean = 0.0;
        for (size_t i = 0; i < axis; ++i) {
            mean += src[i];
        }
        mean /= static_cast<double>(axis);
        double var = 0.0;
        for (size_t i = 0; i < axis; ++i) {
            const double d = src[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(axis);
        const double inv_std = 1.0 / std::sqrt(var + static_cast<double>(eps));
        float* dst = out.data() + g * axis;
        for (size_t i = 0; i < axis; ++i) {
            dst[i] = static_cast<float>((src[i] - mean) * inv_std);
        }
    }
    return FloatTensor(x.shape, std::move(out));
}

QuantActivation quantize_activation(const FloatTensor& x, const QuantConfig& cfg) {
    cfg.validate();
    if (x.empty()) {
        raise(ErrorCode::invalid_argument, "quantize_activation of an empty tensor");
    }
    float gamma = 0.0f;
    for (float v : x.data) {
        gamma = std::max(gamma, std::fabs(v));
    }
    const float qp = static_cast<float>(cfg.qp());
    const float lo = -qp + cfg.epsilon;
    const float hi = qp - cfg.epsilon;
    const float denom = gamma == 0.0f ? cfg.epsilon : gamma;

    QuantActivation act;
    act.shape = x.shape;
    act.gamma = gamma;
    act.p = cfg.activation_bits;
    act.values.resize(x.data.size());
    for (size_t i = 0; i < x.data.size(); ++i) {
        act.values[i] = std::clamp(x.data[i] * qp / denom, lo, hi);
    }
    return act;
}

FloatTensor rescale_output(const FloatTensor& y_tilde, float gamma, float beta, int p) {
    if (p < 2) {
        raise(ErrorCode::invalid_argument, "activation precision needs at least 2 bits");
    }
    const float scale = gamma * beta / static_cast<float>(1 << (p - 1));
    std::vector<float> out(y_tilde.data.size());
    for (size_t i = 0; i < y_tilde.data.size(); ++i) {
        out[i] = y_tilde.data[i] * scale;
    }
    return FloatTensor(y_tilde.shape, std::move(out));
}

} // namespace bitw
