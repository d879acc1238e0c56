#pragma once

#include <cmath>

#include "tensor.hpp"

namespace bitw {

// Round half away from zero. The symmetric tie rule keeps
// quantize(-w) == -quantize(w) exact.
inline double round_half_away(double v) {
    return std::round(v);
}

// Per-tensor weight scale: mean absolute value over all elements. The dense
// and convolutional forms are the same reduction, so one function serves both.
float compute_beta(const FloatTensor& weights);

// W~ = Round(Clip(W / (beta + eps), -1, 1)); beta = compute_beta(W).
TernaryTensor quantize_ternary(const FloatTensor& weights, const QuantConfig& cfg);

// W~ = Round(Clip(W / (beta + eps), -q, q-1)) with q = 2^(b-1), b >= 2.
IntQuantTensor quantize_b_bit(const FloatTensor& weights, const QuantConfig& cfg);

// Layer normalization over the last axis, no learnable affine parameters.
FloatTensor layer_norm(const FloatTensor& x, float eps = 1e-5f);

// x~ = Clip(x * Q_p / gamma, -Q_p + eps, Q_p - eps), gamma = ||x||_inf.
// Values are clipped but not rounded. gamma == 0 falls back to an
// eps-guarded division so all-zero inputs stay all-zero instead of NaN.
QuantActivation quantize_activation(const FloatTensor& x, const QuantConfig& cfg);

// y = y~ * gamma * beta / Q_p with Q_p = 2^(p-1).
FloatTensor rescale_output(const FloatTensor& y_tilde, float gamma, float beta, int p);

} // namespace bitw
