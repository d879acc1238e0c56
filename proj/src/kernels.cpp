#include "kernels.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

namespace bitw {

uint32_t Conv1dSpec::output_length(uint32_t input_length) const {
    const int64_t padded = static_cast<int64_t>(input_length) + 2 * static_cast<int64_t>(padding);
    if (padded < static_cast<int64_t>(kernel_size)) {
        raise(ErrorCode::invalid_argument, "input shorter than the kernel");
    }
    return static_cast<uint32_t>((padded - kernel_size) / stride + 1);
}

namespace {

// Normalizes `group_count` groups; group g has elements at
// base + g*group_stride + i*elem_stride for i in [0, group_size).
// A group of size one passes through unchanged (invstd cache entry 0).
void normalize_groups(const float* src, float* dst, size_t group_count, size_t group_size,
                      size_t group_stride, size_t elem_stride, float eps, ForwardTrace* trace) {
    if (trace != nullptr) {
        trace->group_mean.resize(group_count);
        trace->group_invstd.resize(group_count);
    }
    for (size_t g = 0; g < group_count; ++g) {
        const float* in = src + g * group_stride;
        float* out = dst + g * group_stride;
        if (group_size == 1) {
            out[0] = in[0];
            if (trace != nullptr) {
                trace->group_mean[g] = 0.0f;
                trace->group_invstd[g] = 0.0f;
            }
            continue;
        }
        double mean = 0.0;
        for (size_t i = 0; i < group_size; ++i) {
            mean += in[i * elem_stride];
        }
        mean /= static_cast<double>(group_size);
        double var = 0.0;
        for (size_t i = 0; i < group_size; ++i) {
            const double d = in[i * elem_stride] - mean;
            var += d * d;
        }
        var /= static_cast<double>(group_size);
        const float inv_std = static_cast<float>(1.0 / std::sqrt(var + static_cast<double>(eps)));
        const float m = static_cast<float>(mean);
        for (size_t i = 0; i < group_size; ++i) {
            out[i * elem_stride] = (in[i * elem_stride] - m) * inv_std;
        }
        if (trace != nullptr) {
            trace->group_mean[g] = m;
            trace->group_invstd[g] = inv_std;
        }
    }
}

// Activation scaling of the normalized tensor; fills gamma/x_quant/clip_mask.
void quantize_activations(const std::vector<float>& normalized, const QuantConfig& cfg,
                          ForwardTrace& trace) {
    float gamma = 0.0f;
    for (float v : normalized) {
        gamma = std::max(gamma, std::fabs(v));
    }
    const float qp = static_cast<float>(cfg.qp());
    const float lo = -qp + cfg.epsilon;
    const float hi = qp - cfg.epsilon;
    const float denom = gamma == 0.0f ? cfg.epsilon : gamma;

    trace.gamma = gamma;
    trace.x_quant.resize(normalized.size());
    trace.clip_mask.resize(normalized.size());
    for (size_t i = 0; i < normalized.size(); ++i) {
        const float scaled = normalized[i] * qp / denom;
        trace.x_quant[i] = std::clamp(scaled, lo, hi);
        trace.clip_mask[i] = (scaled > lo && scaled < hi) ? 1 : 0;
    }
}

// sum += w * x realized as add/sub/skip for ternary weights; other small
// integer weights fall back to the multiply.
inline void accumulate(float& sum, int8_t w, float x) {
    if (w == 1) {
        sum += x;
    } else if (w == -1) {
        sum -= x;
    } else if (w != 0) {
        sum += static_cast<float>(w) * x;
    }
}

void check_linear_shapes(const FloatTensor& x, const LinearSpec& spec, size_t weight_count) {
    if (spec.in_features == 0 || spec.out_features == 0) {
        raise(ErrorCode::invalid_argument, "linear spec dimensions must be positive");
    }
    if (weight_count != static_cast<size_t>(spec.in_features) * spec.out_features) {
        raise(ErrorCode::invalid_argument, "weight count does not match the linear spec");
    }
    if (x.shape.empty() || x.shape.size() > 2 || x.shape.back() != spec.in_features) {
        raise(ErrorCode::invalid_argument, "linear input must be [in] or [rows, in]");
    }
}

void check_conv_shapes(const FloatTensor& x, const Conv1dSpec& spec, size_t weight_count) {
    if (spec.c_in == 0 || spec.c_out == 0 || spec.kernel_size == 0 || spec.stride == 0) {
        raise(ErrorCode::invalid_argument, "conv spec dimensions must be positive");
    }
    if (weight_count !=
        static_cast<size_t>(spec.c_out) * spec.c_in * spec.kernel_size) {
        raise(ErrorCode::invalid_argument, "weight count does not match the conv spec");
    }
    if (x.shape.size() != 2 || x.shape[0] != spec.c_in) {
        raise(ErrorCode::invalid_argument, "conv input must be [c_in, T]");
    }
}

} // namespace

FloatTensor layer_norm_features(const FloatTensor& x, float eps) {
    if (x.empty()) {
        raise(ErrorCode::invalid_argument, "layer norm of an empty tensor");
    }
    const size_t axis = x.shape.back();
    std::vector<float> out(x.data.size());
    normalize_groups(x.data.data(), out.data(), x.data.size() / axis, axis, axis, 1, eps,
                     nullptr);
    return FloatTensor(x.shape, std::move(out));
}

FloatTensor layer_norm_channels(const FloatTensor& x, float eps) {
    if (x.shape.size() != 2) {
        raise(ErrorCode::invalid_argument, "channel layer norm expects [c_in, T]");
    }
    const size_t channels = x.shape[0];
    const size_t steps = x.shape[1];
    std::vector<float> out(x.data.size());
    normalize_groups(x.data.data(), out.data(), steps, channels, 1, steps, eps, nullptr);
    return FloatTensor(x.shape, std::move(out));
}

FloatTensor layer_norm_features_traced(const FloatTensor& x, float eps, ForwardTrace& trace) {
    if (x.empty()) {
        raise(ErrorCode::invalid_argument, "layer norm of an empty tensor");
    }
    const size_t axis = x.shape.back();
    trace.normalized.resize(x.data.size());
    normalize_groups(x.data.data(), trace.normalized.data(), x.data.size() / axis, axis, axis, 1,
                     eps, &trace);
    return FloatTensor(x.shape, trace.normalized);
}

FloatTensor layer_norm_channels_traced(const FloatTensor& x, float eps, ForwardTrace& trace) {
    if (x.shape.size() != 2) {
        raise(ErrorCode::invalid_argument, "channel layer norm expects [c_in, T]");
    }
    trace.normalized.resize(x.data.size());
    normalize_groups(x.data.data(), trace.normalized.data(), x.shape[1], x.shape[0], 1,
                     x.shape[1], eps, &trace);
    return FloatTensor(x.shape, trace.normalized);
}

FloatTensor int_weight_linear_forward(const FloatTensor& x, std::span<const int8_t> weights,
                                      const LinearSpec& spec, float beta, const QuantConfig& cfg,
                                      ForwardTrace* trace) {
    cfg.validate();
    check_linear_shapes(x, spec, weights.size());
    const size_t rows = x.shape.size() == 2 ? x.shape[0] : 1;
    const size_t in = spec.in_features;
    const size_t out = spec.out_features;

    ForwardTrace local;
    ForwardTrace& tr = trace != nullptr ? *trace : local;
    tr.normalized.resize(x.data.size());
    normalize_groups(x.data.data(), tr.normalized.data(), rows, in, in, 1, cfg.epsilon, &tr);
    quantize_activations(tr.normalized, cfg, tr);

    tr.y_tilde.assign(rows * out, 0.0f);
    for (size_t r = 0; r < rows; ++r) {
        const float* xr = tr.x_quant.data() + r * in;
        float* yr = tr.y_tilde.data() + r * out;
        for (size_t o = 0; o < out; ++o) {
            float sum = 0.0f;
            const int8_t* wo = weights.data() + o * in;
            for (size_t i = 0; i < in; ++i) {
                accumulate(sum, wo[i], xr[i]);
            }
            yr[o] = sum;
        }
    }

    const float scale = tr.gamma * beta / static_cast<float>(cfg.qp());
    std::vector<float> y(tr.y_tilde.size());
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = tr.y_tilde[i] * scale;
    }
    std::vector<uint32_t> shape = x.shape.size() == 2
                                      ? std::vector<uint32_t>{x.shape[0], spec.out_features}
                                      : std::vector<uint32_t>{spec.out_features};
    return FloatTensor(std::move(shape), std::move(y));
}

FloatTensor int_weight_conv1d_forward(const FloatTensor& x, std::span<const int8_t> weights,
                                      const Conv1dSpec& spec, float beta, const QuantConfig& cfg,
                                      ForwardTrace* trace) {
    cfg.validate();
    check_conv_shapes(x, spec, weights.size());
    const size_t c_in = spec.c_in;
    const size_t c_out = spec.c_out;
    const size_t k = spec.kernel_size;
    const size_t t_in = x.shape[1];
    const size_t t_out = spec.output_length(static_cast<uint32_t>(t_in));

    ForwardTrace local;
    ForwardTrace& tr = trace != nullptr ? *trace : local;
    tr.normalized.resize(x.data.size());
    normalize_groups(x.data.data(), tr.normalized.data(), t_in, c_in, 1, t_in, cfg.epsilon, &tr);
    quantize_activations(tr.normalized, cfg, tr);

    // Zero padding goes in after quantization so it cannot skew the
    // normalization statistics; quantized zero is exactly zero.
    const size_t t_pad = t_in + 2 * spec.padding;
    std::vector<float> padded(c_in * t_pad, 0.0f);
    for (size_t c = 0; c < c_in; ++c) {
        std::memcpy(padded.data() + c * t_pad + spec.padding, tr.x_quant.data() + c * t_in,
                    t_in * sizeof(float));
    }

    tr.y_tilde.assign(c_out * t_out, 0.0f);
    for (size_t o = 0; o < c_out; ++o) {
        for (size_t t = 0; t < t_out; ++t) {
            float sum = 0.0f;
            const size_t base = t * spec.stride;
            for (size_t c = 0; c < c_in; ++c) {
                const int8_t* wk = weights.data() + (o * c_in + c) * k;
                const float* xk = padded.data() + c * t_pad + base;
                for (size_t j = 0; j < k; ++j) {
                    accumulate(sum, wk[j], xk[j]);
                }
            }
            tr.y_tilde[o * t_out + t] = sum;
        }
    }

    const float scale = tr.gamma * beta / static_cast<float>(cfg.qp());
    std::vector<float> y(tr.y_tilde.size());
    for (size_t i = 0; i < y.size(); ++i) {
        y[i] = tr.y_tilde[i] * scale;
    }
    return FloatTensor({spec.c_out, static_cast<uint32_t>(t_out)}, std::move(y));
}

FloatTensor ternary_linear_forward(const FloatTensor& x, const TernaryTensor& w,
                                   const QuantConfig& cfg, ForwardTrace* trace) {
    if (w.shape.size() != 2) {
        raise(ErrorCode::invalid_argument, "linear weights must have shape (out, in)");
    }
    const LinearSpec spec{w.shape[1], w.shape[0]};
    return int_weight_linear_forward(x, w.values, spec, w.beta, cfg, trace);
}

FloatTensor ternary_conv1d_forward(const FloatTensor& x, const Conv1dSpec& spec,
                                   const TernaryTensor& w, const QuantConfig& cfg,
                                   ForwardTrace* trace) {
    if (w.shape.size() != 3 || w.shape[0] != spec.c_out || w.shape[1] != spec.c_in ||
        w.shape[2] != spec.kernel_size) {
        raise(ErrorCode::invalid_argument, "conv weights must have shape (c_out, c_in, K)");
    }
    return int_weight_conv1d_forward(x, w.values, spec, w.beta, cfg, trace);
}

FloatTensor packed_linear_forward(const FloatTensor& x, const PackedWeights& packed, float beta,
                                  const QuantConfig& cfg) {
    const TernaryTensor w = decode_to_tensor(packed, beta);
    if (w.shape.size() != 2) {
        raise(ErrorCode::invalid_argument, "packed linear weights must have shape (out, in)");
    }
    return ternary_linear_forward(x, w, cfg);
}

FloatTensor packed_conv1d_forward(const FloatTensor& x, const Conv1dSpec& spec,
                                  const PackedWeights& packed, float beta,
                                  const QuantConfig& cfg) {
    const TernaryTensor w = decode_to_tensor(packed, beta);
    return ternary_conv1d_forward(x, spec, w, cfg);
}

FloatTensor float_linear_forward(const FloatTensor& x, std::span<const float> weights,
                                 const LinearSpec& spec) {
    check_linear_shapes(x, spec, weights.size());
    const size_t rows = x.shape.size() == 2 ? x.shape[0] : 1;
    const size_t in = spec.in_features;
    const size_t out = spec.out_features;

    std::vector<float> y(rows * out, 0.0f);
    for (size_t r = 0; r < rows; ++r) {
        const float* xr = x.data.data() + r * in;
        for (size_t o = 0; o < out; ++o) {
            float sum = 0.0f;
            const float* wo = weights.data() + o * in;
            for (size_t i = 0; i < in; ++i) {
                sum += wo[i] * xr[i];
            }
            y[r * out + o] = sum;
        }
    }
    std::vector<uint32_t> shape = x.shape.size() == 2
                                      ? std::vector<uint32_t>{x.shape[0], spec.out_features}
                                      : std::vector<uint32_t>{spec.out_features};
    return FloatTensor(std::move(shape), std::move(y));
}

FloatTensor float_conv1d_forward(const FloatTensor& x, std::span<const float> weights,
                                 const Conv1dSpec& spec) {
    check_conv_shapes(x, spec, weights.size());
    const size_t c_in = spec.c_in;
    const size_t c_out = spec.c_out;
    const size_t k = spec.kernel_size;
    const size_t t_in = x.shape[1];
    const size_t t_out = spec.output_length(static_cast<uint32_t>(t_in));

    const size_t t_pad = t_in + 2 * spec.padding;
    std::vector<float> padded(c_in * t_pad, 0.0f);
    for (size_t c = 0; c < c_in; ++c) {
        std::memcpy(padded.data() + c * t_pad + spec.padding, x.data.data() + c * t_in,
                    t_in * sizeof(float));
    }

    std::vector<float> y(c_out * t_out, 0.0f);
    for (size_t o = 0; o < c_out; ++o) {
        for (size_t t = 0; t < t_out; ++t) {
            float sum = 0.0f;
            const size_t base = t * spec.stride;
            for (size_t c = 0; c < c_in; ++c) {
                const float* wk = weights.data() + (o * c_in + c) * k;
                const float* xk = padded.data() + c * t_pad + base;
                for (size_t j = 0; j < k; ++j) {
                    sum += wk[j] * xk[j];
                }
            }
            y[o * t_out + t] = sum;
        }
    }
    return FloatTensor({spec.c_out, static_cast<uint32_t>(t_out)}, std::move(y));
}

} // namespace bitw
