// Independent reference implementations used as test oracles. Everything here
// is a direct, naive transliteration of the defining formulas in double
// precision, deliberately sharing no code with the library.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace oracle {

inline double beta(const std::vector<float>& w) {
    double sum = 0.0;
    for (float v : w) {
        sum += std::fabs(static_cast<double>(v));
    }
    return sum / static_cast<double>(w.size());
}

// Round(Clip(w / (beta + eps), -1, 1)), round half away from zero.
inline std::vector<int> ternary(const std::vector<float>& w, double eps) {
    const double b = beta(w);
    std::vector<int> out(w.size());
    for (size_t i = 0; i < w.size(); ++i) {
        double v = static_cast<double>(w[i]) / (b + eps);
        v = std::max(-1.0, std::min(1.0, v));
        out[i] = static_cast<int>(std::round(v));
    }
    return out;
}

// Round(Clip(w / (beta + eps), -q, q-1)), q = 2^(b-1).
inline std::vector<int> b_bit(const std::vector<float>& w, int bits, double eps) {
    const double b = beta(w);
    const double q = std::pow(2.0, bits - 1);
    std::vector<int> out(w.size());
    for (size_t i = 0; i < w.size(); ++i) {
        double v = static_cast<double>(w[i]) / (b + eps);
        v = std::max(-q, std::min(q - 1.0, v));
        out[i] = static_cast<int>(std::round(v));
    }
    return out;
}

struct QuantPipeline {
    int p = 8;
    double eps = 1e-5;

    double qp() const { return std::pow(2.0, p - 1); }

    // Layer norm over groups; a singleton group passes through. Statistics
    // accumulate in double, the normalize step itself runs in float32: with
    // near-constant groups the float cancellation in (x - mean) is part of
    // the arithmetic being checked, so the reference must share it.
    static void normalize(const std::vector<double>& x, std::vector<double>& h,
                          size_t group_count, size_t group_size, size_t group_stride,
                          size_t elem_stride, double eps) {
        h.resize(x.size());
        for (size_t g = 0; g < group_count; ++g) {
            if (group_size == 1) {
                h[g * group_stride] = static_cast<float>(x[g * group_stride]);
                continue;
            }
            double mean = 0.0;
            for (size_t i = 0; i < group_size; ++i) {
                mean += static_cast<float>(x[g * group_stride + i * elem_stride]);
            }
            mean /= static_cast<double>(group_size);
            double var = 0.0;
            for (size_t i = 0; i < group_size; ++i) {
                const double d =
                    static_cast<float>(x[g * group_stride + i * elem_stride]) - mean;
                var += d * d;
            }
            var /= static_cast<double>(group_size);
            const float inv = static_cast<float>(1.0 / std::sqrt(var + eps));
            const float m = static_cast<float>(mean);
            for (size_t i = 0; i < group_size; ++i) {
                const float xi = static_cast<float>(x[g * group_stride + i * elem_stride]);
                h[g * group_stride + i * elem_stride] = (xi - m) * inv;
            }
        }
    }

    // the reference is a plain float32 pipeline, matching the precision of
    // what it checks; only the norm statistics use doubles
    std::vector<float> scale_and_clip(const std::vector<double>& h, float& gamma) const {
        gamma = 0.0f;
        for (double v : h) {
            gamma = std::max(gamma, static_cast<float>(std::fabs(v)));
        }
        const float denom = gamma == 0.0f ? static_cast<float>(eps) : gamma;
        const float lo = static_cast<float>(-qp() + eps);
        const float hi = static_cast<float>(qp() - eps);
        std::vector<float> xq(h.size());
        for (size_t i = 0; i < h.size(); ++i) {
            const float scaled = static_cast<float>(h[i]) * static_cast<float>(qp()) / denom;
            xq[i] = std::max(lo, std::min(hi, scaled));
        }
        return xq;
    }

    // x is [c_in, T] row-major, weights [c_out, c_in, K] as plain ints.
    std::vector<double> conv1d(const std::vector<double>& x, size_t c_in, size_t t_in,
                               const std::vector<int>& w, size_t c_out, size_t k,
                               size_t stride, size_t padding, double beta_scale) const {
        std::vector<double> h;
        normalize(x, h, t_in, c_in, 1, t_in, eps);
        float gamma = 0.0f;
        const std::vector<float> xq = scale_and_clip(h, gamma);

        const size_t t_pad = t_in + 2 * padding;
        std::vector<float> padded(c_in * t_pad, 0.0f);
        for (size_t c = 0; c < c_in; ++c) {
            for (size_t t = 0; t < t_in; ++t) {
                padded[c * t_pad + padding + t] = xq[c * t_in + t];
            }
        }
        const size_t t_out = (t_pad - k) / stride + 1;
        const float rescale = gamma * static_cast<float>(beta_scale) / static_cast<float>(qp());
        std::vector<double> y(c_out * t_out, 0.0);
        for (size_t o = 0; o < c_out; ++o) {
            for (size_t t = 0; t < t_out; ++t) {
                float sum = 0.0f;
                for (size_t c = 0; c < c_in; ++c) {
                    for (size_t j = 0; j < k; ++j) {
                        sum += static_cast<float>(w[(o * c_in + c) * k + j]) *
                               padded[c * t_pad + t * stride + j];
                    }
                }
                y[o * t_out + t] = sum * rescale;
            }
        }
        return y;
    }

    // x is [rows, in] row-major, weights [out, in].
    std::vector<double> linear(const std::vector<double>& x, size_t rows, size_t in,
                               const std::vector<int>& w, size_t out, double beta_scale) const {
        std::vector<double> h;
        normalize(x, h, rows, in, in, 1, eps);
        float gamma = 0.0f;
        const std::vector<float> xq = scale_and_clip(h, gamma);

        const float rescale = gamma * static_cast<float>(beta_scale) / static_cast<float>(qp());
        std::vector<double> y(rows * out, 0.0);
        for (size_t r = 0; r < rows; ++r) {
            for (size_t o = 0; o < out; ++o) {
                float sum = 0.0f;
                for (size_t i = 0; i < in; ++i) {
                    sum += static_cast<float>(w[o * in + i]) * xq[r * in + i];
                }
                y[r * out + o] = sum * rescale;
            }
        }
        return y;
    }
};

// Shannon entropy in bits per symbol of an empirical distribution.
inline double entropy_bits(const std::vector<uint64_t>& counts, uint64_t total) {
    double h = 0.0;
    for (uint64_t c : counts) {
        if (c == 0) {
            continue;
        }
        const double p = static_cast<double>(c) / static_cast<double>(total);
        h -= p * std::log2(p);
    }
    return h;
}

} // namespace oracle
