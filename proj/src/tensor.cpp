#include "tensor.hpp"

#include <cmath>
#include <limits>

namespace bitw {

uint64_t shape_numel(std::span<const uint32_t> shape) {
    if (shape.empty()) {
        return 0;
    }
    uint64_t n = 1;
    for (uint32_t d : shape) {
        if (d == 0) {
            raise(ErrorCode::invalid_argument, "tensor dimensions must be positive");
        }
        if (n > std::numeric_limits<uint64_t>::max() / d) {
            raise(ErrorCode::invalid_argument, "tensor dimension product overflows");
        }
        n *= d;
    }
    return n;
}

FloatTensor::FloatTensor(std::vector<uint32_t> shape_in, std::vector<float> data_in)
    : shape(std::move(shape_in)), data(std::move(data_in)) {
    if (shape_numel(shape) != data.size()) {
        raise(ErrorCode::invalid_argument, "tensor data length does not match shape");
    }
    for (float v : data) {
        if (!std::isfinite(v)) {
            raise(ErrorCode::invalid_argument, "tensor contains a non-finite value");
        }
    }
}

TernaryTensor::TernaryTensor(std::vector<uint32_t> shape_in, std::vector<int8_t> values_in,
                             float beta_in)
    : shape(std::move(shape_in)), values(std::move(values_in)), beta(beta_in) {
    if (shape_numel(shape) != values.size()) {
        raise(ErrorCode::invalid_argument, "tensor value count does not match shape");
    }
    for (int8_t v : values) {
        if (v < -1 || v > 1) {
            raise(ErrorCode::invalid_argument, "ternary tensor value outside {-1, 0, 1}");
        }
    }
    if (!std::isfinite(beta) || beta < 0.0f) {
        raise(ErrorCode::invalid_argument, "ternary scale must be finite and non-negative");
    }
}

IntQuantTensor::IntQuantTensor(std::vector<uint32_t> shape_in, std::vector<int32_t> values_in,
                               int bits_in, float beta_in)
    : shape(std::move(shape_in)), values(std::move(values_in)), bits(bits_in), beta(beta_in) {
    if (bits < 2 || bits > 31) {
        raise(ErrorCode::invalid_argument, "integer quantization needs 2 <= bits <= 31");
    }
    if (shape_numel(shape) != values.size()) {
        raise(ErrorCode::invalid_argument, "tensor value count does not match shape");
    }
    const int64_t q = int64_t{1} << (bits - 1);
    for (int32_t v : values) {
        if (v < -q || v > q - 1) {
            raise(ErrorCode::invalid_argument, "quantized value outside the b-bit range");
        }
    }
    if (!std::isfinite(beta) || beta < 0.0f) {
        raise(ErrorCode::invalid_argument, "quantization scale must be finite and non-negative");
    }
}

void QuantConfig::validate() const {
    if (!ternary && weight_bits < 2) {
        raise(ErrorCode::invalid_argument, "b-bit weight quantization needs bits >= 2");
    }
    if (activation_bits < 2) {
        raise(ErrorCode::invalid_argument, "activation precision needs at least 2 bits");
    }
    if (!(epsilon > 0.0f)) {
        raise(ErrorCode::invalid_argument, "epsilon must be positive");
    }
}

} // namespace bitw
