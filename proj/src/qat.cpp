#include "qat.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <numeric>

namespace bitw {

namespace {

// dL/dx for h = (x - mean) * invstd per group; passthrough groups
// (invstd == 0) copy the gradient through.
void layer_norm_backward_groups(const float* g, const float* h, const float* invstd,
                                float* out, size_t group_count, size_t group_size,
                                size_t group_stride, size_t elem_stride) {
    for (size_t gi = 0; gi < group_count; ++gi) {
        const float* gg = g + gi * group_stride;
        const float* hh = h + gi * group_stride;
        float* oo = out + gi * group_stride;
        const float r = invstd[gi];
        if (r == 0.0f) {
            for (size_t i = 0; i < group_size; ++i) {
                oo[i * elem_stride] = gg[i * elem_stride];
            }
            continue;
        }
        double g_mean = 0.0;
        double gh_mean = 0.0;
        for (size_t i = 0; i < group_size; ++i) {
            g_mean += gg[i * elem_stride];
            gh_mean += static_cast<double>(gg[i * elem_stride]) * hh[i * elem_stride];
        }
        g_mean /= static_cast<double>(group_size);
        gh_mean /= static_cast<double>(group_size);
        for (size_t i = 0; i < group_size; ++i) {
            oo[i * elem_stride] = r * static_cast<float>(gg[i * elem_stride] - g_mean -
                                                         hh[i * elem_stride] * gh_mean);
        }
    }
}

void quantize_weights(const FloatTensor& w, const QuantConfig& cfg, QuantMode mode,
                      std::vector<int8_t>& values, float& beta) {
    if (mode == QuantMode::ternary) {
        QuantConfig c = cfg;
        c.ternary = true;
        const TernaryTensor t = quantize_ternary(w, c);
        values = t.values;
        beta = t.beta;
    } else {
        QuantConfig c = cfg;
        c.ternary = false;
        if (c.weight_bits > 8) {
            raise(ErrorCode::invalid_argument, "fake-quant integer mode supports at most 8 bits");
        }
        const IntQuantTensor q = quantize_b_bit(w, c);
        values.resize(q.values.size());
        for (size_t i = 0; i < q.values.size(); ++i) {
            values[i] = static_cast<int8_t>(q.values[i]);
        }
        beta = q.beta;
    }
}

} // namespace

FloatTensor ste_weight_backward(const FloatTensor& upstream) {
    return upstream;
}

// ---------------------------------------------------------------------------
// FakeQuantLinear
// ---------------------------------------------------------------------------

FakeQuantLinear::FakeQuantLinear(const LinearSpec& spec, QuantMode mode, const QuantConfig& cfg)
    : FakeQuantLayer(mode, cfg), spec_(spec) {
    if (spec.in_features == 0 || spec.out_features == 0) {
        raise(ErrorCode::invalid_argument, "linear spec dimensions must be positive");
    }
    weight_.assign(static_cast<size_t>(spec.out_features) * spec.in_features, 0.0f);
    grad_.assign(weight_.size(), 0.0f);
}

void FakeQuantLinear::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), 0.0f);
}

std::unique_ptr<FakeQuantLayer> FakeQuantLinear::clone() const {
    return std::make_unique<FakeQuantLinear>(*this);
}

FloatTensor FakeQuantLinear::forward(const FloatTensor& x) {
    input_ = x;
    trace_ = ForwardTrace{};
    switch (mode_) {
    case QuantMode::float_passthrough: {
        has_cache_ = true;
        return float_linear_forward(x, weight_, spec_);
    }
    case QuantMode::surrogate: {
        const FloatTensor h = layer_norm_features_traced(x, cfg_.epsilon, trace_);
        has_cache_ = true;
        return float_linear_forward(h, weight_, spec_);
    }
    case QuantMode::ternary:
    case QuantMode::int_b: {
        quantize_weights(FloatTensor({spec_.out_features, spec_.in_features}, weight_), cfg_,
                         mode_, w_quant_, beta_);
        FloatTensor y = int_weight_linear_forward(x, w_quant_, spec_, beta_, cfg_, &trace_);
        has_cache_ = true;
        return y;
    }
    }
    raise(ErrorCode::invalid_argument, "unknown layer mode");
}

FloatTensor FakeQuantLinear::backward(const FloatTensor& upstream) {
    if (!has_cache_) {
        raise(ErrorCode::invalid_argument, "backward called before forward");
    }
    const size_t rows = input_.shape.size() == 2 ? input_.shape[0] : 1;
    const size_t in = spec_.in_features;
    const size_t out = spec_.out_features;
    if (upstream.numel() != rows * out) {
        raise(ErrorCode::invalid_argument, "upstream gradient shape mismatch");
    }

    if (mode_ == QuantMode::float_passthrough || mode_ == QuantMode::surrogate) {
        const std::vector<float>& acts =
            mode_ == QuantMode::float_passthrough ? input_.data : trace_.normalized;
        std::vector<float> w_grad(weight_.size(), 0.0f);
        std::vector<float> g_acts(acts.size(), 0.0f);
        for (size_t r = 0; r < rows; ++r) {
            const float* g = upstream.data.data() + r * out;
            const float* a = acts.data() + r * in;
            float* ga = g_acts.data() + r * in;
            for (size_t o = 0; o < out; ++o) {
                const float go = g[o];
                const float* wo = weight_.data() + o * in;
                float* wg = w_grad.data() + o * in;
                for (size_t i = 0; i < in; ++i) {
                    wg[i] += go * a[i];
                    ga[i] += go * wo[i];
                }
            }
        }
        for (size_t i = 0; i < weight_.size(); ++i) {
            grad_[i] += w_grad[i];
        }
        if (mode_ == QuantMode::float_passthrough) {
            return FloatTensor(input_.shape, std::move(g_acts));
        }
        std::vector<float> g_x(g_acts.size());
        layer_norm_backward_groups(g_acts.data(), trace_.normalized.data(),
                                   trace_.group_invstd.data(), g_x.data(), rows, in, in, 1);
        return FloatTensor(input_.shape, std::move(g_x));
    }

    // Quantized modes. Scales are constants of the forward pass; the weight
    // quantize-dequantize node backpropagates through the straight-through
    // estimator (identity).
    const float qp = static_cast<float>(cfg_.qp());
    const float alpha = trace_.gamma * beta_ / qp;
    const float galpha = trace_.gamma / qp;
    const float denom = trace_.gamma == 0.0f ? cfg_.epsilon : trace_.gamma;

    std::vector<float> w_eff_grad(weight_.size(), 0.0f);
    std::vector<float> g_xq(trace_.x_quant.size(), 0.0f);
    for (size_t r = 0; r < rows; ++r) {
        const float* g = upstream.data.data() + r * out;
        const float* xq = trace_.x_quant.data() + r * in;
        float* gxq = g_xq.data() + r * in;
        for (size_t o = 0; o < out; ++o) {
            const float go = g[o];
            const int8_t* wo = w_quant_.data() + o * in;
            float* wg = w_eff_grad.data() + o * in;
            for (size_t i = 0; i < in; ++i) {
                wg[i] += galpha * go * xq[i];
                gxq[i] += alpha * go * static_cast<float>(wo[i]);
            }
        }
    }
    const FloatTensor w_grad = ste_weight_backward(
        FloatTensor({spec_.out_features, spec_.in_features}, std::move(w_eff_grad)));
    for (size_t i = 0; i < weight_.size(); ++i) {
        grad_[i] += w_grad.data[i];
    }

    std::vector<float> g_h(g_xq.size());
    const float act_scale = qp / denom;
    for (size_t i = 0; i < g_h.size(); ++i) {
        g_h[i] = trace_.clip_mask[i] ? g_xq[i] * act_scale : 0.0f;
    }
    std::vector<float> g_x(g_h.size());
    layer_norm_backward_groups(g_h.data(), trace_.normalized.data(),
                               trace_.group_invstd.data(), g_x.data(), rows, in, in, 1);
    return FloatTensor(input_.shape, std::move(g_x));
}

// ---------------------------------------------------------------------------
// FakeQuantConv1d
// ---------------------------------------------------------------------------

FakeQuantConv1d::FakeQuantConv1d(const Conv1dSpec& spec, QuantMode mode, const QuantConfig& cfg)
    : FakeQuantLayer(mode, cfg), spec_(spec) {
    if (spec.c_in == 0 || spec.c_out == 0 || spec.kernel_size == 0 || spec.stride == 0) {
        raise(ErrorCode::invalid_argument, "conv spec dimensions must be positive");
    }
    weight_.assign(static_cast<size_t>(spec.c_out) * spec.c_in * spec.kernel_size, 0.0f);
    grad_.assign(weight_.size(), 0.0f);
}

void FakeQuantConv1d::zero_grad() {
    std::fill(grad_.begin(), grad_.end(), 0.0f);
}

std::unique_ptr<FakeQuantLayer> FakeQuantConv1d::clone() const {
    return std::make_unique<FakeQuantConv1d>(*this);
}

FloatTensor FakeQuantConv1d::forward(const FloatTensor& x) {
    input_ = x;
    trace_ = ForwardTrace{};
    switch (mode_) {
    case QuantMode::float_passthrough: {
        has_cache_ = true;
        return float_conv1d_forward(x, weight_, spec_);
    }
    case QuantMode::surrogate: {
        const FloatTensor h = layer_norm_channels_traced(x, cfg_.epsilon, trace_);
        has_cache_ = true;
        return float_conv1d_forward(h, weight_, spec_);
    }
    case QuantMode::ternary:
    case QuantMode::int_b: {
        quantize_weights(
            FloatTensor({spec_.c_out, spec_.c_in, spec_.kernel_size}, weight_), cfg_, mode_,
            w_quant_, beta_);
        FloatTensor y = int_weight_conv1d_forward(x, w_quant_, spec_, beta_, cfg_, &trace_);
        has_cache_ = true;
        return y;
    }
    }
    raise(ErrorCode::invalid_argument, "unknown layer mode");
}

FloatTensor FakeQuantConv1d::backward(const FloatTensor& upstream) {
    if (!has_cache_) {
        raise(ErrorCode::invalid_argument, "backward called before forward");
    }
    const size_t c_in = spec_.c_in;
    const size_t c_out = spec_.c_out;
    const size_t k = spec_.kernel_size;
    const size_t t_in = input_.shape[1];
    const size_t t_out = spec_.output_length(static_cast<uint32_t>(t_in));
    const size_t t_pad = t_in + 2 * spec_.padding;
    if (upstream.numel() != c_out * t_out) {
        raise(ErrorCode::invalid_argument, "upstream gradient shape mismatch");
    }

    const bool plain = mode_ == QuantMode::float_passthrough || mode_ == QuantMode::surrogate;

    // Activations seen by the convolution, padded.
    const std::vector<float>& acts = plain ? (mode_ == QuantMode::float_passthrough
                                                  ? input_.data
                                                  : trace_.normalized)
                                           : trace_.x_quant;
    std::vector<float> padded(c_in * t_pad, 0.0f);
    for (size_t c = 0; c < c_in; ++c) {
        std::memcpy(padded.data() + c * t_pad + spec_.padding, acts.data() + c * t_in,
                    t_in * sizeof(float));
    }

    const float qp = static_cast<float>(cfg_.qp());
    const float alpha = plain ? 1.0f : trace_.gamma * beta_ / qp;
    const float galpha = plain ? 1.0f : trace_.gamma / qp;

    std::vector<float> w_eff_grad(weight_.size(), 0.0f);
    std::vector<float> g_padded(padded.size(), 0.0f);
    for (size_t o = 0; o < c_out; ++o) {
        for (size_t t = 0; t < t_out; ++t) {
            const float go = upstream.data[o * t_out + t];
            const size_t base = t * spec_.stride;
            for (size_t c = 0; c < c_in; ++c) {
                const size_t w_base = (o * c_in + c) * k;
                const float* xk = padded.data() + c * t_pad + base;
                float* gx = g_padded.data() + c * t_pad + base;
                for (size_t j = 0; j < k; ++j) {
                    w_eff_grad[w_base + j] += galpha * go * xk[j];
                    const float w = plain ? weight_[w_base + j]
                                          : static_cast<float>(w_quant_[w_base + j]);
                    gx[j] += alpha * go * w;
                }
            }
        }
    }

    if (plain) {
        for (size_t i = 0; i < weight_.size(); ++i) {
            grad_[i] += w_eff_grad[i];
        }
    } else {
        const FloatTensor w_grad = ste_weight_backward(
            FloatTensor({spec_.c_out, spec_.c_in, spec_.kernel_size}, std::move(w_eff_grad)));
        for (size_t i = 0; i < weight_.size(); ++i) {
            grad_[i] += w_grad.data[i];
        }
    }

    // Strip the padding.
    std::vector<float> g_acts(c_in * t_in);
    for (size_t c = 0; c < c_in; ++c) {
        std::memcpy(g_acts.data() + c * t_in, g_padded.data() + c * t_pad + spec_.padding,
                    t_in * sizeof(float));
    }

    if (mode_ == QuantMode::float_passthrough) {
        return FloatTensor(input_.shape, std::move(g_acts));
    }

    if (!plain) {
        const float denom = trace_.gamma == 0.0f ? cfg_.epsilon : trace_.gamma;
        const float act_scale = qp / denom;
        for (size_t i = 0; i < g_acts.size(); ++i) {
            g_acts[i] = trace_.clip_mask[i] ? g_acts[i] * act_scale : 0.0f;
        }
    }

    std::vector<float> g_x(g_acts.size());
    layer_norm_backward_groups(g_acts.data(), trace_.normalized.data(),
                               trace_.group_invstd.data(), g_x.data(), t_in, c_in, 1, t_in);
    return FloatTensor(input_.shape, std::move(g_x));
}

// ---------------------------------------------------------------------------
// Model, loss, training
// ---------------------------------------------------------------------------

void init_weights(FakeQuantLayer& layer, uint32_t fan_in, Rng& rng) {
    const float k = 1.0f / std::sqrt(static_cast<float>(fan_in));
    for (float& w : layer.weights()) {
        w = rng.uniform(-k, k);
    }
}

FloatTensor Model::forward(const FloatTensor& x) {
    FloatTensor h = x;
    for (auto& layer : layers) {
        h = layer->forward(h);
    }
    return h;
}

void Model::backward(const FloatTensor& loss_grad) {
    FloatTensor g = loss_grad;
    for (auto it = layers.rbegin(); it != layers.rend(); ++it) {
        g = (*it)->backward(g);
    }
}

void Model::zero_grad() {
    for (auto& layer : layers) {
        layer->zero_grad();
    }
}

void Model::scale_grads(float factor) {
    for (auto& layer : layers) {
        for (float& g : layer->weight_grad()) {
            g *= factor;
        }
    }
}

Model Model::clone() const {
    Model copy;
    copy.layers.reserve(layers.size());
    for (const auto& layer : layers) {
        copy.layers.push_back(layer->clone());
    }
    return copy;
}

float mse_loss(const FloatTensor& pred, const FloatTensor& target) {
    if (pred.numel() != target.numel() || pred.numel() == 0) {
        raise(ErrorCode::invalid_argument, "loss shape mismatch");
    }
    double sum = 0.0;
    for (size_t i = 0; i < pred.data.size(); ++i) {
        const double d = static_cast<double>(pred.data[i]) - target.data[i];
        sum += d * d;
    }
    return static_cast<float>(sum / static_cast<double>(pred.numel()));
}

FloatTensor mse_grad(const FloatTensor& pred, const FloatTensor& target) {
    if (pred.numel() != target.numel() || pred.numel() == 0) {
        raise(ErrorCode::invalid_argument, "loss shape mismatch");
    }
    const float scale = 2.0f / static_cast<float>(pred.numel());
    std::vector<float> g(pred.data.size());
    for (size_t i = 0; i < g.size(); ++i) {
        g[i] = scale * (pred.data[i] - target.data[i]);
    }
    return FloatTensor(pred.shape, std::move(g));
}

void TrainConfig::validate() const {
    if (batch_size == 0) {
        raise(ErrorCode::invalid_argument, "batch size must be positive");
    }
    if (!(learning_rate > 0.0f)) {
        raise(ErrorCode::invalid_argument, "learning rate must be positive");
    }
    if (momentum < 0.0f || momentum >= 1.0f) {
        raise(ErrorCode::invalid_argument, "momentum must be in [0, 1)");
    }
}

TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg) {
    cfg.validate();
    if (data.size() == 0 || data.inputs.size() != data.targets.size()) {
        raise(ErrorCode::invalid_argument, "dataset is empty or inconsistent");
    }

    Rng shuffle_rng = Rng(cfg.seed).fork(0x0badcafe);
    std::vector<size_t> order(data.size());
    std::iota(order.begin(), order.end(), size_t{0});
    size_t cursor = order.size(); // trigger a shuffle before the first batch

    std::vector<std::vector<float>> velocity;
    velocity.reserve(model.layers.size());
    for (const auto& layer : model.layers) {
        velocity.emplace_back(layer->weights().size(), 0.0f);
    }

    TrainResult result;
    result.loss_trace.reserve(cfg.steps);
    for (uint32_t step = 0; step < cfg.steps; ++step) {
        model.zero_grad();
        double batch_loss = 0.0;
        try {
            for (uint32_t b = 0; b < cfg.batch_size; ++b) {
                if (cursor >= order.size()) {
                    for (size_t i = order.size(); i > 1; --i) {
                        std::swap(order[i - 1], order[shuffle_rng.below(i)]);
                    }
                    cursor = 0;
                }
                const size_t idx = order[cursor++];
                const FloatTensor y = model.forward(data.inputs[idx]);
                batch_loss += mse_loss(y, data.targets[idx]);
                model.backward(mse_grad(y, data.targets[idx]));
            }
        } catch (const Error& e) {
            // exploding weights overflow float activations before the batch
            // loss itself is seen; report that as divergence too
            if (e.code() == ErrorCode::invalid_argument &&
                std::string(e.what()).find("non-finite") != std::string::npos) {
                raise(ErrorCode::diverged, "non-finite loss at step " + std::to_string(step));
            }
            throw;
        }
        const float loss = static_cast<float>(batch_loss / cfg.batch_size);
        if (!std::isfinite(loss)) {
            raise(ErrorCode::diverged, "non-finite loss at step " + std::to_string(step));
        }
        result.loss_trace.push_back(loss);

        model.scale_grads(1.0f / static_cast<float>(cfg.batch_size));
        for (size_t li = 0; li < model.layers.size(); ++li) {
            auto w = model.layers[li]->weights();
            auto g = model.layers[li]->weight_grad();
            if (cfg.optimizer == OptimizerKind::sgd_momentum) {
                for (size_t i = 0; i < w.size(); ++i) {
                    velocity[li][i] = cfg.momentum * velocity[li][i] + g[i];
                    w[i] -= cfg.learning_rate * velocity[li][i];
                }
            } else {
                for (size_t i = 0; i < w.size(); ++i) {
                    w[i] -= cfg.learning_rate * g[i];
                }
            }
        }
    }
    return result;
}

float evaluate_mse(Model& model, const Dataset& data) {
    if (data.size() == 0) {
        raise(ErrorCode::invalid_argument, "empty evaluation set");
    }
    double sum = 0.0;
    for (size_t i = 0; i < data.size(); ++i) {
        sum += mse_loss(model.forward(data.inputs[i]), data.targets[i]);
    }
    return static_cast<float>(sum / static_cast<double>(data.size()));
}

Model ptq_quantize(const Model& model, const QuantConfig& cfg) {
    Model quantized = model.clone();
    for (auto& layer : quantized.layers) {
        if (layer->mode() == QuantMode::float_passthrough) {
            layer->set_config(cfg);
            layer->set_mode(cfg.ternary ? QuantMode::ternary : QuantMode::int_b);
        }
    }
    return quantized;
}

} // namespace bitw
