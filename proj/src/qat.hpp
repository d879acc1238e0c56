#pragma once

#include <memory>

#include "kernels.hpp"
#include "rng.hpp"

namespace bitw {

enum class QuantMode {
    float_passthrough, // ordinary linear/conv on the float master weights
    ternary,           // full 1.58-bit pipeline
    int_b,             // full b-bit pipeline (cfg.weight_bits, b <= 8)
    surrogate,         // layer norm + plain linear/conv; the differentiable
                       // skeleton used by gradient checking
};

// Backward of the weight quantize-dequantize node: the straight-through
// estimator passes the upstream gradient through unchanged.
FloatTensor ste_weight_backward(const FloatTensor& upstream);

// Trainable layer whose forward applies quantize-dequantize to its float
// master weights. Backward treats the weight quantization as the identity
// map; the scales gamma and beta are constants of the forward pass, and the
// activation path (layer norm, clipped scaling, rescale) is differentiated
// normally.
class FakeQuantLayer {
public:
    virtual ~FakeQuantLayer() = default;

    virtual FloatTensor forward(const FloatTensor& x) = 0;
    // Returns dL/dx and accumulates dL/dW; requires a preceding forward.
    virtual FloatTensor backward(const FloatTensor& upstream) = 0;

    virtual std::span<float> weights() = 0;
    virtual std::span<const float> weights() const = 0;
    virtual std::span<float> weight_grad() = 0;
    virtual void zero_grad() = 0;
    virtual std::unique_ptr<FakeQuantLayer> clone() const = 0;

    QuantMode mode() const { return mode_; }
    void set_mode(QuantMode mode) { mode_ = mode; }
    const QuantConfig& config() const { return cfg_; }
    void set_config(const QuantConfig& cfg) { cfg_ = cfg; }

protected:
    FakeQuantLayer(QuantMode mode, const QuantConfig& cfg) : mode_(mode), cfg_(cfg) {}

    QuantMode mode_;
    QuantConfig cfg_;
};

class FakeQuantLinear : public FakeQuantLayer {
public:
    FakeQuantLinear(const LinearSpec& spec, QuantMode mode, const QuantConfig& cfg);

    FloatTensor forward(const FloatTensor& x) override;
    FloatTensor backward(const FloatTensor& upstream) override;
    std::span<float> weights() override { return weight_; }
    std::span<const float> weights() const override { return weight_; }
    std::span<float> weight_grad() override { return grad_; }
    void zero_grad() override;
    std::unique_ptr<FakeQuantLayer> clone() const override;

    const LinearSpec& spec() const { return spec_; }

private:
    LinearSpec spec_;
    std::vector<float> weight_;
    std::vector<float> grad_;
    // forward cache
    bool has_cache_ = false;
    FloatTensor input_;
    ForwardTrace trace_;
    std::vector<int8_t> w_quant_;
    float beta_ = 0.0f;
};

class FakeQuantConv1d : public FakeQuantLayer {
public:
    FakeQuantConv1d(const Conv1dSpec& spec, QuantMode mode, const QuantConfig& cfg);

    FloatTensor forward(const FloatTensor& x) override;
    FloatTensor backward(const FloatTensor& upstream) override;
    std::span<float> weights() override { return weight_; }
    std::span<const float> weights() const override { return weight_; }
    std::span<float> weight_grad() override { return grad_; }
    void zero_grad() override;
    std::unique_ptr<FakeQuantLayer> clone() const override;

    const Conv1dSpec& spec() const { return spec_; }

private:
    Conv1dSpec spec_;
    std::vector<float> weight_;
    std::vector<float> grad_;
    bool has_cache_ = false;
    FloatTensor input_;
    ForwardTrace trace_;
    std::vector<int8_t> w_quant_;
    float beta_ = 0.0f;
    uint32_t t_in_ = 0;
};

// Uniform init in [-k, k] with k = 1/sqrt(fan_in).
void init_weights(FakeQuantLayer& layer, uint32_t fan_in, Rng& rng);

struct Model {
    std::vector<std::unique_ptr<FakeQuantLayer>> layers;

    FloatTensor forward(const FloatTensor& x);
    void backward(const FloatTensor& loss_grad);
    void zero_grad();
    void scale_grads(float factor);
    Model clone() const;
};

float mse_loss(const FloatTensor& pred, const FloatTensor& target);
FloatTensor mse_grad(const FloatTensor& pred, const FloatTensor& target);

struct Dataset {
    std::vector<FloatTensor> inputs;
    std::vector<FloatTensor> targets;

    size_t size() const { return inputs.size(); }
};

enum class OptimizerKind { sgd, sgd_momentum };

struct TrainConfig {
    uint64_t seed = 1;
    uint32_t steps = 1000;
    uint32_t batch_size = 16;
    float learning_rate = 0.05f;
    OptimizerKind optimizer = OptimizerKind::sgd_momentum;
    float momentum = 0.9f;

    void validate() const;
};

struct TrainResult {
    std::vector<float> loss_trace; // batch loss per step, before the update
};

// Deterministic SGD training: a fixed seed and config reproduce the exact
// same weights and loss trace. Raises on a non-finite loss.
TrainResult train(Model& model, const Dataset& data, const TrainConfig& cfg);

float evaluate_mse(Model& model, const Dataset& data);

// Post-training quantization: switch float-passthrough layers to the
// quantized forward path. Master weights are kept; they quantize on the fly.
Model ptq_quantize(const Model& model, const QuantConfig& cfg);

} // namespace bitw
