#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "oracles.hpp"
#include "qat.hpp"

using namespace bitw;

namespace {

std::vector<float> random_floats(std::mt19937& rng, size_t n, float lo, float hi) {
    std::uniform_real_distribution<float> dist(lo, hi);
    std::vector<float> out(n);
    for (auto& v : out) {
        v = dist(rng);
    }
    return out;
}

Model two_layer_float(std::mt19937& rng) {
    QuantConfig cfg;
    Model model;
    Conv1dSpec s1{3, 6, 1, 1, 0};
    Conv1dSpec s2{6, 3, 1, 1, 0};
    for (const auto& s : {s1, s2}) {
        auto layer = std::make_unique<FakeQuantConv1d>(s, QuantMode::float_passthrough, cfg);
        const float k = 1.0f / std::sqrt(static_cast<float>(s.c_in * s.kernel_size));
        for (auto& w : layer->weights()) {
            w = std::uniform_real_distribution<float>(-k, k)(rng);
        }
        model.layers.push_back(std::move(layer));
    }
    return model;
}

} // namespace

TEST_CASE("the straight-through weight node is the identity") {
    std::mt19937 rng(89);
    for (int iter = 0; iter < 50; ++iter) {
        const uint32_t n = 1 + rng() % 32;
        const FloatTensor g({n}, random_floats(rng, n, -3.0f, 3.0f));
        const FloatTensor back = ste_weight_backward(g);
        CHECK(back.data == g.data);
    }
}

TEST_CASE("fake-quant forward equals the inference kernels bit for bit") {
    QuantConfig cfg;
    std::mt19937 rng(97);
    Conv1dSpec spec{3, 4, 3, 1, 1};
    FakeQuantConv1d layer(spec, QuantMode::ternary, cfg);
    for (auto& w : layer.weights()) {
        w = std::uniform_real_distribution<float>(-1.0f, 1.0f)(rng);
    }

    const FloatTensor x({3, 8}, random_floats(rng, 24, -2.0f, 2.0f));
    const FloatTensor from_layer = layer.forward(x);

    const FloatTensor master({spec.c_out, spec.c_in, spec.kernel_size},
                             {layer.weights().begin(), layer.weights().end()});
    const TernaryTensor tern = quantize_ternary(master, cfg);
    const FloatTensor from_kernels = ternary_conv1d_forward(x, spec, tern, cfg);
    CHECK(from_layer.data == from_kernels.data);

    const FloatTensor from_packed = packed_conv1d_forward(x, spec, encode(tern), tern.beta, cfg);
    CHECK(from_layer.data == from_packed.data);
}

TEST_CASE("worked dequantized-weight example") {
    QuantConfig cfg;
    FakeQuantLinear layer(LinearSpec{4, 1}, QuantMode::ternary, cfg);
    const float master[4] = {0.5f, -0.2f, 0.1f, -0.9f};
    std::copy(master, master + 4, layer.weights().begin());

    std::mt19937 rng(101);
    const FloatTensor x({4}, random_floats(rng, 4, -1.0f, 1.0f));
    const FloatTensor y = layer.forward(x);

    // effective dequantized weights are (0.425, 0, 0, -0.425)
    const TernaryTensor expected({1, 4}, {1, 0, 0, -1}, 0.425f);
    const FloatTensor want = ternary_linear_forward(x, expected, cfg);
    REQUIRE(y.data.size() == want.data.size());
    for (size_t i = 0; i < y.data.size(); ++i) {
        CHECK(y.data[i] == doctest::Approx(want.data[i]).epsilon(1e-6));
    }

    const FloatTensor packed = packed_linear_forward(x, encode(expected), 0.425f, cfg);
    for (size_t i = 0; i < y.data.size(); ++i) {
        CHECK(y.data[i] == doctest::Approx(packed.data[i]).epsilon(1e-6));
    }
}

TEST_CASE("float passthrough is an ordinary layer") {
    QuantConfig cfg;
    std::mt19937 rng(103);
    FakeQuantLinear layer(LinearSpec{5, 2}, QuantMode::float_passthrough, cfg);
    for (auto& w : layer.weights()) {
        w = std::uniform_real_distribution<float>(-1.0f, 1.0f)(rng);
    }
    const FloatTensor x({5}, random_floats(rng, 5, -2.0f, 2.0f));
    const FloatTensor y = layer.forward(x);
    const FloatTensor want =
        float_linear_forward(x, {layer.weights().data(), layer.weights().size()},
                             LinearSpec{5, 2});
    CHECK(y.data == want.data);
}

TEST_CASE("integer fake-quant mode matches the b-bit kernels") {
    QuantConfig cfg;
    cfg.ternary = false;
    cfg.weight_bits = 4;
    std::mt19937 rng(107);
    Conv1dSpec spec{2, 3, 3, 1, 0};
    FakeQuantConv1d layer(spec, QuantMode::int_b, cfg);
    for (auto& w : layer.weights()) {
        w = std::uniform_real_distribution<float>(-1.0f, 1.0f)(rng);
    }
    const FloatTensor x({2, 9}, random_floats(rng, 18, -2.0f, 2.0f));
    const FloatTensor y = layer.forward(x);

    const FloatTensor master({spec.c_out, spec.c_in, spec.kernel_size},
                             {layer.weights().begin(), layer.weights().end()});
    const IntQuantTensor q = quantize_b_bit(master, cfg);
    std::vector<int8_t> w8(q.values.begin(), q.values.end());
    const FloatTensor want = int_weight_conv1d_forward(x, w8, spec, q.beta, cfg, nullptr);
    CHECK(y.data == want.data);
}

TEST_CASE("backward before forward is an error") {
    QuantConfig cfg;
    FakeQuantLinear layer(LinearSpec{2, 2}, QuantMode::ternary, cfg);
    CHECK_THROWS_AS(layer.backward(FloatTensor({2}, {1.0f, 1.0f})), Error);
}

TEST_CASE("weight gradient equals the dequantized-weight gradient") {
    QuantConfig cfg;
    FakeQuantLinear layer(LinearSpec{3, 1}, QuantMode::ternary, cfg);
    layer.weights()[0] = 0.9f;
    layer.weights()[1] = -0.4f;
    layer.weights()[2] = 0.05f;

    const std::vector<double> x = {1.0, -0.5, 0.25};
    layer.forward(FloatTensor({3}, {1.0f, -0.5f, 0.25f}));
    const float g0 = 0.7f;
    layer.zero_grad();
    layer.backward(FloatTensor({1}, {g0}));

    // independent recomputation: grad_W = (gamma / Q_p) * g0 * x_quant
    oracle::QuantPipeline ref;
    std::vector<double> h;
    oracle::QuantPipeline::normalize(x, h, 1, 3, 3, 1, 1e-5);
    float gamma = 0.0f;
    const std::vector<float> xq = ref.scale_and_clip(h, gamma);
    for (size_t i = 0; i < 3; ++i) {
        const double want = gamma / 128.0 * g0 * xq[i];
        CHECK(layer.weight_grad()[i] == doctest::Approx(want).epsilon(1e-5));
    }
}

TEST_CASE("single-neuron chain matches the hand derivation") {
    QuantConfig cfg;
    FakeQuantLinear layer(LinearSpec{1, 1}, QuantMode::ternary, cfg);
    layer.weights()[0] = 0.7f;

    const float c = 2.0f;
    const float target = 0.5f;
    const FloatTensor y = layer.forward(FloatTensor({1}, {c}));

    // by hand: beta = 0.7, W~ = 1, gamma = 2, x~ = Q_p - eps
    const double beta = 0.7;
    const double gamma = 2.0;
    const double xq = 128.0 - 1e-5;
    const double y_hand = xq * gamma * beta / 128.0;
    CHECK(y.data[0] == doctest::Approx(y_hand).epsilon(1e-6));

    layer.zero_grad();
    const FloatTensor g = mse_grad(y, FloatTensor({1}, {target}));
    layer.backward(g);
    const double g_hand = 2.0 * (y_hand - target);
    const double grad_hand = gamma / 128.0 * xq * g_hand;
    CHECK(layer.weight_grad()[0] == doctest::Approx(grad_hand).epsilon(1e-5));
}

TEST_CASE("analytic gradients match central differences on surrogate stacks") {
    std::mt19937 rng(109);
    QuantConfig cfg;
    for (int net = 0; net < 15; ++net) {
        gradcheck::Problem problem = gradcheck::make_problem(rng, cfg);
        CHECK(gradcheck::max_fd_relative_error(problem) < 1e-3);
    }
}

TEST_CASE("training is deterministic and zero steps change nothing") {
    auto build = [&](uint32_t seed_offset) {
        std::mt19937 local(200 + seed_offset);
        return two_layer_float(local);
    };

    Dataset data;
    std::mt19937 drng(211);
    for (int i = 0; i < 64; ++i) {
        FloatTensor x({3, 4}, random_floats(drng, 12, -1.0f, 1.0f));
        FloatTensor t({3, 4}, random_floats(drng, 12, -1.0f, 1.0f));
        data.inputs.push_back(x);
        data.targets.push_back(t);
    }

    TrainConfig tc;
    tc.seed = 42;
    tc.steps = 25;
    tc.batch_size = 8;
    tc.learning_rate = 0.01f;

    Model a = build(0);
    Model b = build(0);
    const TrainResult ra = train(a, data, tc);
    const TrainResult rb = train(b, data, tc);
    CHECK(ra.loss_trace == rb.loss_trace);
    for (size_t l = 0; l < a.layers.size(); ++l) {
        const auto wa = a.layers[l]->weights();
        const auto wb = b.layers[l]->weights();
        CHECK(std::equal(wa.begin(), wa.end(), wb.begin()));
    }

    Model c = build(0);
    std::vector<std::vector<float>> before;
    for (auto& layer : c.layers) {
        before.emplace_back(layer->weights().begin(), layer->weights().end());
    }
    TrainConfig zero = tc;
    zero.steps = 0;
    const TrainResult rc = train(c, data, zero);
    CHECK(rc.loss_trace.empty());
    for (size_t l = 0; l < c.layers.size(); ++l) {
        const auto w = c.layers[l]->weights();
        CHECK(std::equal(w.begin(), w.end(), before[l].begin()));
    }
}

TEST_CASE("a float student fits a linear synthetic task") {
    QuantConfig cfg;
    std::mt19937 rng(127);

    // linear teacher: one K=1 conv
    FakeQuantConv1d teacher(Conv1dSpec{3, 3, 1, 1, 0}, QuantMode::float_passthrough, cfg);
    for (auto& w : teacher.weights()) {
        w = std::uniform_real_distribution<float>(-1.0f, 1.0f)(rng);
    }

    Dataset data;
    for (int i = 0; i < 256; ++i) {
        FloatTensor x({3, 4}, random_floats(rng, 12, -1.0f, 1.0f));
        data.targets.push_back(teacher.forward(x));
        data.inputs.push_back(std::move(x));
    }

    std::mt19937 srng(131);
    Model student = two_layer_float(srng);
    TrainConfig tc;
    tc.seed = 7;
    tc.steps = 2000;
    tc.batch_size = 16;
    tc.learning_rate = 0.05f;
    train(student, data, tc);
    CHECK(evaluate_mse(student, data) < 0.01f);
}

TEST_CASE("ptq switches the forward path and keeps master weights") {
    QuantConfig cfg;
    std::mt19937 rng(137);
    Model model = two_layer_float(rng);
    std::vector<std::vector<float>> before;
    for (auto& layer : model.layers) {
        before.emplace_back(layer->weights().begin(), layer->weights().end());
    }

    Model quantized = ptq_quantize(model, cfg);
    for (size_t l = 0; l < quantized.layers.size(); ++l) {
        CHECK(quantized.layers[l]->mode() == QuantMode::ternary);
        const auto w = quantized.layers[l]->weights();
        CHECK(std::equal(w.begin(), w.end(), before[l].begin()));
        // dequantized values live on the {-beta, 0, beta} grid
        const FloatTensor master({static_cast<uint32_t>(w.size())},
                                 {w.begin(), w.end()});
        const TernaryTensor t = quantize_ternary(master, cfg);
        for (int8_t v : t.values) {
            CHECK((v == -1 || v == 0 || v == 1));
        }
    }

    // all-zero model quantizes to an all-zero function
    Model zeros;
    auto layer = std::make_unique<FakeQuantConv1d>(Conv1dSpec{2, 2, 1, 1, 0},
                                                   QuantMode::float_passthrough, cfg);
    zeros.layers.push_back(std::move(layer));
    Model qzeros = ptq_quantize(zeros, cfg);
    const FloatTensor y =
        qzeros.forward(FloatTensor({2, 3}, random_floats(rng, 6, -1.0f, 1.0f)));
    for (float v : y.data) {
        CHECK(v == 0.0f);
    }
}

TEST_CASE("divergence is reported with the failing step") {
    QuantConfig cfg;
    std::mt19937 rng(139);
    Model model = two_layer_float(rng);
    Dataset data;
    for (int i = 0; i < 16; ++i) {
        FloatTensor x({3, 4}, random_floats(rng, 12, -1.0f, 1.0f));
        FloatTensor t({3, 4}, random_floats(rng, 12, 50.0f, 90.0f));
        data.inputs.push_back(x);
        data.targets.push_back(t);
    }
    TrainConfig tc;
    tc.steps = 500;
    tc.batch_size = 4;
    tc.learning_rate = 1e9f;
    try {
        train(model, data, tc);
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::diverged);
        CHECK(std::string(e.what()).find("step") != std::string::npos);
    }
}
