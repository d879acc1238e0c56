// Finite-difference gradient checking against the surrogate training path.
#pragma once

#include <memory>
#include <random>

#include "qat.hpp"

namespace gradcheck {

struct Problem {
    bitw::Model model;
    bitw::FloatTensor input;
    bitw::FloatTensor target;
};

// Smallest per-column variance seen by any normalization group in the stack.
inline double min_group_variance(bitw::Model& model, const bitw::FloatTensor& input) {
    double min_var = 1e30;
    bitw::FloatTensor h = input;
    for (auto& layer : model.layers) {
        const uint32_t c = h.shape[0];
        const uint32_t t = h.shape[1];
        if (c > 1) {
            for (uint32_t step = 0; step < t; ++step) {
                double mean = 0.0;
                for (uint32_t ch = 0; ch < c; ++ch) {
                    mean += h.data[ch * t + step];
                }
                mean /= c;
                double var = 0.0;
                for (uint32_t ch = 0; ch < c; ++ch) {
                    const double d = h.data[ch * t + step] - mean;
                    var += d * d;
                }
                min_var = std::min(min_var, var / c);
            }
        }
        h = layer->forward(h);
    }
    return min_var;
}

// Random 1-3 layer surrogate conv stack. Draws are rejected while any
// normalization group is nearly constant: 1/sqrt(var + eps) then curves the
// loss so sharply that central differences stop meaning anything, while the
// analytic gradient stays exact.
inline Problem make_problem(std::mt19937& rng, const bitw::QuantConfig& cfg) {
    using namespace bitw;
    Problem problem;
    for (;;) {
        problem.model.layers.clear();
        const int depth = 1 + static_cast<int>(rng() % 3);
        uint32_t channels = 2 + rng() % 3;
        const uint32_t t_len = 4 + rng() % 5;
        const uint32_t c0 = channels;
        for (int l = 0; l < depth; ++l) {
            const uint32_t next = 2 + rng() % 3;
            Conv1dSpec spec{channels, next, static_cast<uint32_t>(1 + rng() % 3), 1, 0};
            spec.padding = spec.kernel_size / 2;
            auto layer = std::make_unique<FakeQuantConv1d>(spec, QuantMode::surrogate, cfg);
            for (auto& w : layer->weights()) {
                w = std::uniform_real_distribution<float>(-0.8f, 0.8f)(rng);
            }
            channels = next;
            problem.model.layers.push_back(std::move(layer));
        }
        std::vector<float> x(static_cast<size_t>(c0) * t_len);
        for (auto& v : x) {
            v = std::uniform_real_distribution<float>(-1.5f, 1.5f)(rng);
        }
        problem.input = FloatTensor({c0, t_len}, std::move(x));
        if (min_group_variance(problem.model, problem.input) >= 0.05) {
            break;
        }
    }
    const bitw::FloatTensor probe = problem.model.forward(problem.input);
    std::vector<float> t(probe.numel());
    for (auto& v : t) {
        v = std::uniform_real_distribution<float>(-1.0f, 1.0f)(rng);
    }
    problem.target = bitw::FloatTensor(probe.shape, std::move(t));
    return problem;
}

// Worst |analytic - central difference| over all weights, relative to the
// largest gradient component of the network.
inline double max_fd_relative_error(Problem& problem) {
    using namespace bitw;
    auto loss_of = [&]() {
        const FloatTensor y = problem.model.forward(problem.input);
        double sum = 0.0;
        for (size_t i = 0; i < y.data.size(); ++i) {
            const double d = static_cast<double>(y.data[i]) - problem.target.data[i];
            sum += d * d;
        }
        return sum / static_cast<double>(y.data.size());
    };

    problem.model.zero_grad();
    problem.model.backward(mse_grad(problem.model.forward(problem.input), problem.target));

    double max_abs_grad = 1e-6;
    for (auto& layer : problem.model.layers) {
        for (float g : layer->weight_grad()) {
            max_abs_grad = std::max(max_abs_grad, std::fabs(static_cast<double>(g)));
        }
    }

    double worst = 0.0;
    for (auto& layer : problem.model.layers) {
        auto weights = layer->weights();
        auto grads = layer->weight_grad();
        for (size_t i = 0; i < weights.size(); ++i) {
            const float keep = weights[i];
            const float h = 2e-3f;
            weights[i] = keep + h;
            const double up = loss_of();
            weights[i] = keep - h;
            const double down = loss_of();
            weights[i] = keep;
            const double fd = (up - down) / (2.0 * static_cast<double>(h));
            worst = std::max(worst, std::fabs(fd - grads[i]) / max_abs_grad);
        }
    }
    return worst;
}

} // namespace gradcheck
