#include "experiment.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

namespace bitw {

namespace {

// 3-layer conv1d stack on [4, 16] sequences, kernel 5, same-length padding.
constexpr uint32_t kChannels[4] = {4, 8, 8, 4};
constexpr uint32_t kKernel = 5;
constexpr uint32_t kSeqLen = 16;

Model make_student(QuantMode mode, const QuantConfig& cfg, Rng init_rng) {
    Model model;
    for (int l = 0; l < 3; ++l) {
        Conv1dSpec spec;
        spec.c_in = kChannels[l];
        spec.c_out = kChannels[l + 1];
        spec.kernel_size = kKernel;
        spec.stride = 1;
        spec.padding = kKernel / 2;
        auto layer = std::make_unique<FakeQuantConv1d>(spec, mode, cfg);
        init_weights(*layer, spec.c_in * spec.kernel_size, init_rng);
        model.layers.push_back(std::move(layer));
    }
    return model;
}

// Teacher: same topology, float forward, weights drawn from {-1, 0, 1} times
// a per-layer scale, so a quantized student can reach the same weight grid.
// The scale is normalized by fan-in to keep every layer's gain near one.
Model make_teacher(Rng rng, const QuantConfig& cfg) {
    Model model = make_student(QuantMode::float_passthrough, cfg, rng.fork(1));
    int l = 0;
    for (auto& layer : model.layers) {
        Rng wrng = rng.fork(100 + l);
        const auto* conv = dynamic_cast<const FakeQuantConv1d*>(layer.get());
        const float fan_in = static_cast<float>(conv->spec().c_in * conv->spec().kernel_size);
        const float scale = wrng.uniform(0.7f, 1.3f) / std::sqrt(fan_in * 0.6f);
        for (float& w : layer->weights()) {
            const double u = wrng.uniform();
            w = u < 0.4 ? 0.0f : (u < 0.7 ? scale : -scale);
        }
        ++l;
    }
    return model;
}

Dataset make_dataset(Model& teacher, uint32_t samples, Rng rng) {
    Dataset data;
    data.inputs.reserve(samples);
    data.targets.reserve(samples);
    for (uint32_t i = 0; i < samples; ++i) {
        std::vector<float> x(static_cast<size_t>(kChannels[0]) * kSeqLen);
        for (float& v : x) {
            v = rng.uniform(-1.0f, 1.0f);
        }
        FloatTensor input({kChannels[0], kSeqLen}, std::move(x));
        data.targets.push_back(teacher.forward(input));
        data.inputs.push_back(std::move(input));
    }
    return data;
}

} // namespace

void ExperimentConfig::validate() const {
    if (seeds == 0) {
        raise(ErrorCode::invalid_argument, "experiment needs at least one seed");
    }
    if (train_samples == 0 || eval_samples == 0) {
        raise(ErrorCode::invalid_argument, "experiment needs non-empty datasets");
    }
}

ExperimentReport run_experiment(const ExperimentConfig& cfg) {
    cfg.validate();

    QuantConfig qcfg;
    qcfg.ternary = cfg.ternary;
    qcfg.weight_bits = cfg.weight_bits;

    ExperimentReport report;
    for (uint32_t s = 0; s < cfg.seeds; ++s) {
        const uint64_t seed = cfg.base_seed + s;
        Rng root(seed);

        Model teacher = make_teacher(root.fork(1), qcfg);
        const Dataset train_set = make_dataset(teacher, cfg.train_samples, root.fork(2));
        const Dataset eval_set = make_dataset(teacher, cfg.eval_samples, root.fork(3));

        TrainConfig tc;
        tc.steps = cfg.steps;
        tc.batch_size = cfg.batch_size;
        tc.learning_rate = cfg.learning_rate;
        tc.momentum = cfg.momentum;
        tc.optimizer = OptimizerKind::sgd_momentum;

        SeedResult result;
        result.seed = seed;

        Model float_model = make_student(QuantMode::float_passthrough, qcfg, root.fork(4));
        tc.seed = root.fork(5).next_u64();
        train(float_model, train_set, tc);
        result.float_loss = evaluate_mse(float_model, eval_set);

        Model ptq_model = ptq_quantize(float_model, qcfg);
        result.ptq_loss = evaluate_mse(ptq_model, eval_set);

        Model qat_model = make_student(
            qcfg.ternary ? QuantMode::ternary : QuantMode::int_b, qcfg, root.fork(6));
        tc.seed = root.fork(7).next_u64();
        train(qat_model, train_set, tc);
        result.qat_loss = evaluate_mse(qat_model, eval_set);

        report.seeds.push_back(result);
    }
    return report;
}

double ExperimentReport::mean_float() const {
    double sum = 0.0;
    for (const auto& s : seeds) {
        sum += s.float_loss;
    }
    return seeds.empty() ? 0.0 : sum / static_cast<double>(seeds.size());
}

double ExperimentReport::mean_ptq() const {
    double sum = 0.0;
    for (const auto& s : seeds) {
        sum += s.ptq_loss;
    }
    return seeds.empty() ? 0.0 : sum / static_cast<double>(seeds.size());
}

double ExperimentReport::mean_qat() const {
    double sum = 0.0;
    for (const auto& s : seeds) {
        sum += s.qat_loss;
    }
    return seeds.empty() ? 0.0 : sum / static_cast<double>(seeds.size());
}

double ExperimentReport::stddev_qat() const {
    if (seeds.size() < 2) {
        return 0.0;
    }
    const double mean = mean_qat();
    double sum = 0.0;
    for (const auto& s : seeds) {
        const double d = s.qat_loss - mean;
        sum += d * d;
    }
    return std::sqrt(sum / static_cast<double>(seeds.size() - 1));
}

std::string format_report(const ExperimentReport& report) {
    std::string out = "seed,float_loss,ptq_loss,qat_loss\n";
    char line[160];
    for (const auto& s : report.seeds) {
        std::snprintf(line, sizeof(line), "%llu,%.9g,%.9g,%.9g\n",
                      static_cast<unsigned long long>(s.seed), s.float_loss, s.ptq_loss,
                      s.qat_loss);
        out += line;
    }
    return out;
}

void write_report(const ExperimentReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        raise(ErrorCode::io, "cannot create '" + path + "'");
    }
    out << format_report(report);
    if (!out.good()) {
        raise(ErrorCode::io, "write failed for '" + path + "'");
    }
}

} // namespace bitw
