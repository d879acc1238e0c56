#pragma once

#include <string>

#include "qat.hpp"

namespace bitw {

// Teacher-student regression on 1-D sequences. Per seed the harness trains a
// float baseline, applies post-training quantization to it, and trains a
// fake-quant model from scratch, all on targets produced by a frozen float
// teacher whose weights are exactly ternary times a per-layer scale.
struct ExperimentConfig {
    uint32_t seeds = 5;
    uint64_t base_seed = 1;
    uint32_t steps = 1500;
    uint32_t batch_size = 16;
    float learning_rate = 0.05f;
    float momentum = 0.9f;
    uint32_t train_samples = 2048;
    uint32_t eval_samples = 512;
    bool ternary = true; // 1.58-bit student; false = 4-bit
    int weight_bits = 4;

    void validate() const;
};

struct SeedResult {
    uint64_t seed = 0;
    float float_loss = 0.0f;
    float ptq_loss = 0.0f;
    float qat_loss = 0.0f;
};

struct ExperimentReport {
    std::vector<SeedResult> seeds;

    double mean_float() const;
    double mean_ptq() const;
    double mean_qat() const;
    double stddev_qat() const; // sample standard deviation across seeds
};

ExperimentReport run_experiment(const ExperimentConfig& cfg);

// One CSV record per seed: seed,float_loss,ptq_loss,qat_loss.
std::string format_report(const ExperimentReport& report);
void write_report(const ExperimentReport& report, const std::string& path);

} // namespace bitw
