// bitw command-line front end. Talks to the toolkit exclusively through the
// shared library's C interface.
//
// Exit codes: 0 ok, 1 verification/assertion failure, 2 file parse error,
// 3 usage error, 4 training divergence.

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "bitw.h"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitVerify = 1;
constexpr int kExitParse = 2;
constexpr int kExitUsage = 3;
constexpr int kExitDiverged = 4;

int exit_code_for(bitw_status status) {
    switch (status) {
    case BITW_OK:
        return kExitOk;
    case BITW_ERR_MISMATCH:
    case BITW_ERR_NO_MATCH:
        return kExitVerify;
    case BITW_ERR_INVALID_ARGUMENT:
        return kExitUsage;
    case BITW_ERR_DIVERGED:
        return kExitDiverged;
    default:
        return kExitParse;
    }
}

int report_error(const char* what, bitw_status status) {
    std::fprintf(stderr, "bitw: %s: %s (%s)\n", what, bitw_last_error(),
                 bitw_status_name(status));
    return exit_code_for(status);
}

const char* kind_name(int kind) {
    switch (kind) {
    case BITW_KIND_TERNARY: return "ternary";
    case BITW_KIND_INT4: return "int4";
    case BITW_KIND_INT8: return "int8";
    case BITW_KIND_FLOAT32: return "float32";
    default: return "?";
    }
}

std::string dims_string(const uint32_t* dims, size_t rank) {
    std::string out;
    for (size_t i = 0; i < rank; ++i) {
        if (i > 0) {
            out += "x";
        }
        out += std::to_string(dims[i]);
    }
    return out;
}

struct QuantArchiveGuard {
    bitw_quant_archive* ptr = nullptr;
    ~QuantArchiveGuard() { bitw_quant_archive_free(ptr); }
};

struct FloatArchiveGuard {
    bitw_float_archive* ptr = nullptr;
    ~FloatArchiveGuard() { bitw_float_archive_free(ptr); }
};

int print_size_report(bitw_quant_archive* archive) {
    std::printf("name,kind,num_weights,raw_bytes,stored_bytes,reduction_percent\n");
    const size_t count = bitw_quant_archive_count(archive);
    for (size_t i = 0; i < count; ++i) {
        bitw_layer_size size;
        if (bitw_status status = bitw_quant_archive_layer_size(archive, i, &size);
            status != BITW_OK) {
            return report_error("size report", status);
        }
        std::printf("%s,%s,%" PRIu64 ",%" PRIu64 ",%" PRIu64 ",%.2f\n",
                    bitw_quant_archive_name(archive, i),
                    kind_name(bitw_quant_archive_kind(archive, i)), size.num_weights,
                    size.raw_float_bytes, size.stored_bytes,
                    bitw_reduction_percent(static_cast<double>(size.raw_float_bytes),
                                           static_cast<double>(size.stored_bytes)));
    }
    uint64_t raw = 0;
    uint64_t stored = 0;
    double reduction = 0.0;
    if (bitw_status status = bitw_quant_archive_totals(archive, &raw, &stored, &reduction);
        status != BITW_OK) {
        return report_error("size report", status);
    }
    std::printf("TOTAL,,,%" PRIu64 ",%" PRIu64 ",%.2f\n", raw, stored, reduction);
    return kExitOk;
}

int cmd_quantize(const std::string& in, const std::string& out, const std::string& bits,
                 int block_size, bool huffman, float eps, const std::string& keep_float) {
    FloatArchiveGuard source;
    if (bitw_status status = bitw_float_archive_open(in.c_str(), &source.ptr);
        status != BITW_OK) {
        return report_error(in.c_str(), status);
    }

    bitw_quantize_options options;
    bitw_quantize_options_init(&options);
    if (bits == "1.58") {
        options.mode = BITW_WEIGHTS_TERNARY;
    } else if (bits == "4") {
        options.mode = BITW_WEIGHTS_INT4;
    } else {
        options.mode = BITW_WEIGHTS_INT8;
    }
    options.block_size = block_size;
    options.huffman = huffman ? 1 : 0;
    options.epsilon = eps;
    options.keep_float_glob = keep_float.empty() ? nullptr : keep_float.c_str();

    QuantArchiveGuard quant;
    if (bitw_status status = bitw_quantize(source.ptr, &options, &quant.ptr);
        status != BITW_OK) {
        return report_error("quantize", status);
    }
    if (bitw_status status = bitw_quant_archive_save(quant.ptr, out.c_str());
        status != BITW_OK) {
        return report_error(out.c_str(), status);
    }
    return print_size_report(quant.ptr);
}

int cmd_pack(const std::string& in, const std::string& out, int block_size, bool huffman) {
    QuantArchiveGuard archive;
    if (bitw_status status = bitw_quant_archive_open(in.c_str(), &archive.ptr);
        status != BITW_OK) {
        return report_error(in.c_str(), status);
    }
    QuantArchiveGuard packed;
    if (bitw_status status =
            bitw_quant_archive_pack(archive.ptr, block_size, huffman ? 1 : 0, &packed.ptr);
        status != BITW_OK) {
        return report_error("pack", status);
    }
    if (bitw_status status = bitw_quant_archive_save(packed.ptr, out.c_str());
        status != BITW_OK) {
        return report_error(out.c_str(), status);
    }
    return print_size_report(packed.ptr);
}

int cmd_unpack(const std::string& in, const std::string& out) {
    QuantArchiveGuard archive;
    if (bitw_status status = bitw_quant_archive_open(in.c_str(), &archive.ptr);
        status != BITW_OK) {
        return report_error(in.c_str(), status);
    }
    QuantArchiveGuard raw;
    if (bitw_status status = bitw_quant_archive_unpack(archive.ptr, &raw.ptr);
        status != BITW_OK) {
        return report_error("unpack", status);
    }
    if (bitw_status status = bitw_quant_archive_save(raw.ptr, out.c_str());
        status != BITW_OK) {
        return report_error(out.c_str(), status);
    }
    return print_size_report(raw.ptr);
}

int cmd_inspect(const std::string& in) {
    QuantArchiveGuard quant;
    bitw_status status = bitw_quant_archive_open(in.c_str(), &quant.ptr);
    if (status == BITW_OK) {
        const size_t count = bitw_quant_archive_count(quant.ptr);
        std::printf("%s: quantized archive, %zu layer(s)\n", in.c_str(), count);
        for (size_t i = 0; i < count; ++i) {
            const size_t rank = bitw_quant_archive_rank(quant.ptr, i);
            std::vector<uint32_t> dims(rank);
            bitw_quant_archive_dims(quant.ptr, i, dims.data(), dims.size());
            bitw_layer_size size{};
            bitw_quant_archive_layer_size(quant.ptr, i, &size);
            const int kind = bitw_quant_archive_kind(quant.ptr, i);
            std::printf("  %s kind=%s dims=%s weights=%" PRIu64 " stored=%" PRIu64 "B",
                        bitw_quant_archive_name(quant.ptr, i), kind_name(kind),
                        dims_string(dims.data(), rank).c_str(), size.num_weights,
                        size.stored_bytes);
            if (kind != BITW_KIND_FLOAT32) {
                std::printf(" beta=%.8g", bitw_quant_archive_beta(quant.ptr, i));
            }
            if (kind == BITW_KIND_TERNARY) {
                std::printf(" block_size=%d", bitw_quant_archive_block_size(quant.ptr, i));
            }
            std::printf(" huffman=%s\n",
                        bitw_quant_archive_huffman(quant.ptr, i) ? "on" : "off");
        }
        return kExitOk;
    }
    if (status != BITW_ERR_BAD_MAGIC) {
        return report_error(in.c_str(), status);
    }

    FloatArchiveGuard floats;
    if (bitw_status fstatus = bitw_float_archive_open(in.c_str(), &floats.ptr);
        fstatus != BITW_OK) {
        return report_error(in.c_str(), fstatus);
    }
    const size_t count = bitw_float_archive_count(floats.ptr);
    std::printf("%s: float archive, %zu tensor(s)\n", in.c_str(), count);
    for (size_t i = 0; i < count; ++i) {
        const size_t rank = bitw_float_archive_rank(floats.ptr, i);
        std::vector<uint32_t> dims(rank);
        bitw_float_archive_dims(floats.ptr, i, dims.data(), dims.size());
        std::printf("  %s dtype=float32 dims=%s weights=%" PRIu64 "\n",
                    bitw_float_archive_name(floats.ptr, i),
                    dims_string(dims.data(), rank).c_str(),
                    bitw_float_archive_numel(floats.ptr, i));
    }
    return kExitOk;
}

int cmd_histogram(const std::string& in, const std::string& glob, const std::string& format,
                  int top) {
    QuantArchiveGuard archive;
    if (bitw_status status = bitw_quant_archive_open(in.c_str(), &archive.ptr);
        status != BITW_OK) {
        return report_error(in.c_str(), status);
    }
    std::vector<uint64_t> counts(243, 0);
    size_t bins = 0;
    if (bitw_status status =
            bitw_histogram(archive.ptr, glob.c_str(), counts.data(), counts.size(), &bins);
        status != BITW_OK) {
        return report_error("histogram", status);
    }
    const char sep = format == "tsv" ? '\t' : ',';
    std::printf("index%ccount\n", sep);
    if (top > 0) {
        std::vector<size_t> order(bins);
        std::iota(order.begin(), order.end(), size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](size_t a, size_t b) {
            return counts[a] != counts[b] ? counts[a] > counts[b] : a < b;
        });
        const size_t n = std::min<size_t>(top, bins);
        for (size_t i = 0; i < n; ++i) {
            std::printf("%zu%c%" PRIu64 "\n", order[i], sep, counts[order[i]]);
        }
    } else {
        for (size_t i = 0; i < bins; ++i) {
            std::printf("%zu%c%" PRIu64 "\n", i, sep, counts[i]);
        }
    }
    return kExitOk;
}

int cmd_sizes(uint64_t weights) {
    std::printf("mode,bytes,kib\n");
    const struct {
        const char* name;
        bitw_size_mode mode;
    } rows[] = {
        {"ideal-1.58", BITW_SIZE_IDEAL_158},
        {"raw-int8", BITW_SIZE_RAW_INT8},
        {"indexed", BITW_SIZE_INDEXED},
        {"int4", BITW_SIZE_INT4},
    };
    for (const auto& row : rows) {
        const double bytes = bitw_packed_size_bytes(weights, row.mode);
        std::printf("%s,%.2f,%.1f\n", row.name, bytes, bytes / 1024.0);
    }
    return kExitOk;
}

int cmd_verify(const std::string& in, const std::string& against, float tolerance,
               int block_size, float eps) {
    QuantArchiveGuard quant;
    if (bitw_status status = bitw_quant_archive_open(in.c_str(), &quant.ptr);
        status != BITW_OK) {
        return report_error(in.c_str(), status);
    }
    FloatArchiveGuard source;
    if (bitw_status status = bitw_float_archive_open(against.c_str(), &source.ptr);
        status != BITW_OK) {
        return report_error(against.c_str(), status);
    }
    char mismatch[256] = {0};
    const bitw_status status = bitw_verify(quant.ptr, source.ptr, block_size, eps, tolerance,
                                           mismatch, sizeof(mismatch));
    if (status == BITW_OK) {
        std::printf("verify: OK (%zu layers)\n", bitw_quant_archive_count(quant.ptr));
        return kExitOk;
    }
    if (status == BITW_ERR_MISMATCH) {
        std::fprintf(stderr, "bitw: verify failed at layer '%s': %s\n", mismatch,
                     bitw_last_error());
        return kExitVerify;
    }
    return report_error("verify", status);
}

int cmd_experiment(uint32_t seeds, uint32_t steps, uint32_t batch_size, float learning_rate,
                   uint64_t base_seed, const std::string& out) {
    bitw_experiment_options options;
    bitw_experiment_options_init(&options);
    options.seeds = seeds;
    if (steps != UINT32_MAX) {
        options.steps = steps;
    }
    if (batch_size != 0) {
        options.batch_size = batch_size;
    }
    if (learning_rate > 0.0f) {
        options.learning_rate = learning_rate;
    }
    options.base_seed = base_seed;

    bitw_experiment_report* report = nullptr;
    if (bitw_status status = bitw_run_experiment(&options, &report); status != BITW_OK) {
        return report_error("experiment", status);
    }
    const size_t n = bitw_experiment_report_count(report);
    std::vector<double> float_losses(n), ptq_losses(n), qat_losses(n);
    for (size_t i = 0; i < n; ++i) {
        float_losses[i] = bitw_experiment_report_float_loss(report, i);
        ptq_losses[i] = bitw_experiment_report_ptq_loss(report, i);
        qat_losses[i] = bitw_experiment_report_qat_loss(report, i);
    }
    if (!out.empty()) {
        if (bitw_status status = bitw_experiment_report_write(report, out.c_str());
            status != BITW_OK) {
            bitw_experiment_report_free(report);
            return report_error(out.c_str(), status);
        }
    }
    bitw_experiment_report_free(report);

    auto mean = [](const std::vector<double>& v) {
        return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    };
    auto stddev = [&](const std::vector<double>& v) {
        if (v.size() < 2) {
            return 0.0;
        }
        const double m = mean(v);
        double sum = 0.0;
        for (double x : v) {
            sum += (x - m) * (x - m);
        }
        return std::sqrt(sum / static_cast<double>(v.size() - 1));
    };

    std::printf("method,mean_mse,std_mse\n");
    std::printf("float,%.9g,%.9g\n", mean(float_losses), stddev(float_losses));
    std::printf("ptq,%.9g,%.9g\n", mean(ptq_losses), stddev(ptq_losses));
    std::printf("qat,%.9g,%.9g\n", mean(qat_losses), stddev(qat_losses));
    const bool pass = mean(qat_losses) < mean(ptq_losses);
    std::printf("qat_beats_ptq,%s\n", pass ? "PASS" : "FAIL");
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"bitw - ternary and low-bit weight quantization toolkit"};
    app.require_subcommand(1);

    // quantize
    auto* quantize = app.add_subcommand("quantize", "Quantize a float archive (.btw -> .btq)");
    std::string q_in, q_out, q_keep_float;
    std::string q_bits = "1.58";
    std::string q_huffman = "off";
    int q_block_size = 5;
    float q_eps = 1e-5f;
    quantize->add_option("--in", q_in, "input .btw file")->required();
    quantize->add_option("--out", q_out, "output .btq file")->required();
    quantize->add_option("--bits", q_bits, "weight precision")
        ->check(CLI::IsMember({"1.58", "4", "8"}));
    quantize->add_option("--block-size", q_block_size, "ternary block length")
        ->check(CLI::Range(1, 5));
    quantize->add_option("--huffman", q_huffman, "entropy-code payloads")
        ->check(CLI::IsMember({"on", "off"}));
    quantize->add_option("--eps", q_eps, "division guard epsilon");
    quantize->add_option("--keep-float", q_keep_float, "name glob kept as float32");

    // pack
    auto* pack = app.add_subcommand("pack", "Index ternary int8 layers (weight indexing)");
    std::string p_in, p_out;
    std::string p_huffman = "off";
    int p_block_size = 5;
    pack->add_option("--in", p_in, "input .btq file")->required();
    pack->add_option("--out", p_out, "output .btq file")->required();
    pack->add_option("--block-size", p_block_size, "ternary block length")
        ->check(CLI::Range(1, 5));
    pack->add_option("--huffman", p_huffman, "entropy-code payloads")
        ->check(CLI::IsMember({"on", "off"}));

    // unpack
    auto* unpack = app.add_subcommand("unpack", "Expand indexed/int4 layers to int8");
    std::string u_in, u_out;
    unpack->add_option("--in", u_in, "input .btq file")->required();
    unpack->add_option("--out", u_out, "output .btq file")->required();

    // inspect
    auto* inspect = app.add_subcommand("inspect", "Describe a .btw or .btq file");
    std::string i_in;
    inspect->add_option("--in", i_in, "archive to describe")->required();

    // histogram
    auto* histogram = app.add_subcommand("histogram", "Index frequency of ternary layers");
    std::string h_in, h_glob = "*", h_format = "csv";
    int h_top = 0;
    histogram->add_option("--in", h_in, "input .btq file")->required();
    histogram->add_option("--layer", h_glob, "layer name glob");
    histogram->add_option("--format", h_format, "output format")
        ->check(CLI::IsMember({"csv", "tsv"}));
    histogram->add_option("--top", h_top, "print only the N most frequent indices");

    // sizes
    auto* sizes = app.add_subcommand("sizes", "Storage size of N weights in every mode");
    uint64_t s_weights = 0;
    sizes->add_option("--weights", s_weights, "number of weights")->required();

    // verify
    auto* verify = app.add_subcommand("verify", "Re-quantize a source and compare payloads");
    std::string v_in, v_against;
    float v_tolerance = 0.0f;
    float v_eps = 1e-5f;
    int v_block_size = 5;
    verify->add_option("--in", v_in, "quantized .btq file")->required();
    verify->add_option("--against", v_against, "float .btw source")->required();
    verify->add_option("--tolerance", v_tolerance, "relative scale tolerance");
    verify->add_option("--block-size", v_block_size, "ternary block length")
        ->check(CLI::Range(1, 5));
    verify->add_option("--eps", v_eps, "division guard epsilon");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Train-and-compare QAT vs PTQ");
    uint32_t e_seeds = 5;
    uint32_t e_steps = UINT32_MAX;
    uint32_t e_batch = 0;
    float e_lr = -1.0f;
    uint64_t e_base_seed = 1;
    std::string e_out;
    experiment->add_option("--seeds", e_seeds, "number of seeds");
    experiment->add_option("--steps", e_steps, "training steps per run");
    experiment->add_option("--batch-size", e_batch, "SGD batch size");
    experiment->add_option("--lr", e_lr, "learning rate");
    experiment->add_option("--base-seed", e_base_seed, "first seed value");
    experiment->add_option("--out", e_out, "report file (CSV, one row per seed)");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    if (quantize->parsed()) {
        return cmd_quantize(q_in, q_out, q_bits, q_block_size, q_huffman == "on", q_eps,
                            q_keep_float);
    }
    if (pack->parsed()) {
        return cmd_pack(p_in, p_out, p_block_size, p_huffman == "on");
    }
    if (unpack->parsed()) {
        return cmd_unpack(u_in, u_out);
    }
    if (inspect->parsed()) {
        return cmd_inspect(i_in);
    }
    if (histogram->parsed()) {
        return cmd_histogram(h_in, h_glob, h_format, h_top);
    }
    if (sizes->parsed()) {
        return cmd_sizes(s_weights);
    }
    if (verify->parsed()) {
        return cmd_verify(v_in, v_against, v_tolerance, v_block_size, v_eps);
    }
    if (experiment->parsed()) {
        return cmd_experiment(e_seeds, e_steps, e_batch, e_lr, e_base_seed, e_out);
    }
    return kExitUsage;
}
