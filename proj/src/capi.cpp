#include "bitw.h"

#include <cstring>

#include "archive.hpp"
#include "codec.hpp"
#include "experiment.hpp"

namespace {

thread_local std::string g_last_error;

bitw_status to_status(bitw::ErrorCode code) {
    switch (code) {
    case bitw::ErrorCode::ok: return BITW_OK;
    case bitw::ErrorCode::io: return BITW_ERR_IO;
    case bitw::ErrorCode::bad_magic: return BITW_ERR_BAD_MAGIC;
    case bitw::ErrorCode::bad_version: return BITW_ERR_BAD_VERSION;
    case bitw::ErrorCode::truncated: return BITW_ERR_TRUNCATED;
    case bitw::ErrorCode::trailing_bytes: return BITW_ERR_TRAILING_BYTES;
    case bitw::ErrorCode::bad_kind: return BITW_ERR_BAD_KIND;
    case bitw::ErrorCode::bad_index: return BITW_ERR_BAD_INDEX;
    case bitw::ErrorCode::bad_dtype: return BITW_ERR_BAD_DTYPE;
    case bitw::ErrorCode::malformed: return BITW_ERR_MALFORMED;
    case bitw::ErrorCode::invalid_argument: return BITW_ERR_INVALID_ARGUMENT;
    case bitw::ErrorCode::huffman_malformed: return BITW_ERR_HUFFMAN;
    case bitw::ErrorCode::mismatch: return BITW_ERR_MISMATCH;
    case bitw::ErrorCode::diverged: return BITW_ERR_DIVERGED;
    case bitw::ErrorCode::no_match: return BITW_ERR_NO_MATCH;
    }
    return BITW_ERR_INTERNAL;
}

template <typename Fn>
bitw_status guarded(Fn&& fn) {
    try {
        fn();
        g_last_error.clear();
        return BITW_OK;
    } catch (const bitw::Error& e) {
        g_last_error = e.what();
        return to_status(e.code());
    } catch (const std::exception& e) {
        g_last_error = e.what();
        return BITW_ERR_INTERNAL;
    }
}

bitw_status fail(bitw_status status, const char* message) {
    g_last_error = message;
    return status;
}

void copy_name(const std::string& name, char* out, size_t capacity) {
    if (out == nullptr || capacity == 0) {
        return;
    }
    const size_t n = std::min(name.size(), capacity - 1);
    std::memcpy(out, name.data(), n);
    out[n] = '\0';
}

} // namespace

struct bitw_float_archive {
    bitw::FloatArchive impl;
};

struct bitw_quant_archive {
    bitw::QuantArchive impl;
};

struct bitw_experiment_report {
    bitw::ExperimentReport impl;
};

extern "C" {

const char* bitw_version(void) {
    return "1.0.0";
}

const char* bitw_status_name(bitw_status status) {
    switch (status) {
    case BITW_OK: return "ok";
    case BITW_ERR_IO: return "io error";
    case BITW_ERR_BAD_MAGIC: return "bad magic";
    case BITW_ERR_BAD_VERSION: return "bad version";
    case BITW_ERR_TRUNCATED: return "truncated";
    case BITW_ERR_TRAILING_BYTES: return "trailing bytes";
    case BITW_ERR_BAD_KIND: return "bad kind";
    case BITW_ERR_BAD_INDEX: return "invalid index";
    case BITW_ERR_BAD_DTYPE: return "bad dtype";
    case BITW_ERR_MALFORMED: return "malformed";
    case BITW_ERR_INVALID_ARGUMENT: return "invalid argument";
    case BITW_ERR_HUFFMAN: return "malformed huffman payload";
    case BITW_ERR_MISMATCH: return "verification mismatch";
    case BITW_ERR_DIVERGED: return "training diverged";
    case BITW_ERR_NO_MATCH: return "no match";
    case BITW_ERR_INTERNAL: return "internal error";
    }
    return "unknown";
}

const char* bitw_last_error(void) {
    return g_last_error.c_str();
}

/* ---- float archives ----------------------------------------------------- */

bitw_status bitw_float_archive_create(bitw_float_archive** out) {
    if (out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null out pointer");
    }
    return guarded([&] { *out = new bitw_float_archive{}; });
}

bitw_status bitw_float_archive_add(bitw_float_archive* archive, const char* name,
                                   const uint32_t* dims, size_t rank, const float* data) {
    if (archive == nullptr || name == nullptr || dims == nullptr || data == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        std::vector<uint32_t> shape(dims, dims + rank);
        const uint64_t n = bitw::shape_numel(shape);
        std::vector<float> values(data, data + n);
        if (archive->impl.find(name) != nullptr) {
            bitw::raise(bitw::ErrorCode::malformed,
                        std::string("duplicate tensor name '") + name + "'");
        }
        archive->impl.tensors.push_back(
            {name, bitw::FloatTensor(std::move(shape), std::move(values))});
    });
}

bitw_status bitw_float_archive_open(const char* path, bitw_float_archive** out) {
    if (path == nullptr || out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        auto archive = std::make_unique<bitw_float_archive>();
        archive->impl = bitw::load_float_archive(path);
        *out = archive.release();
    });
}

bitw_status bitw_float_archive_save(const bitw_float_archive* archive, const char* path) {
    if (archive == nullptr || path == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] { bitw::save_float_archive(archive->impl, path); });
}

void bitw_float_archive_free(bitw_float_archive* archive) {
    delete archive;
}

size_t bitw_float_archive_count(const bitw_float_archive* archive) {
    return archive == nullptr ? 0 : archive->impl.tensors.size();
}

const char* bitw_float_archive_name(const bitw_float_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.tensors.size()) {
        return nullptr;
    }
    return archive->impl.tensors[index].name.c_str();
}

size_t bitw_float_archive_rank(const bitw_float_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.tensors.size()) {
        return 0;
    }
    return archive->impl.tensors[index].tensor.shape.size();
}

bitw_status bitw_float_archive_dims(const bitw_float_archive* archive, size_t index,
                                    uint32_t* dims, size_t capacity) {
    if (archive == nullptr || dims == nullptr || index >= archive->impl.tensors.size()) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "bad archive, index, or buffer");
    }
    const auto& shape = archive->impl.tensors[index].tensor.shape;
    if (capacity < shape.size()) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "dims buffer too small");
    }
    std::memcpy(dims, shape.data(), shape.size() * sizeof(uint32_t));
    return BITW_OK;
}

uint64_t bitw_float_archive_numel(const bitw_float_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.tensors.size()) {
        return 0;
    }
    return archive->impl.tensors[index].tensor.numel();
}

/* ---- quantization --------------------------------------------------------- */

void bitw_quantize_options_init(bitw_quantize_options* options) {
    if (options == nullptr) {
        return;
    }
    options->mode = BITW_WEIGHTS_TERNARY;
    options->block_size = bitw::kDefaultBlockSize;
    options->huffman = 0;
    options->epsilon = 1e-5f;
    options->keep_float_glob = nullptr;
}

bitw_status bitw_quantize(const bitw_float_archive* archive,
                          const bitw_quantize_options* options, bitw_quant_archive** out) {
    if (archive == nullptr || options == nullptr || out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        bitw::QuantizeOptions opts;
        switch (options->mode) {
        case BITW_WEIGHTS_TERNARY: opts.mode = bitw::WeightMode::ternary; break;
        case BITW_WEIGHTS_INT4: opts.mode = bitw::WeightMode::int4; break;
        case BITW_WEIGHTS_INT8: opts.mode = bitw::WeightMode::int8; break;
        default:
            bitw::raise(bitw::ErrorCode::invalid_argument, "unknown weight mode");
        }
        opts.block_size = options->block_size;
        opts.huffman = options->huffman != 0;
        opts.epsilon = options->epsilon;
        if (options->keep_float_glob != nullptr) {
            opts.keep_float_glob = options->keep_float_glob;
        }
        auto result = std::make_unique<bitw_quant_archive>();
        result->impl = bitw::quantize_archive(archive->impl, opts);
        *out = result.release();
    });
}

/* ---- quantized archives ----------------------------------------------------- */

bitw_status bitw_quant_archive_open(const char* path, bitw_quant_archive** out) {
    if (path == nullptr || out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        auto archive = std::make_unique<bitw_quant_archive>();
        archive->impl = bitw::load_quant_archive(path);
        *out = archive.release();
    });
}

bitw_status bitw_quant_archive_save(const bitw_quant_archive* archive, const char* path) {
    if (archive == nullptr || path == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] { bitw::save_quant_archive(archive->impl, path); });
}

void bitw_quant_archive_free(bitw_quant_archive* archive) {
    delete archive;
}

size_t bitw_quant_archive_count(const bitw_quant_archive* archive) {
    return archive == nullptr ? 0 : archive->impl.layers.size();
}

const char* bitw_quant_archive_name(const bitw_quant_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.layers.size()) {
        return nullptr;
    }
    return archive->impl.layers[index].name.c_str();
}

int bitw_quant_archive_kind(const bitw_quant_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.layers.size()) {
        return -1;
    }
    return static_cast<int>(archive->impl.layers[index].kind);
}

size_t bitw_quant_archive_rank(const bitw_quant_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.layers.size()) {
        return 0;
    }
    return archive->impl.layers[index].dims.size();
}

bitw_status bitw_quant_archive_dims(const bitw_quant_archive* archive, size_t index,
                                    uint32_t* dims, size_t capacity) {
    if (archive == nullptr || dims == nullptr || index >= archive->impl.layers.size()) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "bad archive, index, or buffer");
    }
    const auto& shape = archive->impl.layers[index].dims;
    if (capacity < shape.size()) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "dims buffer too small");
    }
    std::memcpy(dims, shape.data(), shape.size() * sizeof(uint32_t));
    return BITW_OK;
}

uint64_t bitw_quant_archive_numel(const bitw_quant_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.layers.size()) {
        return 0;
    }
    return archive->impl.layers[index].num_weights();
}

int bitw_quant_archive_block_size(const bitw_quant_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.layers.size()) {
        return 0;
    }
    return archive->impl.layers[index].block_size;
}

float bitw_quant_archive_beta(const bitw_quant_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.layers.size()) {
        return 0.0f;
    }
    return archive->impl.layers[index].beta;
}

int bitw_quant_archive_huffman(const bitw_quant_archive* archive, size_t index) {
    if (archive == nullptr || index >= archive->impl.layers.size()) {
        return 0;
    }
    return archive->impl.layers[index].huffman ? 1 : 0;
}

bitw_status bitw_quant_archive_pack(const bitw_quant_archive* archive, int block_size,
                                    int huffman, bitw_quant_archive** out) {
    if (archive == nullptr || out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        auto result = std::make_unique<bitw_quant_archive>();
        result->impl = bitw::pack_archive(archive->impl, block_size, huffman != 0);
        *out = result.release();
    });
}

bitw_status bitw_quant_archive_unpack(const bitw_quant_archive* archive,
                                      bitw_quant_archive** out) {
    if (archive == nullptr || out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        auto result = std::make_unique<bitw_quant_archive>();
        result->impl = bitw::unpack_archive(archive->impl);
        *out = result.release();
    });
}

/* ---- size accounting --------------------------------------------------------- */

bitw_status bitw_quant_archive_layer_size(const bitw_quant_archive* archive, size_t index,
                                          bitw_layer_size* out) {
    if (archive == nullptr || out == nullptr || index >= archive->impl.layers.size()) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "bad archive, index, or buffer");
    }
    return guarded([&] {
        const bitw::SizeReport report = bitw::size_report(archive->impl);
        const bitw::LayerSize& entry = report.layers[index];
        out->num_weights = entry.num_weights;
        out->raw_float_bytes = entry.raw_float_bytes;
        out->payload_bytes = entry.payload_bytes;
        out->stored_bytes = entry.stored_bytes;
    });
}

bitw_status bitw_quant_archive_totals(const bitw_quant_archive* archive, uint64_t* raw_bytes,
                                      uint64_t* stored_bytes, double* reduction_percent) {
    if (archive == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null archive");
    }
    return guarded([&] {
        const bitw::SizeReport report = bitw::size_report(archive->impl);
        if (raw_bytes != nullptr) {
            *raw_bytes = report.total_raw;
        }
        if (stored_bytes != nullptr) {
            *stored_bytes = report.total_stored;
        }
        if (reduction_percent != nullptr) {
            *reduction_percent = report.reduction_percent;
        }
    });
}

double bitw_packed_size_bytes(uint64_t num_weights, bitw_size_mode mode) {
    switch (mode) {
    case BITW_SIZE_IDEAL_158:
        return bitw::packed_size_bytes(num_weights, bitw::SizeMode::ideal_158);
    case BITW_SIZE_RAW_INT8:
        return bitw::packed_size_bytes(num_weights, bitw::SizeMode::raw_int8);
    case BITW_SIZE_INDEXED:
        return bitw::packed_size_bytes(num_weights, bitw::SizeMode::indexed);
    case BITW_SIZE_INT4:
        return bitw::packed_size_bytes(num_weights, bitw::SizeMode::int4);
    }
    return -1.0;
}

double bitw_reduction_percent(double raw_bytes, double stored_bytes) {
    return bitw::reduction_percent(raw_bytes, stored_bytes);
}

/* ---- histogram ------------------------------------------------------------------ */

bitw_status bitw_histogram(const bitw_quant_archive* archive, const char* name_glob,
                           uint64_t* counts, size_t capacity, size_t* bins_out) {
    if (archive == nullptr || counts == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    const std::string glob = name_glob == nullptr ? "*" : name_glob;
    return guarded([&] {
        int block_size = 0;
        for (const auto& layer : archive->impl.layers) {
            if (layer.kind != bitw::LayerKind::ternary_indexed ||
                !bitw::glob_match(glob, layer.name)) {
                continue;
            }
            if (block_size == 0) {
                block_size = layer.block_size;
            } else if (block_size != layer.block_size) {
                bitw::raise(bitw::ErrorCode::invalid_argument,
                            "matched layers have differing block sizes");
            }
        }
        if (block_size == 0) {
            bitw::raise(bitw::ErrorCode::no_match,
                        "no ternary layer matches '" + glob + "'");
        }
        bitw::IndexHistogram hist(block_size);
        for (const auto& layer : archive->impl.layers) {
            if (layer.kind != bitw::LayerKind::ternary_indexed ||
                !bitw::glob_match(glob, layer.name)) {
                continue;
            }
            bitw::PackedWeights packed;
            packed.indices = layer.payload;
            packed.total_length = layer.num_weights();
            packed.block_size = layer.block_size;
            packed.shape = layer.dims;
            bitw::histogram_add(hist, packed);
        }
        if (capacity < hist.counts.size()) {
            bitw::raise(bitw::ErrorCode::invalid_argument, "counts buffer too small");
        }
        std::memcpy(counts, hist.counts.data(), hist.counts.size() * sizeof(uint64_t));
        if (bins_out != nullptr) {
            *bins_out = hist.counts.size();
        }
    });
}

/* ---- verification ------------------------------------------------------------------ */

bitw_status bitw_verify(const bitw_quant_archive* archive, const bitw_float_archive* source,
                        int block_size, float epsilon, float beta_tolerance,
                        char* mismatch_name, size_t mismatch_capacity) {
    if (archive == nullptr || source == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    bitw::VerifyOptions opts;
    opts.block_size = block_size;
    opts.epsilon = epsilon;
    opts.beta_tolerance = beta_tolerance;
    bitw::VerifyResult result;
    const bitw_status status =
        guarded([&] { result = bitw::verify_archive(archive->impl, source->impl, opts); });
    if (status != BITW_OK) {
        return status;
    }
    if (!result.ok) {
        copy_name(result.first_mismatch, mismatch_name, mismatch_capacity);
        return fail(BITW_ERR_MISMATCH, result.detail.c_str());
    }
    return BITW_OK;
}

/* ---- ternary block codec ------------------------------------------------------------- */

bitw_status bitw_encode_ternary(const int8_t* values, size_t count, int block_size,
                                uint8_t* out, size_t capacity, size_t* written_out) {
    if (values == nullptr || out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        const std::vector<uint32_t> shape = {static_cast<uint32_t>(count)};
        const bitw::PackedWeights packed =
            bitw::encode(std::span<const int8_t>(values, count), shape, block_size);
        if (capacity < packed.indices.size()) {
            bitw::raise(bitw::ErrorCode::invalid_argument, "output buffer too small");
        }
        std::memcpy(out, packed.indices.data(), packed.indices.size());
        if (written_out != nullptr) {
            *written_out = packed.indices.size();
        }
    });
}

bitw_status bitw_decode_ternary(const uint8_t* indices, size_t index_count,
                                uint64_t total_length, int block_size, int8_t* out,
                                size_t capacity) {
    if (indices == nullptr || out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        bitw::PackedWeights packed;
        packed.indices.assign(indices, indices + index_count);
        packed.total_length = total_length;
        packed.block_size = static_cast<uint8_t>(block_size);
        const std::vector<int8_t> values = bitw::decode(packed);
        if (capacity < values.size()) {
            bitw::raise(bitw::ErrorCode::invalid_argument, "output buffer too small");
        }
        std::memcpy(out, values.data(), values.size());
    });
}

/* ---- experiment ------------------------------------------------------------------------ */

void bitw_experiment_options_init(bitw_experiment_options* options) {
    if (options == nullptr) {
        return;
    }
    const bitw::ExperimentConfig defaults;
    options->seeds = defaults.seeds;
    options->base_seed = defaults.base_seed;
    options->steps = defaults.steps;
    options->batch_size = defaults.batch_size;
    options->learning_rate = defaults.learning_rate;
    options->train_samples = defaults.train_samples;
    options->eval_samples = defaults.eval_samples;
}

bitw_status bitw_run_experiment(const bitw_experiment_options* options,
                                bitw_experiment_report** out) {
    if (options == nullptr || out == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] {
        bitw::ExperimentConfig cfg;
        cfg.seeds = options->seeds;
        cfg.base_seed = options->base_seed;
        cfg.steps = options->steps;
        cfg.batch_size = options->batch_size;
        cfg.learning_rate = options->learning_rate;
        cfg.train_samples = options->train_samples;
        cfg.eval_samples = options->eval_samples;
        auto report = std::make_unique<bitw_experiment_report>();
        report->impl = bitw::run_experiment(cfg);
        *out = report.release();
    });
}

void bitw_experiment_report_free(bitw_experiment_report* report) {
    delete report;
}

size_t bitw_experiment_report_count(const bitw_experiment_report* report) {
    return report == nullptr ? 0 : report->impl.seeds.size();
}

uint64_t bitw_experiment_report_seed(const bitw_experiment_report* report, size_t index) {
    if (report == nullptr || index >= report->impl.seeds.size()) {
        return 0;
    }
    return report->impl.seeds[index].seed;
}

float bitw_experiment_report_float_loss(const bitw_experiment_report* report, size_t index) {
    if (report == nullptr || index >= report->impl.seeds.size()) {
        return 0.0f;
    }
    return report->impl.seeds[index].float_loss;
}

float bitw_experiment_report_ptq_loss(const bitw_experiment_report* report, size_t index) {
    if (report == nullptr || index >= report->impl.seeds.size()) {
        return 0.0f;
    }
    return report->impl.seeds[index].ptq_loss;
}

float bitw_experiment_report_qat_loss(const bitw_experiment_report* report, size_t index) {
    if (report == nullptr || index >= report->impl.seeds.size()) {
        return 0.0f;
    }
    return report->impl.seeds[index].qat_loss;
}

bitw_status bitw_experiment_report_write(const bitw_experiment_report* report,
                                         const char* path) {
    if (report == nullptr || path == nullptr) {
        return fail(BITW_ERR_INVALID_ARGUMENT, "null argument");
    }
    return guarded([&] { bitw::write_report(report->impl, path); });
}

} /* extern "C" */
