/*
 * bitw - ternary and low-bit weight quantization toolkit.
 *
 * C interface to the shared library. All functions return a bitw_status;
 * results come back through out-parameters. Handles are opaque and must be
 * released with the matching _free function. On failure a thread-local
 * message is available via bitw_last_error().
 */

#ifndef BITW_H
#define BITW_H

#include <stddef.h>
#include <stdint.h>

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bitw_status {
    BITW_OK = 0,
    BITW_ERR_IO = 1,
    BITW_ERR_BAD_MAGIC = 2,
    BITW_ERR_BAD_VERSION = 3,
    BITW_ERR_TRUNCATED = 4,
    BITW_ERR_TRAILING_BYTES = 5,
    BITW_ERR_BAD_KIND = 6,
    BITW_ERR_BAD_INDEX = 7,
    BITW_ERR_BAD_DTYPE = 8,
    BITW_ERR_MALFORMED = 9,
    BITW_ERR_INVALID_ARGUMENT = 10,
    BITW_ERR_HUFFMAN = 11,
    BITW_ERR_MISMATCH = 12,
    BITW_ERR_DIVERGED = 13,
    BITW_ERR_NO_MATCH = 14,
    BITW_ERR_INTERNAL = 15
} bitw_status;

/* Layer storage kinds, identical to the on-disk values. */
typedef enum bitw_layer_kind {
    BITW_KIND_TERNARY = 0,
    BITW_KIND_INT4 = 1,
    BITW_KIND_INT8 = 2,
    BITW_KIND_FLOAT32 = 3
} bitw_layer_kind;

typedef enum bitw_weight_mode {
    BITW_WEIGHTS_TERNARY = 0, /* 1.58-bit + weight indexing */
    BITW_WEIGHTS_INT4 = 1,
    BITW_WEIGHTS_INT8 = 2
} bitw_weight_mode;

typedef enum bitw_size_mode {
    BITW_SIZE_IDEAL_158 = 0,
    BITW_SIZE_RAW_INT8 = 1,
    BITW_SIZE_INDEXED = 2,
    BITW_SIZE_INT4 = 3
} bitw_size_mode;

typedef struct bitw_float_archive bitw_float_archive;
typedef struct bitw_quant_archive bitw_quant_archive;
typedef struct bitw_experiment_report bitw_experiment_report;

const char* bitw_version(void);
const char* bitw_status_name(bitw_status status);
/* Message for the last failing call on this thread ("" if none). */
const char* bitw_last_error(void);

/* ---- float weight archives (.btw) ------------------------------------- */

bitw_status bitw_float_archive_create(bitw_float_archive** out);
bitw_status bitw_float_archive_add(bitw_float_archive* archive, const char* name,
                                   const uint32_t* dims, size_t rank, const float* data);
bitw_status bitw_float_archive_open(const char* path, bitw_float_archive** out);
bitw_status bitw_float_archive_save(const bitw_float_archive* archive, const char* path);
void bitw_float_archive_free(bitw_float_archive* archive);

size_t bitw_float_archive_count(const bitw_float_archive* archive);
const char* bitw_float_archive_name(const bitw_float_archive* archive, size_t index);
size_t bitw_float_archive_rank(const bitw_float_archive* archive, size_t index);
bitw_status bitw_float_archive_dims(const bitw_float_archive* archive, size_t index,
                                    uint32_t* dims, size_t capacity);
uint64_t bitw_float_archive_numel(const bitw_float_archive* archive, size_t index);

/* ---- quantization ------------------------------------------------------ */

typedef struct bitw_quantize_options {
    int mode;                    /* bitw_weight_mode */
    int block_size;              /* ternary block length, 1..5 */
    int huffman;                 /* 0/1 */
    float epsilon;               /* division guard */
    const char* keep_float_glob; /* NULL or a name glob kept as float32 */
} bitw_quantize_options;

void bitw_quantize_options_init(bitw_quantize_options* options);

bitw_status bitw_quantize(const bitw_float_archive* archive,
                          const bitw_quantize_options* options, bitw_quant_archive** out);

/* ---- quantized archives (.btq) ----------------------------------------- */

bitw_status bitw_quant_archive_open(const char* path, bitw_quant_archive** out);
bitw_status bitw_quant_archive_save(const bitw_quant_archive* archive, const char* path);
void bitw_quant_archive_free(bitw_quant_archive* archive);

size_t bitw_quant_archive_count(const bitw_quant_archive* archive);
const char* bitw_quant_archive_name(const bitw_quant_archive* archive, size_t index);
int bitw_quant_archive_kind(const bitw_quant_archive* archive, size_t index);
size_t bitw_quant_archive_rank(const bitw_quant_archive* archive, size_t index);
bitw_status bitw_quant_archive_dims(const bitw_quant_archive* archive, size_t index,
                                    uint32_t* dims, size_t capacity);
uint64_t bitw_quant_archive_numel(const bitw_quant_archive* archive, size_t index);
int bitw_quant_archive_block_size(const bitw_quant_archive* archive, size_t index);
float bitw_quant_archive_beta(const bitw_quant_archive* archive, size_t index);
int bitw_quant_archive_huffman(const bitw_quant_archive* archive, size_t index);

/* Re-encode int8 layers holding ternary values as indexed layers / undo. */
bitw_status bitw_quant_archive_pack(const bitw_quant_archive* archive, int block_size,
                                    int huffman, bitw_quant_archive** out);
bitw_status bitw_quant_archive_unpack(const bitw_quant_archive* archive,
                                      bitw_quant_archive** out);

/* ---- size accounting ---------------------------------------------------- */

typedef struct bitw_layer_size {
    uint64_t num_weights;
    uint64_t raw_float_bytes;
    uint64_t payload_bytes;
    uint64_t stored_bytes;
} bitw_layer_size;

bitw_status bitw_quant_archive_layer_size(const bitw_quant_archive* archive, size_t index,
                                          bitw_layer_size* out);
bitw_status bitw_quant_archive_totals(const bitw_quant_archive* archive, uint64_t* raw_bytes,
                                      uint64_t* stored_bytes, double* reduction_percent);

double bitw_packed_size_bytes(uint64_t num_weights, bitw_size_mode mode);
double bitw_reduction_percent(double raw_bytes, double stored_bytes);

/* ---- index histogram ----------------------------------------------------- */

/*
 * Aggregates index counts over ternary layers whose name matches the glob.
 * counts must hold at least 3^block_size entries (243 for the default block
 * size); *bins_out receives the bin count. Fails with BITW_ERR_NO_MATCH when
 * no ternary layer matches.
 */
bitw_status bitw_histogram(const bitw_quant_archive* archive, const char* name_glob,
                           uint64_t* counts, size_t capacity, size_t* bins_out);

/* ---- verification --------------------------------------------------------- */

/*
 * Re-quantizes the float source with each layer's stored kind and Huffman
 * flag and compares payload bytes. Returns BITW_ERR_MISMATCH with the first
 * differing layer name copied into mismatch_name.
 */
bitw_status bitw_verify(const bitw_quant_archive* archive, const bitw_float_archive* source,
                        int block_size, float epsilon, float beta_tolerance,
                        char* mismatch_name, size_t mismatch_capacity);

/* ---- ternary block codec --------------------------------------------------- */

/*
 * Packs ternary values (each -1, 0 or 1) into base-3 block indices. out must
 * hold ceil(count / block_size) bytes; *written_out receives that count.
 */
bitw_status bitw_encode_ternary(const int8_t* values, size_t count, int block_size,
                                uint8_t* out, size_t capacity, size_t* written_out);

/* Exact inverse; out must hold total_length values. */
bitw_status bitw_decode_ternary(const uint8_t* indices, size_t index_count,
                                uint64_t total_length, int block_size, int8_t* out,
                                size_t capacity);

/* ---- training experiment ---------------------------------------------------- */

typedef struct bitw_experiment_options {
    uint32_t seeds;
    uint64_t base_seed;
    uint32_t steps;
    uint32_t batch_size;
    float learning_rate;
    uint32_t train_samples;
    uint32_t eval_samples;
} bitw_experiment_options;

void bitw_experiment_options_init(bitw_experiment_options* options);

bitw_status bitw_run_experiment(const bitw_experiment_options* options,
                                bitw_experiment_report** out);
void bitw_experiment_report_free(bitw_experiment_report* report);

size_t bitw_experiment_report_count(const bitw_experiment_report* report);
uint64_t bitw_experiment_report_seed(const bitw_experiment_report* report, size_t index);
float bitw_experiment_report_float_loss(const bitw_experiment_report* report, size_t index);
float bitw_experiment_report_ptq_loss(const bitw_experiment_report* report, size_t index);
float bitw_experiment_report_qat_loss(const bitw_experiment_report* report, size_t index);
bitw_status bitw_experiment_report_write(const bitw_experiment_report* report,
                                         const char* path);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BITW_H */
