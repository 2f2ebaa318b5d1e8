/*
 * Copyright (C) 2026 The HalfV Toolkit Authors
 * SPDX-License-Identifier: Apache-2.0
 *
 * C interface to the redundancy-lifecycle toolkit. Objects are opaque
 * handles released with the matching *_free function. Every call returns a
 * halfv_status; on failure halfv_last_error() describes the cause (the
 * message is thread-local and valid until the next failing call).
 */
#ifndef HALFV_H
#define HALFV_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#  if defined(HALFV_BUILDING_LIBRARY)
#    define HALFV_API __declspec(dllexport)
#  else
#    define HALFV_API __declspec(dllimport)
#  endif
#else
#  define HALFV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum halfv_status {
    HALFV_OK = 0,
    HALFV_ERR_SHAPE = 1,
    HALFV_ERR_DOMAIN = 2,
    HALFV_ERR_VALIDATION = 3,
    HALFV_ERR_FORMAT = 4,
    HALFV_ERR_CORRUPT = 5,
    HALFV_ERR_IO = 6,
    HALFV_ERR_CONFIG = 7,
    HALFV_ERR_DETECTION = 8,
    HALFV_ERR_DEGENERATE = 9,
    HALFV_ERR_REFUSED = 10,
    HALFV_ERR_ARGUMENT = 11, /* null handle or pointer */
    HALFV_ERR_INTERNAL = 12
} halfv_status;

typedef struct halfv_trace halfv_trace;
typedef struct halfv_profile halfv_profile;

/* Report provenance written as comment lines at the top of every CSV. */
typedef struct halfv_manifest {
    const char* subcommand;
    uint64_t seed;
    const char* config_path; /* hashed into the header; NULL or "" for none */
} halfv_manifest;

HALFV_API const char* halfv_version(void);
HALFV_API const char* halfv_last_error(void);
HALFV_API const char* halfv_status_name(halfv_status status);
/* Process exit code for a status: 0 ok, 2 validation/config, 3 I/O. */
HALFV_API int halfv_status_exit_code(halfv_status status);

/* ---- traces (HVTD files) ---- */
HALFV_API halfv_status halfv_trace_read(const char* path, halfv_trace** out);
HALFV_API halfv_status halfv_trace_write(const halfv_trace* trace, const char* path);
HALFV_API void halfv_trace_free(halfv_trace* trace);
HALFV_API halfv_status halfv_trace_dims(const halfv_trace* trace, uint32_t* num_layers,
                                        uint32_t* num_tokens, uint32_t* dim,
                                        uint32_t* num_visual);

/* ---- profiles ---- */
HALFV_API halfv_status halfv_profile_load(const char* path, halfv_profile** out);
/* llava-1.5-7b, llava-1.5-13b, llava-next-7b, qwen2.5-vl-7b, vanilla */
HALFV_API halfv_status halfv_profile_preset(const char* name, halfv_profile** out);
HALFV_API void halfv_profile_free(halfv_profile* profile);

/* ---- entropy probe ---- */
enum {
    HALFV_GROUP_VISUAL = 1u,
    HALFV_GROUP_TEXT = 2u,
    HALFV_GROUP_ALL = 4u
};

/* CSV columns: layer, group, elbow_k, entropy. */
HALFV_API halfv_status halfv_probe(const halfv_trace* trace, unsigned groups,
                                   const char* out_path, const halfv_manifest* manifest);

/* ---- lifecycle ---- */
typedef struct halfv_stage_params {
    uint32_t window;
    double delta;
    double tau;
    int32_t l_ivr_override; /* < 0: none */
    int32_t l_ssr_override; /* < 0: none */
} halfv_stage_params;

HALFV_API void halfv_stage_params_default(halfv_stage_params* params);

/* CSV columns: layer, visual_entropy, elbow_k, stage. Onsets are returned
 * through stage2/stage3 (either may be NULL). */
HALFV_API halfv_status halfv_detect_stages(const halfv_trace* trace,
                                           const halfv_stage_params* params,
                                           const char* out_path, const halfv_manifest* manifest,
                                           uint32_t* stage2, uint32_t* stage3);

HALFV_API halfv_status halfv_marginal_utility(double delta_perf, double delta_cost,
                                              double epsilon, double* out_value);

/* ---- pruning ---- */
/* layer < 0 uses the profile's l_ivr; budget < 0 uses round(r_ivr * V).
 * CSV columns: token_index, role, score. */
HALFV_API halfv_status halfv_prune(const halfv_trace* trace, const halfv_profile* profile,
                                   int32_t layer, int32_t budget, const char* out_path,
                                   const halfv_manifest* manifest);

/* ---- FLOPs model ---- */
typedef struct halfv_model_dims {
    uint64_t text_tokens;
    uint64_t visual_tokens;
    uint64_t hidden;
    uint64_t ffn;
    uint64_t layers;
} halfv_model_dims;

typedef struct halfv_flops_budget {
    uint64_t l1, l2, l3;
    uint64_t v_prime, v_ssr;
    double f1, f2, f3, total;
} halfv_flops_budget;

HALFV_API halfv_status halfv_model_preset(const char* name, halfv_model_dims* out);
/* profile may be NULL for the vanilla schedule. */
HALFV_API halfv_status halfv_flops(const halfv_profile* profile, const halfv_model_dims* dims,
                                   halfv_flops_budget* out);
HALFV_API halfv_status halfv_flops_speedup(const halfv_flops_budget* vanilla,
                                           const halfv_flops_budget* accelerated,
                                           double* out);
/* One row per schedule (vanilla, profile). */
HALFV_API halfv_status halfv_flops_report(const halfv_profile* profile,
                                          const halfv_model_dims* dims, const char* out_path,
                                          const halfv_manifest* manifest);
/* Grid over l_ivr, r_ivr, l_ssr and (TokenSparsity) r_ssr around a base
 * profile. Grids are arrays; a NULL grid uses the built-in default. */
typedef struct halfv_sweep_grid {
    const double* r_ivr;
    size_t r_ivr_count;
    const double* r_ssr;
    size_t r_ssr_count;
} halfv_sweep_grid;

HALFV_API halfv_status halfv_flops_sweep(const halfv_profile* base, const halfv_model_dims* dims,
                                         const halfv_sweep_grid* grid, const char* out_path,
                                         const halfv_manifest* manifest);

/* ---- end-to-end simulation ---- */
typedef struct halfv_simulation_summary {
    double kl_vanilla_halfv;
    uint64_t counted_vanilla;
    uint64_t counted_halfv;
    double analytic_vanilla;
    double analytic_halfv;
    double analytic_speedup;
    double counted_speedup;
    uint64_t v_prime;
    uint64_t v_ssr;
} halfv_simulation_summary;

/* has_seed != 0 replaces the config's seeds with `seed`. summary may be NULL. */
HALFV_API halfv_status halfv_simulate(const char* config_path, const char* out_dir, int has_seed,
                                      uint64_t seed, int dump_traces,
                                      halfv_simulation_summary* summary);

#ifdef __cplusplus
}
#endif

#endif /* HALFV_H */
