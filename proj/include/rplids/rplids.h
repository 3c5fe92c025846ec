/* C interface to the rplids library. All handles are opaque; every call
 * returns an rplids_status and, on failure, leaves a message retrievable with
 * rplids_last_error() on the calling thread. */
#ifndef RPLIDS_H
#define RPLIDS_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RPLIDS_API __declspec(dllexport)
#else
#define RPLIDS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum rplids_status {
    RPLIDS_OK = 0,
    RPLIDS_ERR_VALIDATION = 1, /* bad configuration or argument, including NULL handles */
    RPLIDS_ERR_IO = 2,
    RPLIDS_ERR_PARSE = 3,
    RPLIDS_ERR_STATE = 4,      /* wrong lifecycle state, e.g. process() before warmup() */
    RPLIDS_ERR_DEGENERATE = 5,
    RPLIDS_ERR_RUNTIME = 6
} rplids_status;

#define RPLIDS_FEATURES 30

/* Labels: -1 = Normal, 0..7 = attack code (SH, BH, GH, DA, IR, WH, DS, WP). */
#define RPLIDS_LABEL_NORMAL (-1)
#define RPLIDS_LABEL_NONE (-2) /* unlabeled instance */

typedef enum rplids_verdict_kind {
    RPLIDS_VERDICT_NORMAL = 0,
    RPLIDS_VERDICT_KNOWN = 1,
    RPLIDS_VERDICT_UNKNOWN = 2
} rplids_verdict_kind;

typedef struct rplids_verdict {
    rplids_verdict_kind kind;
    int attack;         /* attack code when kind is KNOWN, else -1 */
    int stage;          /* deepest stage reached, 1..3 */
    double gate_value;  /* gate decision value (negative = outlier) */
    int has_score;
    double a_score;     /* forest anomaly score when has_score */
    double threshold;   /* forest threshold when has_score */
} rplids_verdict;

typedef struct rplids_experiment rplids_experiment;
typedef struct rplids_ids rplids_ids;

RPLIDS_API const char* rplids_version(void);
RPLIDS_API const char* rplids_last_error(void);

/* Attack names <-> codes. Returns -1 for an unknown name. */
RPLIDS_API int rplids_attack_code(const char* name);
RPLIDS_API const char* rplids_attack_name(int code);

/* Experiment description: simulator, detector stack, seeds, attacks. */
RPLIDS_API rplids_status rplids_experiment_new(rplids_experiment** out);
RPLIDS_API rplids_status rplids_experiment_load(rplids_experiment** out, const char* path);
RPLIDS_API void rplids_experiment_free(rplids_experiment* exp);
/* Same keys as the experiment file, e.g. ("nu", "0.2") or ("seeds", "1,2,3"). */
RPLIDS_API rplids_status rplids_experiment_set(rplids_experiment* exp, const char* key, const char* value);
RPLIDS_API rplids_status rplids_experiment_validate(const rplids_experiment* exp);

/* Commands. attack < 0 simulates the attack-free network. */
RPLIDS_API rplids_status rplids_simulate(const rplids_experiment* exp, uint64_t seed, int attack, const char* out_path);
RPLIDS_API rplids_status rplids_run(const rplids_experiment* exp, const char* out_dir);
RPLIDS_API rplids_status rplids_unknown_attack(const rplids_experiment* exp, int held_out, const char* out_dir);
RPLIDS_API rplids_status rplids_compare_drift(const rplids_experiment* exp, const char* out_dir);

/* Streaming detector built from the experiment's detector stack settings. */
RPLIDS_API rplids_status rplids_ids_new(const rplids_experiment* exp, rplids_ids** out);
RPLIDS_API void rplids_ids_free(rplids_ids* ids);
/* Row-major n x RPLIDS_FEATURES matrices. placements may be NULL (all from
 * one unnamed placement). labels uses the codes above; RPLIDS_LABEL_NONE is
 * rejected in the labeled set. */
RPLIDS_API rplids_status rplids_ids_warmup(rplids_ids* ids, const double* normal, const uint32_t* normal_placements,
                                           size_t n_normal, const double* labeled, const int* labels,
                                           const uint32_t* labeled_placements, size_t n_labeled);
RPLIDS_API rplids_status rplids_ids_process(rplids_ids* ids, const double* features, uint32_t sender,
                                            uint32_t placement, double timestamp, int label, rplids_verdict* out);
RPLIDS_API rplids_status rplids_ids_flush(rplids_ids* ids);

#ifdef __cplusplus
}
#endif

#endif
