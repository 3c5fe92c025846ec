/* Exercises the shared library through its C header only. */
#include <math.h>
#include <stdio.h>
#include <stdlib.h>
#include <string.h>

#include "rplids/rplids.h"

static int failures = 0;

#define EXPECT(cond)                                                         \
    do {                                                                     \
        if (!(cond)) {                                                       \
            fprintf(stderr, "%s:%d: expected %s\n", __FILE__, __LINE__, #cond); \
            ++failures;                                                      \
        }                                                                    \
    } while (0)

/* Small deterministic generator so the test does not depend on rand(). */
static unsigned long long state = 12345;
static double uniform(void) {
    state = state * 6364136223846793005ULL + 1442695040888963407ULL;
    return (double)(state >> 11) / 9007199254740992.0;
}

static void row(double* x, double centre) {
    for (int j = 0; j < RPLIDS_FEATURES; ++j) x[j] = centre + 0.02 * uniform();
}

int main(void) {
    rplids_experiment* exp = NULL;
    rplids_ids* ids = NULL;
    rplids_verdict v;
    double x[RPLIDS_FEATURES];

    EXPECT(strlen(rplids_version()) > 0);
    EXPECT(rplids_attack_code("DA") == 3);
    EXPECT(rplids_attack_code("XX") == -1);
    EXPECT(rplids_attack_code(NULL) == -1);
    EXPECT(strcmp(rplids_attack_name(7), "WP") == 0);
    EXPECT(rplids_attack_name(8) == NULL);

    EXPECT(rplids_experiment_new(NULL) == RPLIDS_ERR_VALIDATION);
    EXPECT(strlen(rplids_last_error()) > 0);
    EXPECT(rplids_experiment_load(&exp, "/nonexistent/experiment.cfg") == RPLIDS_ERR_IO);
    EXPECT(exp == NULL);

    EXPECT(rplids_experiment_new(&exp) == RPLIDS_OK);
    EXPECT(rplids_experiment_validate(exp) == RPLIDS_OK);
    EXPECT(rplids_experiment_set(exp, "no_such_key", "1") == RPLIDS_ERR_VALIDATION);
    EXPECT(rplids_experiment_set(exp, "nu", "abc") == RPLIDS_ERR_VALIDATION);
    EXPECT(rplids_experiment_set(exp, "node_count", "17") == RPLIDS_OK);
    EXPECT(rplids_experiment_validate(exp) == RPLIDS_ERR_VALIDATION);
    EXPECT(strstr(rplids_last_error(), "node_count") != NULL);
    EXPECT(rplids_simulate(exp, 1, -1, "capi_trace.csv") == RPLIDS_ERR_VALIDATION);
    EXPECT(rplids_experiment_set(exp, "node_count", "16") == RPLIDS_OK);
    EXPECT(rplids_experiment_set(exp, "duration", "60") == RPLIDS_OK);
    EXPECT(rplids_simulate(exp, 1, 0, "capi_trace.csv") == RPLIDS_OK);
    EXPECT(rplids_simulate(exp, 1, 42, "capi_trace.csv") == RPLIDS_ERR_VALIDATION);
    remove("capi_trace.csv");

    EXPECT(rplids_experiment_set(exp, "estimators", "3") == RPLIDS_OK);
    EXPECT(rplids_experiment_set(exp, "neighbors", "3") == RPLIDS_OK);
    EXPECT(rplids_ids_new(exp, &ids) == RPLIDS_OK);
    row(x, 0.5);
    EXPECT(rplids_ids_process(ids, x, 1, 9, 0.0, RPLIDS_LABEL_NONE, &v) == RPLIDS_ERR_STATE);
    EXPECT(rplids_ids_process(ids, NULL, 1, 9, 0.0, RPLIDS_LABEL_NONE, &v) == RPLIDS_ERR_VALIDATION);

    {
        enum { NN = 300, NL = 200 };
        double* normal = malloc(sizeof(double) * NN * RPLIDS_FEATURES);
        double* labeled = malloc(sizeof(double) * NL * RPLIDS_FEATURES);
        int labels[NL];
        for (int i = 0; i < NN; ++i) row(normal + i * RPLIDS_FEATURES, 0.2);
        for (int i = 0; i < NL; ++i) {
            const int attack = i % 2;
            row(labeled + i * RPLIDS_FEATURES, attack ? 0.8 : 0.2);
            labels[i] = attack ? 3 : RPLIDS_LABEL_NORMAL;
        }
        labels[0] = RPLIDS_LABEL_NONE;
        EXPECT(rplids_ids_warmup(ids, normal, NULL, NN, labeled, labels, NULL, NL) == RPLIDS_ERR_VALIDATION);
        labels[0] = RPLIDS_LABEL_NORMAL;
        EXPECT(rplids_ids_warmup(ids, normal, NULL, NN, labeled, labels, NULL, NL) == RPLIDS_OK);
        free(normal);
        free(labeled);
    }

    row(x, 0.8);
    EXPECT(rplids_ids_process(ids, x, 4, 9, 1.0, 3, &v) == RPLIDS_OK);
    EXPECT(v.kind == RPLIDS_VERDICT_KNOWN);
    EXPECT(v.attack == 3);
    EXPECT(v.gate_value < 0.0);
    row(x, 0.2);
    EXPECT(rplids_ids_process(ids, x, 5, 9, 2.0, RPLIDS_LABEL_NONE, &v) == RPLIDS_OK);
    EXPECT(v.stage >= 1 && v.stage <= 3);
    x[3] = NAN;
    EXPECT(rplids_ids_process(ids, x, 5, 9, 3.0, RPLIDS_LABEL_NONE, &v) == RPLIDS_ERR_VALIDATION);
    EXPECT(rplids_ids_flush(ids) == RPLIDS_OK);

    rplids_ids_free(ids);
    rplids_experiment_free(exp);
    rplids_ids_free(NULL);
    rplids_experiment_free(NULL);

    if (failures) fprintf(stderr, "%d failure(s)\n", failures);
    else printf("C API: all checks passed\n");
    return failures ? 1 : 0;
}
