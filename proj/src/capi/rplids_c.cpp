#include "rplids/rplids.h"

#include <new>
#include <string>

#include "rplids/error.hpp"
#include "rplids/experiment.hpp"
#include "rplids/pipeline.hpp"

struct rplids_experiment {
    rplids::ExperimentSpec spec;
};

struct rplids_ids {
    rplids::HybridIds ids;
};

namespace {

thread_local std::string g_error;

rplids_status fail(rplids_status s, const std::string& msg) {
    g_error = msg;
    return s;
}

rplids_status status_of(rplids::ErrorCode c) {
    switch (c) {
        case rplids::ErrorCode::Validation: return RPLIDS_ERR_VALIDATION;
        case rplids::ErrorCode::Io: return RPLIDS_ERR_IO;
        case rplids::ErrorCode::Parse: return RPLIDS_ERR_PARSE;
        case rplids::ErrorCode::State: return RPLIDS_ERR_STATE;
        case rplids::ErrorCode::DegenerateData: return RPLIDS_ERR_DEGENERATE;
        case rplids::ErrorCode::Runtime: return RPLIDS_ERR_RUNTIME;
    }
    return RPLIDS_ERR_RUNTIME;
}

// Runs f, translating exceptions into status codes.
template <class F>
rplids_status guard(F&& f) {
    try {
        f();
        g_error.clear();
        return RPLIDS_OK;
    } catch (const rplids::Error& e) {
        return fail(status_of(e.code()), e.what());
    } catch (const std::bad_alloc&) {
        return fail(RPLIDS_ERR_RUNTIME, "out of memory");
    } catch (const std::exception& e) {
        return fail(RPLIDS_ERR_RUNTIME, e.what());
    } catch (...) {
        return fail(RPLIDS_ERR_RUNTIME, "unknown error");
    }
}

rplids::Instance make_instance(const double* row, uint32_t placement) {
    rplids::Instance x;
    for (std::size_t j = 0; j < rplids::kFeatureCount; ++j) x.features[j] = row[j];
    x.placement = placement;
    return x;
}

rplids::Label label_of(int code) {
    if (code == RPLIDS_LABEL_NORMAL) return rplids::Label::normal();
    return rplids::Label::attack(rplids::attack_kind_from_code(code));
}

}  // namespace

extern "C" {

const char* rplids_version(void) { return "1.0.0"; }

const char* rplids_last_error(void) { return g_error.c_str(); }

int rplids_attack_code(const char* name) {
    if (!name) return -1;
    const auto k = rplids::parse_attack_kind(name);
    return k ? static_cast<int>(*k) : -1;
}

const char* rplids_attack_name(int code) {
    static const char* names[] = {"SH", "BH", "GH", "DA", "IR", "WH", "DS", "WP"};
    if (code < 0 || code >= rplids::kAttackKindCount) return nullptr;
    return names[code];
}

rplids_status rplids_experiment_new(rplids_experiment** out) {
    if (!out) return fail(RPLIDS_ERR_VALIDATION, "null output pointer");
    *out = nullptr;
    return guard([&] { *out = new rplids_experiment{}; });
}

rplids_status rplids_experiment_load(rplids_experiment** out, const char* path) {
    if (!out || !path) return fail(RPLIDS_ERR_VALIDATION, "null argument");
    *out = nullptr;
    return guard([&] { *out = new rplids_experiment{rplids::read_experiment_spec(path)}; });
}

void rplids_experiment_free(rplids_experiment* exp) { delete exp; }

rplids_status rplids_experiment_set(rplids_experiment* exp, const char* key, const char* value) {
    if (!exp || !key || !value) return fail(RPLIDS_ERR_VALIDATION, "null argument");
    return guard([&] { rplids::apply_experiment_entry(exp->spec, key, value); });
}

rplids_status rplids_experiment_validate(const rplids_experiment* exp) {
    if (!exp) return fail(RPLIDS_ERR_VALIDATION, "null experiment");
    return guard([&] { rplids::validate(exp->spec); });
}

rplids_status rplids_simulate(const rplids_experiment* exp, uint64_t seed, int attack, const char* out_path) {
    if (!exp || !out_path) return fail(RPLIDS_ERR_VALIDATION, "null argument");
    return guard([&] {
        rplids::SimConfig cfg = exp->spec.sim;
        cfg.seed = seed;
        if (attack < 0) cfg.attack.reset();
        else cfg.attack = rplids::attack_kind_from_code(attack);
        rplids::cmd_simulate(cfg, out_path);
    });
}

rplids_status rplids_run(const rplids_experiment* exp, const char* out_dir) {
    if (!exp || !out_dir) return fail(RPLIDS_ERR_VALIDATION, "null argument");
    return guard([&] { rplids::cmd_run(exp->spec, out_dir); });
}

rplids_status rplids_unknown_attack(const rplids_experiment* exp, int held_out, const char* out_dir) {
    if (!exp || !out_dir) return fail(RPLIDS_ERR_VALIDATION, "null argument");
    return guard([&] { rplids::cmd_unknown_attack(exp->spec, rplids::attack_kind_from_code(held_out), out_dir); });
}

rplids_status rplids_compare_drift(const rplids_experiment* exp, const char* out_dir) {
    if (!exp || !out_dir) return fail(RPLIDS_ERR_VALIDATION, "null argument");
    return guard([&] { rplids::cmd_compare_drift(exp->spec, out_dir); });
}

rplids_status rplids_ids_new(const rplids_experiment* exp, rplids_ids** out) {
    if (!exp || !out) return fail(RPLIDS_ERR_VALIDATION, "null argument");
    *out = nullptr;
    return guard([&] {
        rplids::validate(exp->spec);
        *out = new rplids_ids{rplids::HybridIds(exp->spec.ids)};
    });
}

void rplids_ids_free(rplids_ids* ids) { delete ids; }

rplids_status rplids_ids_warmup(rplids_ids* ids, const double* normal, const uint32_t* normal_placements,
                                size_t n_normal, const double* labeled, const int* labels,
                                const uint32_t* labeled_placements, size_t n_labeled) {
    if (!ids) return fail(RPLIDS_ERR_VALIDATION, "null detector");
    if ((n_normal && !normal) || (n_labeled && (!labeled || !labels)))
        return fail(RPLIDS_ERR_VALIDATION, "null data with nonzero count");
    return guard([&] {
        std::vector<rplids::Instance> norm, lab;
        norm.reserve(n_normal);
        lab.reserve(n_labeled);
        for (size_t i = 0; i < n_normal; ++i) {
            norm.push_back(make_instance(normal + i * RPLIDS_FEATURES,
                                         normal_placements ? normal_placements[i] : rplids::kNoNode));
            rplids::validate(norm.back());
        }
        for (size_t i = 0; i < n_labeled; ++i) {
            if (labels[i] == RPLIDS_LABEL_NONE) throw rplids::ValidationError("warm-up instance without a label");
            lab.push_back(make_instance(labeled + i * RPLIDS_FEATURES,
                                        labeled_placements ? labeled_placements[i] : rplids::kNoNode));
            lab.back().label = label_of(labels[i]);
            rplids::validate(lab.back());
        }
        ids->ids.warmup(norm, lab);
    });
}

rplids_status rplids_ids_process(rplids_ids* ids, const double* features, uint32_t sender, uint32_t placement,
                                 double timestamp, int label, rplids_verdict* out) {
    if (!ids || !features || !out) return fail(RPLIDS_ERR_VALIDATION, "null argument");
    return guard([&] {
        auto x = make_instance(features, placement);
        x.sender = sender;
        x.timestamp = timestamp;
        if (label != RPLIDS_LABEL_NONE) x.label = label_of(label);
        rplids::validate(x);
        const auto v = ids->ids.process(x);
        out->kind = static_cast<rplids_verdict_kind>(v.kind);
        out->attack = v.attack ? static_cast<int>(*v.attack) : -1;
        out->stage = v.stage;
        out->gate_value = v.gate_value;
        out->has_score = v.a_score.has_value();
        out->a_score = v.a_score.value_or(0.0);
        out->threshold = v.threshold.value_or(0.0);
    });
}

rplids_status rplids_ids_flush(rplids_ids* ids) {
    if (!ids) return fail(RPLIDS_ERR_VALIDATION, "null detector");
    return guard([&] { ids->ids.flush(); });
}

}  // extern "C"
