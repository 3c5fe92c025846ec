#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rplids/features.hpp"
#include "rplids/metrics.hpp"
#include "rplids/pipeline.hpp"
#include "rplids/rplsim.hpp"

namespace rplids {

struct ExperimentSpec {
    SimConfig sim;  // `attack` is overridden per scenario
    std::vector<std::uint64_t> seeds{1};
    std::vector<AttackKind> attacks{kAllAttackKinds.begin(), kAllAttackKinds.end()};
    HybridConfig ids;
    FeatureConfig features;
    double pretrain_fraction = 0.3;  // leading share of each attack run used for pre-training
    std::size_t pool_cap = 8000;     // max pre-training instances handed to warmup
};

// Throws ValidationError.
void validate(const ExperimentSpec& spec);

// Experiment file: the simulator keys plus seeds, attacks (comma lists), nu,
// gamma, estimators, neighbors, knn_window, drift_detector, trees, depth,
// forest_window, quantile, label_delay, pretrain_fraction, pool_cap, horizon.
void apply_experiment_entry(ExperimentSpec& spec, const std::string& key, const std::string& value);
ExperimentSpec read_experiment_spec(const std::string& path);

// Everything one seed needs: the attack-free run (gate training data) and,
// per attack, the pre-training head and evaluation tail of its run.
struct SeedData {
    std::uint64_t seed = 0;
    std::vector<Instance> normal;
    std::map<AttackKind, std::vector<Instance>> pretrain;
    std::map<AttackKind, std::vector<Instance>> eval;
};

SeedData prepare_seed(const ExperimentSpec& spec, std::uint64_t seed);

// Pre-training instances of the `known` attack runs, thinned by a fixed stride
// to at most `cap`.
std::vector<Instance> pretraining_pool(const SeedData& data, std::span<const AttackKind> known, std::size_t cap);

struct StreamResult {
    std::vector<VerdictRecord> verdicts;
    StageCounters counters;
    std::vector<std::string> events;  // "step:event" for ensemble drift/replacement events
};

// Warms a fresh pipeline and runs it over `eval` in order.
StreamResult run_stream(const HybridConfig& cfg, std::span<const Instance> normal, std::span<const Instance> pool,
                        std::span<const Instance> eval);

// Binary counts (alarm = attack) over records that carry a truth label.
ConfusionCounts tally(std::span<const VerdictRecord> rows);

// Per-step cumulative and moving metrics for a verdict log, in the same
// column layout as the prequential log. Predictions are Normal, the attack
// kind, or "Unknown".
void write_step_metrics(const std::string& path, std::span<const VerdictRecord> rows, std::size_t window = 200);

struct SummaryRow {
    std::string scenario;         // attack kind name
    std::optional<std::uint64_t> seed;  // empty = median over seeds
    ConfusionCounts counts;
    Metrics m;
};

// Adds one median row per scenario after the per-seed rows.
std::vector<SummaryRow> with_medians(std::vector<SummaryRow> rows);
std::string format_attack_summary(std::span<const SummaryRow> rows);
std::string format_unknown_summary(std::span<const SummaryRow> rows);

std::string verdict_log_name(std::string_view prefix, AttackKind kind, std::uint64_t seed);

// Commands. Each writes into `out_dir` (created if missing) and returns the
// summary rows it wrote.
void cmd_simulate(const SimConfig& cfg, const std::string& out_path);
std::vector<SummaryRow> cmd_run(const ExperimentSpec& spec, const std::string& out_dir);
std::vector<SummaryRow> cmd_unknown_attack(const ExperimentSpec& spec, AttackKind held_out, const std::string& out_dir);

struct DriftComparisonRow {
    std::string detector;
    std::uint64_t instances = 0;
    double accuracy = 0.0;
    double kappa = 0.0;
    std::uint64_t replacements = 0;
    double seconds = 0.0;  // wall time; written to timing.csv only
};
// Runs the ensemble alone with each drift detector on one labeled stream
// (the first seed's attack runs back to back).
std::vector<DriftComparisonRow> cmd_compare_drift(const ExperimentSpec& spec, const std::string& out_dir,
                                                  std::size_t max_instances = 20000);

// Rebuilds a summary table from verdict logs written by cmd_run or
// cmd_unknown_attack.
std::string summarize_verdict_logs(const std::string& out_dir, bool unknown_attack);

}  // namespace rplids
