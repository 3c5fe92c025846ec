#pragma once

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "rplids/ensemble.hpp"
#include "rplids/hstrees.hpp"
#include "rplids/ocsvm.hpp"
#include "rplids/types.hpp"

namespace rplids {

enum class VerdictKind { Normal, KnownAttack, UnknownAnomaly };
std::string_view to_string(VerdictKind k);
std::optional<VerdictKind> parse_verdict_kind(std::string_view s);

struct HybridVerdict {
    VerdictKind kind = VerdictKind::Normal;
    std::optional<AttackKind> attack;           // KnownAttack only
    std::vector<std::optional<Label>> votes;    // set once the ensemble was consulted
    std::optional<double> a_score;              // set once the forest was consulted
    std::optional<double> threshold;            // forest threshold at decision time
    double gate_value = 0.0;                    // OCSVM decision value
    int stage = 1;                              // deepest stage reached (1..3)

    bool is_alarm() const { return kind != VerdictKind::Normal; }
};

struct HybridConfig {
    OcsvmTrainConfig gate{};
    EnsembleConfig ensemble{};
    HsConfig forest{};
    double quantile = 0.09;
    std::size_t reservoir = 500;
    std::size_t min_scores = 50;
    std::size_t label_delay = 0;        // in processed instances
    std::size_t gate_subsample = 2000;  // max training points per gate
    std::size_t min_gate_points = 50;   // placements with fewer use the shared gate
};

// Instrumented per-stage counters.
struct StageCounters {
    std::uint64_t seen = 0;
    std::uint64_t gate_flagged = 0;
    std::uint64_t ensemble_attack = 0;
    std::uint64_t forest_scored = 0;
    std::uint64_t forest_flagged = 0;
    std::uint64_t learned = 0;
};

// Distributed anomaly agent: a local gate over the traffic of the nodes it
// observes. Only outliers are forwarded.
class AnidsAgent {
public:
    AnidsAgent(OcsvmModel gate, std::set<NodeId> placement);

    // Throws ValidationError when the sender is outside the placement.
    std::optional<Instance> filter(const Instance& x) const;
    const std::set<NodeId>& placement() const { return placement_; }
    const OcsvmModel& gate() const { return gate_; }

private:
    OcsvmModel gate_;
    std::set<NodeId> placement_;
};

class HybridIds {
public:
    explicit HybridIds(HybridConfig cfg = {});

    // Fits one gate per placement seen in normal_data (plus a shared gate),
    // trains the ensemble on labeled_data in one pass and primes the forest.
    // Throws ValidationError when normal_data is empty or labeled_data has
    // fewer than two classes.
    void warmup(std::span<const Instance> normal_data, std::span<const Instance> labeled_data);

    // Algorithm 1 for one instance. A present x.label is queued as the truth
    // that arrives label_delay instances later. Throws StateError when cold.
    HybridVerdict process(const Instance& x);
    // Delivers every queued label.
    void flush();

    bool warm() const { return warm_; }
    const StageCounters& counters() const { return counters_; }
    const OzaEnsemble& ensemble() const { return ensemble_; }
    const HsForest& forest() const { return forest_; }
    const ScoreThreshold& threshold() const { return threshold_; }
    const OcsvmModel& gate_for(NodeId placement) const;
    const OcsvmModel& shared_gate() const { return shared_gate_; }
    std::size_t gate_count() const { return gates_.size(); }
    const HybridConfig& config() const { return cfg_; }
    std::vector<std::string> drain_events() { return ensemble_.drain_events(); }

private:
    std::vector<double> forest_input(const Instance& x) const;
    void deliver_due();

    HybridConfig cfg_;
    bool warm_ = false;
    OcsvmModel shared_gate_;
    std::map<NodeId, OcsvmModel> gates_;
    OzaEnsemble ensemble_;
    HsForest forest_;
    ScoreThreshold threshold_;
    StageCounters counters_;
    std::uint64_t step_ = 0;
    struct Pending {
        std::uint64_t due;
        FeatureVector x;
        Label y;
    };
    std::deque<Pending> pending_;
};

// Verdict log row. `truth` is carried so summaries can be rebuilt from the
// log alone.
struct VerdictRecord {
    std::uint64_t step = 0;
    double timestamp = 0.0;
    NodeId sender = kNoNode;
    VerdictKind verdict = VerdictKind::Normal;
    std::optional<AttackKind> attack;
    std::optional<double> a_score;
    double gate_value = 0.0;
    std::optional<Label> truth;
};

VerdictRecord make_record(std::uint64_t step, const Instance& x, const HybridVerdict& v);
void write_verdict_log(const std::string& path, const std::vector<VerdictRecord>& rows);
std::vector<VerdictRecord> read_verdict_log(const std::string& path);

}  // namespace rplids
