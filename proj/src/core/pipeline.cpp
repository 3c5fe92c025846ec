#include "rplids/pipeline.hpp"

#include <algorithm>
#include <set>

#include "rplids/csv.hpp"
#include "rplids/error.hpp"

namespace rplids {

std::string_view to_string(VerdictKind k) {
    switch (k) {
        case VerdictKind::Normal: return "Normal";
        case VerdictKind::KnownAttack: return "KnownAttack";
        case VerdictKind::UnknownAnomaly: return "UnknownAnomaly";
    }
    return "?";
}

std::optional<VerdictKind> parse_verdict_kind(std::string_view s) {
    if (s == "Normal") return VerdictKind::Normal;
    if (s == "KnownAttack") return VerdictKind::KnownAttack;
    if (s == "UnknownAnomaly") return VerdictKind::UnknownAnomaly;
    return std::nullopt;
}

// ---------------------------------------------------------------------------

AnidsAgent::AnidsAgent(OcsvmModel gate, std::set<NodeId> placement)
    : gate_(std::move(gate)), placement_(std::move(placement)) {
    if (!gate_.fitted()) throw ValidationError("agent gate is not fitted");
}

std::optional<Instance> AnidsAgent::filter(const Instance& x) const {
    if (!placement_.count(x.sender)) throw ValidationError("sender " + std::to_string(x.sender) + " is not observed by this agent");
    if (gate_.predict(x.features) == 1) return std::nullopt;
    return x;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<double> subsample(const std::vector<const Instance*>& src, std::size_t cap) {
    const std::size_t n = src.size();
    const std::size_t take = std::min(n, cap);
    std::vector<double> rows;
    rows.reserve(take * kFeatureCount);
    for (std::size_t i = 0; i < take; ++i) {
        const auto& f = src[n > cap ? i * n / cap : i]->features;
        rows.insert(rows.end(), f.begin(), f.end());
    }
    return rows;
}

}  // namespace

HybridIds::HybridIds(HybridConfig cfg)
    : cfg_(std::move(cfg)),
      ensemble_(cfg_.ensemble),
      forest_(cfg_.forest),
      threshold_(cfg_.quantile, cfg_.reservoir, cfg_.min_scores) {
    if (cfg_.forest.dims != kFeatureCount) throw ValidationError("forest dimensionality must match the feature count");
    if (cfg_.gate_subsample < 2) throw ValidationError("gate subsample must be at least 2");
}

const OcsvmModel& HybridIds::gate_for(NodeId placement) const {
    auto it = gates_.find(placement);
    return it == gates_.end() ? shared_gate_ : it->second;
}

std::vector<double> HybridIds::forest_input(const Instance& x) const {
    std::vector<double> z(kFeatureCount);
    shared_gate_.scaler().transform(x.features, z);
    return z;
}

void HybridIds::warmup(std::span<const Instance> normal_data, std::span<const Instance> labeled_data) {
    if (normal_data.empty()) throw ValidationError("warmup needs normal training data");
    std::set<int> classes;
    for (const auto& x : labeled_data)
        if (x.label) classes.insert(x.label->index());
    if (classes.size() < 2) throw ValidationError("warmup labeled data needs at least two classes");
    for (const auto& x : normal_data) validate(x);
    for (const auto& x : labeled_data) validate(x);

    std::vector<const Instance*> all;
    std::map<NodeId, std::vector<const Instance*>> by_placement;
    for (const auto& x : normal_data) {
        all.push_back(&x);
        by_placement[x.placement].push_back(&x);
    }
    shared_gate_ = OcsvmModel::fit(subsample(all, cfg_.gate_subsample), kFeatureCount, cfg_.gate);
    gates_.clear();
    for (const auto& [p, xs] : by_placement) {
        if (xs.size() < cfg_.min_gate_points) continue;
        try {
            gates_.emplace(p, OcsvmModel::fit(subsample(xs, cfg_.gate_subsample), kFeatureCount, cfg_.gate));
        } catch (const DegenerateDataError&) {
            // Constant traffic at this placement; the shared gate covers it.
        }
    }

    ensemble_ = OzaEnsemble(cfg_.ensemble);
    forest_ = HsForest(cfg_.forest);
    threshold_ = ScoreThreshold(cfg_.quantile, cfg_.reservoir, cfg_.min_scores);
    counters_ = {};
    pending_.clear();
    step_ = 0;

    std::vector<const Instance*> flagged;
    for (const auto& x : labeled_data)
        if (x.label && gate_for(x.placement).predict(x.features) == -1) flagged.push_back(&x);
    if (flagged.empty())
        for (const auto& x : labeled_data)
            if (x.label) flagged.push_back(&x);
    for (const Instance* x : flagged) ensemble_.learn(x->features, *x->label);
    ensemble_.drain_events();

    // Forest priming: gate-flagged normals first, then the rest.
    std::vector<const Instance*> pool, rest;
    for (const auto& x : normal_data) (gate_for(x.placement).predict(x.features) == -1 ? pool : rest).push_back(&x);
    const std::size_t w = forest_.window();
    for (std::size_t i = 0; pool.size() < w + cfg_.reservoir && i < rest.size(); ++i) pool.push_back(rest[i]);
    for (std::size_t i = 0; i < w; ++i) forest_.update_mass(forest_input(*pool[i % pool.size()]));
    if (pool.size() > w) {
        for (std::size_t i = w; i < pool.size() && i < w + cfg_.reservoir; ++i) {
            const auto z = forest_input(*pool[i]);
            threshold_.push(forest_.score(z));
            forest_.update_mass(z);
        }
    }
    for (std::size_t i = 0; !threshold_.ready(); ++i) threshold_.push(forest_.score(forest_input(*pool[i % pool.size()])));
    warm_ = true;
}

HybridVerdict HybridIds::process(const Instance& x) {
    if (!warm_) throw StateError("pipeline has not been warmed up");
    validate(x);
    HybridVerdict v;
    ++counters_.seen;

    v.gate_value = gate_for(x.placement).decision_value(x.features);
    if (v.gate_value >= 0.0) {
        v.kind = VerdictKind::Normal;
    } else {
        ++counters_.gate_flagged;
        v.stage = 2;
        v.votes = ensemble_.votes(x.features);
        const Label y = tally_votes(v.votes);
        if (x.label) pending_.push_back(Pending{step_ + cfg_.label_delay, x.features, *x.label});
        if (y.is_attack()) {
            ++counters_.ensemble_attack;
            v.kind = VerdictKind::KnownAttack;
            v.attack = y.kind();
        } else {
            v.stage = 3;
            ++counters_.forest_scored;
            const auto z = forest_input(x);
            const double s = forest_.score(z);
            forest_.update_mass(z);
            v.a_score = s;
            v.threshold = threshold_.threshold();
            const bool anomalous = s < *v.threshold;
            threshold_.push(s);
            if (anomalous) {
                ++counters_.forest_flagged;
                v.kind = VerdictKind::UnknownAnomaly;
            }
        }
    }
    deliver_due();
    ++step_;
    return v;
}

void HybridIds::deliver_due() {
    while (!pending_.empty() && pending_.front().due <= step_) {
        ensemble_.learn(pending_.front().x, pending_.front().y);
        ++counters_.learned;
        pending_.pop_front();
    }
}

void HybridIds::flush() {
    while (!pending_.empty()) {
        ensemble_.learn(pending_.front().x, pending_.front().y);
        ++counters_.learned;
        pending_.pop_front();
    }
}

// ---------------------------------------------------------------------------

VerdictRecord make_record(std::uint64_t step, const Instance& x, const HybridVerdict& v) {
    VerdictRecord r;
    r.step = step;
    r.timestamp = x.timestamp;
    r.sender = x.sender;
    r.verdict = v.kind;
    r.attack = v.attack;
    r.a_score = v.a_score;
    r.gate_value = v.gate_value;
    r.truth = x.label;
    return r;
}

void write_verdict_log(const std::string& path, const std::vector<VerdictRecord>& rows) {
    auto out = csv::open_output(path);
    out << "step,timestamp,sender,verdict,attack_kind,a_score,gate_decision_value,truth\n";
    for (const auto& r : rows) {
        out << r.step << ',' << csv::format_double(r.timestamp) << ',' << r.sender << ',' << to_string(r.verdict) << ','
            << (r.attack ? std::string(to_string(*r.attack)) : std::string()) << ','
            << (r.a_score ? csv::format_double(*r.a_score) : std::string()) << ',' << csv::format_double(r.gate_value)
            << ',' << (r.truth ? r.truth->name() : std::string()) << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<VerdictRecord> read_verdict_log(const std::string& path) {
    auto in = csv::open_input(path);
    std::string line;
    std::size_t ln = 1;
    if (!std::getline(in, line) || line != "step,timestamp,sender,verdict,attack_kind,a_score,gate_decision_value,truth")
        throw ParseError("unexpected verdict log header", ln);
    std::vector<VerdictRecord> rows;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        auto f = csv::split(line);
        if (f.size() != 8) throw ParseError("expected 8 fields", ln);
        VerdictRecord r;
        r.step = static_cast<std::uint64_t>(csv::parse_int(f[0], ln));
        r.timestamp = csv::parse_double(f[1], ln);
        r.sender = static_cast<NodeId>(csv::parse_int(f[2], ln));
        auto vk = parse_verdict_kind(f[3]);
        if (!vk) throw ParseError("unknown verdict '" + std::string(f[3]) + "'", ln);
        r.verdict = *vk;
        if (!f[4].empty()) {
            auto k = parse_attack_kind(f[4]);
            if (!k) throw ParseError("unknown attack kind", ln);
            r.attack = *k;
        }
        if (!f[5].empty()) r.a_score = csv::parse_double(f[5], ln);
        r.gate_value = csv::parse_double(f[6], ln);
        if (!f[7].empty()) {
            auto t = Label::parse(f[7]);
            if (!t) throw ParseError("unknown label", ln);
            r.truth = *t;
        }
        rows.push_back(r);
    }
    return rows;
}

}  // namespace rplids
