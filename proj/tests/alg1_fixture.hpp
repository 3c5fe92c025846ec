#pragma once

// Hand-built 20-instance stream for walking Algorithm 1 branch by branch.
//
// Training: 400 normals around 0.5 in every dimension (sd 0.03), 150 DA
// points around 0.1. Stream positions:
//   centre points (exactly 0.5)        -> gate inlier        -> Normal
//   DA points (0.1)                    -> gate outlier, ensemble DA -> KnownAttack(DA)
//   gate-flagged training normals      -> ensemble Normal, forest has mass there -> Normal
//   one far point (0.9 everywhere)     -> ensemble Normal (closer to the normals), forest empty -> UnknownAnomaly

#include <algorithm>
#include <random>
#include <vector>

#include "rplids/pipeline.hpp"

namespace alg1 {

using rplids::Instance;
using rplids::Label;
using rplids::VerdictKind;

constexpr rplids::NodeId kPlacement = 100;

inline Instance point(double centre, double sd, std::mt19937_64& rng, Label y) {
    std::normal_distribution<double> g(0.0, sd);
    Instance x;
    for (auto& f : x.features) f = centre + (sd > 0 ? g(rng) : 0.0);
    x.label = y;
    x.sender = 1;
    x.placement = kPlacement;
    return x;
}

struct Fixture {
    std::vector<Instance> normal;
    std::vector<Instance> labeled;
    std::vector<Instance> stream;
    std::vector<VerdictKind> expected;
    std::vector<int> expected_stage;
};

inline rplids::HybridConfig config() {
    rplids::HybridConfig cfg;
    cfg.gate.nu = 0.2;
    cfg.gate.gamma = 0.9;
    return cfg;
}

// The three gate-rejected training normals the primed forest scores highest:
// outliers to the gate, ordinary to the forest.
inline std::vector<Instance> tail_normals(const Fixture& f, const rplids::HybridIds& ids) {
    std::vector<std::pair<double, std::size_t>> by_score;
    std::vector<double> z(rplids::kFeatureCount);
    for (std::size_t i = 0; i < f.normal.size(); ++i) {
        if (ids.gate_for(kPlacement).predict(f.normal[i].features) != -1) continue;
        ids.shared_gate().scaler().transform(f.normal[i].features, z);
        by_score.emplace_back(-ids.forest().score(z), i);
    }
    std::sort(by_score.begin(), by_score.end());
    std::vector<Instance> out;
    for (std::size_t i = 0; i < 3 && i < by_score.size(); ++i) out.push_back(f.normal[by_score[i].second]);
    return out;
}

inline Fixture training() {
    Fixture f;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 400; ++i) f.normal.push_back(point(0.5, 0.03, rng, Label::normal()));
    for (int i = 0; i < 150; ++i) f.labeled.push_back(point(0.1, 0.03, rng, Label::attack(rplids::AttackKind::DA)));
    f.labeled.insert(f.labeled.end(), f.normal.begin(), f.normal.end());
    return f;
}

// Fills stream/expected from a freshly warmed pipeline.
inline void build_stream(Fixture& f, const rplids::HybridIds& ids) {
    std::mt19937_64 rng(12);
    const auto centre = [&] { return point(0.5, 0.0, rng, Label::normal()); };
    const auto da = [&] { return point(0.1, 0.01, rng, Label::attack(rplids::AttackKind::DA)); };
    const auto tails = tail_normals(f, ids);
    auto far = point(0.9, 0.0, rng, Label::attack(rplids::AttackKind::WH));

    using V = VerdictKind;
    auto add = [&](Instance x, V v, int stage) {
        x.timestamp = static_cast<double>(f.stream.size());
        f.stream.push_back(x);
        f.expected.push_back(v);
        f.expected_stage.push_back(stage);
    };
    for (int i = 0; i < 4; ++i) add(centre(), V::Normal, 1);
    add(da(), V::KnownAttack, 2);
    add(da(), V::KnownAttack, 2);
    for (int i = 0; i < 3; ++i) add(centre(), V::Normal, 1);
    for (const auto& t : tails) add(t, V::Normal, 3);
    add(da(), V::KnownAttack, 2);
    for (int i = 0; i < 3; ++i) add(centre(), V::Normal, 1);
    add(far, V::UnknownAnomaly, 3);
    add(da(), V::KnownAttack, 2);
    add(centre(), V::Normal, 1);
    add(centre(), V::Normal, 1);
}

}  // namespace alg1
