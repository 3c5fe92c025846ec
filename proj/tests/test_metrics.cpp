#include <doctest.h>

#include <random>

#include "rplids/error.hpp"
#include "rplids/metrics.hpp"
#include "rplids/prequential.hpp"

using namespace rplids;

namespace {

const Label N = Label::normal();
Label A(AttackKind k) { return Label::attack(k); }

struct ConstantLearner {
    Label out;
    Label predict(const Instance&) const { return out; }
    void learn(const Instance&, const Label&) {}
};

struct MajorityLearner {
    std::uint64_t normals = 0, attacks = 0;
    Label predict(const Instance&) const { return attacks > normals ? A(AttackKind::SH) : N; }
    void learn(const Instance&, const Label& y) { (y.is_attack() ? attacks : normals)++; }
};

struct RecordingLearner {
    std::vector<std::pair<std::size_t, std::size_t>> trained;  // (instance, step at which trained)
    std::size_t step = 0;
    Label predict(const Instance&) {
        ++step;
        return N;
    }
    void learn(const Instance& x, const Label&) { trained.emplace_back(static_cast<std::size_t>(x.timestamp), step - 1); }
};

}  // namespace

TEST_CASE("update_confusion projects to binary") {
    ConfusionCounts cc;
    cc = update_confusion(cc, A(AttackKind::DA), A(AttackKind::SH));
    CHECK(cc.tp == 1);
    cc = update_confusion(cc, N, A(AttackKind::BH));
    CHECK(cc.fp == 1);
    ConfusionCounts ten;
    for (int i = 0; i < 10; ++i) ten = update_confusion(ten, N, N);
    CHECK(ten == ConfusionCounts{0, 0, 10, 0});
}

TEST_CASE("metrics examples") {
    auto perfect = metrics({50, 0, 50, 0});
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.kappa == 1.0);
    CHECK(perfect.degenerate == 0);

    // p0 = 0.8, pc = 0.5*0.5 + 0.5*0.5 = 0.5 -> kappa = 0.3/0.5
    auto m = metrics({40, 10, 40, 10});
    CHECK(m.accuracy == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(m.kappa == doctest::Approx(0.6).epsilon(1e-12));

    auto noattack = metrics({0, 0, 100, 0});
    CHECK(noattack.precision == 0.0);
    CHECK(noattack.is_degenerate(kDegeneratePrecision));
    CHECK(noattack.is_degenerate(kDegenerateRecall));
    CHECK_FALSE(noattack.is_degenerate(kDegenerateFpr));

    CHECK_THROWS_AS(metrics({}), StateError);
}

TEST_CASE("metrics properties over random counts") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<std::uint64_t> d(0, 60);
    for (int i = 0; i < 500; ++i) {
        ConfusionCounts cc{d(rng), d(rng), d(rng), d(rng)};
        if (cc.total() == 0) continue;
        auto m = metrics(cc);
        CHECK(m.kappa >= -1.0 - 1e-12);
        CHECK(m.kappa <= 1.0 + 1e-12);
        const bool both_classes = (cc.tp + cc.fn) > 0 && (cc.tn + cc.fp) > 0;
        if (cc.fp == 0 && cc.fn == 0 && both_classes) CHECK(m.kappa == doctest::Approx(1.0));
        if (m.kappa == 1.0) CHECK((cc.fp == 0 && cc.fn == 0 && both_classes));
    }
}

TEST_CASE("multi-class labels give the same metrics as their binary projection") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> idx(0, Label::kIndexCount - 1);
    ConfusionCounts multi, binary;
    for (int i = 0; i < 2000; ++i) {
        Label t = Label::from_index(idx(rng)), p = Label::from_index(idx(rng));
        multi = update_confusion(multi, t, p);
        binary = update_confusion(binary, t.is_attack() ? A(AttackKind::SH) : N, p.is_attack() ? A(AttackKind::SH) : N);
    }
    CHECK(multi == binary);
}

TEST_CASE("moving mean") {
    MovingMean mm(200);
    for (int i = 0; i < 1000; ++i) mm.push(0.3);
    CHECK(mm.mean() == 0.3);

    MovingMean w(7);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e3, 1e3);
    std::deque<double> ref;
    for (int i = 0; i < 5000; ++i) {
        double v = u(rng);
        w.push(v);
        ref.push_back(v);
        if (ref.size() > 7) ref.pop_front();
        double s = 0;
        for (double x : ref) s += x;
        CHECK(w.mean() == doctest::Approx(s / static_cast<double>(ref.size())).epsilon(1e-12));
    }
    CHECK_THROWS_AS(MovingMean(0), ValidationError);
}

TEST_CASE("prequential: constant model on an all-normal stream") {
    std::vector<Instance> s(300);
    for (auto& x : s) x.label = N;
    ConstantLearner c{N};
    auto log = prequential_run(std::span<const Instance>(s), c);
    for (const auto& r : log.steps) CHECK(r.cumulative.accuracy == 1.0);
}

TEST_CASE("prequential: majority learner on a 70/30 stream") {
    std::mt19937_64 rng(5);
    std::bernoulli_distribution attack(0.3);
    std::vector<Instance> s(10000);
    for (auto& x : s) x.label = attack(rng) ? A(AttackKind::DA) : N;
    // Oracle by direct simulation: fraction of normals in the stream.
    double normals = 0;
    for (auto& x : s) normals += x.label->is_normal();
    MajorityLearner m;
    auto log = prequential_run(std::span<const Instance>(s), m);
    CHECK(log.steps.back().cumulative.accuracy == doctest::Approx(0.7).epsilon(0.02 / 0.7));
    CHECK(std::abs(log.steps.back().cumulative.accuracy - normals / 10000.0) < 0.002);
}

TEST_CASE("prequential: labels never arrive early") {
    for (std::size_t delay : {0u, 1u, 5u}) {
        std::vector<Instance> s(40);
        for (std::size_t i = 0; i < s.size(); ++i) {
            s[i].label = N;
            s[i].timestamp = static_cast<double>(i);
        }
        RecordingLearner r;
        prequential_run(std::span<const Instance>(s), r, {delay, 200});
        REQUIRE(r.trained.size() == s.size());
        for (auto [inst, at] : r.trained) CHECK(at >= std::min(inst + delay, s.size() - 1));
        if (delay == 0)
            for (auto [inst, at] : r.trained) CHECK(at == inst);
    }
}

TEST_CASE("prequential: unlabeled instance is rejected") {
    std::vector<Instance> s(3);
    s[0].label = N;
    ConstantLearner c{N};
    CHECK_THROWS_AS(prequential_run(std::span<const Instance>(s), c), ValidationError);
}
