#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rplids/error.hpp"
#include "rplids/hstrees.hpp"

using namespace rplids;

namespace {

std::vector<double> octant_point(std::mt19937_64& rng, std::size_t dims, bool low) {
    std::uniform_real_distribution<double> u(0.0, 0.5);
    std::vector<double> x(dims);
    for (auto& v : x) v = low ? u(rng) : 1.0 - u(rng);
    return x;
}

std::uint64_t leaf_r_sum(const HsForest& f, std::size_t tree) {
    std::uint64_t s = 0;
    for (std::size_t n = f.first_leaf(); n < f.node_count(); ++n) s += f.r(tree, n);
    return s;
}

}  // namespace

TEST_CASE("structure and construction") {
    HsForest one(HsConfig{3, 1, 10, 2, 1});
    CHECK(one.node_count() == 3);
    CHECK(one.first_leaf() == 1);
    CHECK_THROWS_AS(one.split_dim(0, 1), ValidationError);

    HsForest f(HsConfig{5, 4, 10, 3, 9});
    for (std::size_t t = 0; t < 5; ++t) {
        // The root splits its dimension at s, which lies in (0,1).
        CHECK(f.split_value(t, 0) > 0.0);
        CHECK(f.split_value(t, 0) < 1.0);
        for (std::size_t n = 0; n < f.node_count(); ++n) {
            CHECK(f.r(t, n) == 0);
            CHECK(f.l(t, n) == 0);
        }
    }
    HsForest g(HsConfig{5, 4, 10, 3, 9});
    for (std::size_t t = 0; t < 5; ++t)
        for (std::size_t n = 0; n < g.first_leaf(); ++n) {
            CHECK(f.split_dim(t, n) == g.split_dim(t, n));
            CHECK(f.split_value(t, n) == g.split_value(t, n));
        }
    CHECK_THROWS_AS(HsForest(HsConfig{0, 3, 10, 2, 1}), ValidationError);
}

TEST_CASE("empty reference scores zero and scoring is pure") {
    HsForest f(HsConfig{4, 6, 20, 3, 2});
    std::vector<double> x = {0.1, 0.2, 0.3};
    CHECK(f.score(x) == 0.0);
    for (int i = 0; i < 5; ++i) f.update_mass(x);
    CHECK(f.score(x) == 0.0);  // r only changes on roll
    CHECK(f.count() == 5);
    CHECK(f.l(0, 0) == 5);
    CHECK_THROWS_AS(f.roll_window(), StateError);
}

TEST_CASE("mass bookkeeping on one depth-3 tree") {
    HsForest f(HsConfig{1, 3, 8, 2, 5});
    std::vector<std::vector<double>> pts = {{0.0, 0.0}, {0.05, 0.02}, {0.0, 0.1}, {0.1, 0.0},
                                            {0.02, 0.02}, {0.0, 0.0}, {0.03, 0.08}, {0.07, 0.07}};
    // Oracle: walk the splits by hand and count leaves.
    auto walk = [&](const std::vector<double>& x) {
        std::size_t n = 0;
        while (n < f.first_leaf()) n = x[f.split_dim(0, n)] < f.split_value(0, n) ? 2 * n + 1 : 2 * n + 2;
        return n;
    };
    std::vector<std::uint32_t> expect(f.node_count(), 0);
    for (const auto& p : pts) {
        std::size_t n = walk(p);
        CHECK(f.leaf_of(0, p) == n);
        while (true) {
            ++expect[n];
            if (n == 0) break;
            n = (n - 1) / 2;
        }
    }
    for (std::size_t i = 0; i < pts.size(); ++i) {
        f.update_mass(pts[i]);
        if (i + 1 < pts.size()) CHECK(f.l(0, 0) == i + 1);
    }
    CHECK(f.count() == 0);
    for (std::size_t n = 0; n < f.node_count(); ++n) {
        CHECK(f.r(0, n) == expect[n]);
        CHECK(f.l(0, n) == 0);
    }
    std::vector<double> origin = {0.0, 0.0}, far = {1.0, 1.0};
    CHECK(f.score(origin) == expect[walk(origin)] * 8.0);
    CHECK(f.score(far) == expect[walk(far)] * 8.0);
    CHECK(f.score(origin) > f.score(far));
}

TEST_CASE("roll semantics and conservation") {
    HsForest f(HsConfig{6, 8, 50, 4, 3});
    std::mt19937_64 rng(1);
    for (int w = 0; w < 4; ++w) {
        for (int i = 0; i < 50; ++i) f.update_mass(octant_point(rng, 4, true));
        for (std::size_t t = 0; t < 6; ++t) {
            CHECK(f.r(t, 0) == 50);
            CHECK(f.l(t, 0) == 0);
            CHECK(leaf_r_sum(f, t) == 50);
        }
    }
    // Two rolls without inserts in between leave no mass.
    HsForest g(HsConfig{2, 3, 2, 2, 4});
    std::vector<double> p = {0.3, 0.3};
    g.update_mass(p);
    g.update_mass(p);
    CHECK(g.r(0, 0) == 2);
    g.update_mass(p);
    g.update_mass(p);  // second roll: r = l of the latest window
    CHECK(g.r(0, 0) == 2);
}

TEST_CASE("scores are non-negative and separate octants") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        HsConfig cfg;
        cfg.seed = seed;
        HsForest f(cfg);
        std::mt19937_64 rng(seed + 100);
        for (std::size_t i = 0; i < cfg.window; ++i) f.update_mass(octant_point(rng, 30, true));
        std::vector<double> scores;
        for (int i = 0; i < 1000; ++i) {
            double s = f.score(octant_point(rng, 30, true));
            CHECK(s >= 0.0);
            scores.push_back(s);
        }
        const double median = quantile7(scores, 0.5);
        CHECK(f.score(octant_point(rng, 30, false)) < median);
    }
}

TEST_CASE("quantile threshold") {
    CHECK(quantile7({1, 2, 3, 4, 5}, 0.5) == 3.0);
    CHECK(quantile7({1, 2, 3, 4}, 0.1) == doctest::Approx(1.3));
    ScoreThreshold th(0.10, 500, 50);
    CHECK_THROWS_AS(th.threshold(), StateError);
    for (int i = 1; i <= 100; ++i) th.push(i);
    CHECK(th.ready());
    CHECK(th.is_anomalous(0.0));
    CHECK_FALSE(th.is_anomalous(50.5));
    ScoreThreshold all(1.0, 500, 50);
    for (int i = 1; i <= 60; ++i) all.push(i);
    CHECK(all.is_anomalous(60.0));
    CHECK(all.is_anomalous(1e9));
    CHECK_THROWS_AS(ScoreThreshold(1.5), ValidationError);

    // The ring keeps only the newest `capacity` scores.
    ScoreThreshold ring(0.0, 60, 50);
    for (int i = 0; i < 1000; ++i) ring.push(i);
    CHECK(ring.size() == 60);
    CHECK(ring.threshold() == 940.0);
}
