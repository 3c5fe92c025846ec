#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "rplids/drift.hpp"
#include "rplids/error.hpp"

using namespace rplids;

namespace {

std::vector<DriftStatus> feed(DriftDetector& d, const std::vector<double>& xs) {
    std::vector<DriftStatus> out;
    out.reserve(xs.size());
    for (double x : xs) out.push_back(d.update(x));
    return out;
}

std::vector<double> bernoulli_stream(std::uint64_t seed, std::size_t n, double p) {
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution b(p);
    std::vector<double> v(n);
    for (auto& x : v) x = b(rng) ? 1.0 : 0.0;
    return v;
}

// Exhaustive two-sample KS over all ways of splitting 2n distinct ranks.
double brute_ks_tail(int n, int h) {
    int hits = 0, total = 0;
    const int m = 2 * n;
    for (unsigned mask = 0; mask < (1u << m); ++mask) {
        if (__builtin_popcount(mask) != n) continue;
        ++total;
        int a = 0, b = 0, dmax = 0;
        for (int r = 0; r < m; ++r) {
            if (mask & (1u << r))
                ++a;
            else
                ++b;
            dmax = std::max(dmax, std::abs(a - b));
        }
        if (dmax >= h) ++hits;
    }
    return static_cast<double>(hits) / total;
}

}  // namespace

TEST_CASE("every detector rejects out-of-range input") {
    for (const auto& name : drift_detector_names()) {
        auto d = make_drift_detector(name);
        CHECK_THROWS_AS(d->update(1.5), ValidationError);
        CHECK_THROWS_AS(d->update(-0.1), ValidationError);
        CHECK_THROWS_AS(d->update(std::nan("")), ValidationError);
    }
    CHECK_THROWS_AS(make_drift_detector("CUSUM"), ValidationError);
}

TEST_CASE("ADWIN never fires on a constant stream") {
    AdwinDetector a;
    for (int i = 0; i < 10000; ++i) CHECK(a.update(0.0) != DriftStatus::Drift);
    CHECK(a.window_mean() == 0.0);
}

TEST_CASE("ADWIN window mean") {
    AdwinDetector a;
    CHECK_THROWS_AS(a.window_mean(), StateError);
    for (int i = 0; i < 3; ++i) a.update(1.0);
    CHECK(a.window_mean() == 1.0);
    AdwinDetector b;
    b.update(0.0);
    b.update(1.0);
    CHECK(b.window_mean() == 0.5);
}

TEST_CASE("ADWIN shrinks toward recent data after a 0 -> 1 shift") {
    AdwinDetector a;
    bool drifted = false;
    for (int i = 0; i < 1000; ++i) a.update(0.0);
    for (int i = 0; i < 1000 && !drifted; ++i) drifted = a.update(1.0) == DriftStatus::Drift;
    REQUIRE(drifted);
    // Keep feeding; the window sheds the old regime in further cuts.
    for (int i = 0; i < 200; ++i) a.update(1.0);
    CHECK(a.window_mean() > 0.8);
}

TEST_CASE("ADWIN detects 0.01 -> 0.9 quickly") {
    int ok = 0;
    for (std::uint64_t seed = 0; seed < 100; ++seed) {
        AdwinDetector a;
        auto pre = bernoulli_stream(seed, 1000, 0.01);
        auto post = bernoulli_stream(seed + 1000, 300, 0.9);
        feed(a, pre);
        bool hit = false;
        for (double x : post)
            if (a.update(x) == DriftStatus::Drift) {
                hit = true;
                break;
            }
        ok += hit;
    }
    CHECK(ok >= 95);
}

TEST_CASE("ADWIN histogram invariants") {
    AdwinDetector a;
    auto xs = bernoulli_stream(9, 5000, 0.3);
    std::uint64_t since_start = 0;
    for (double x : xs) {
        ++since_start;
        a.update(x);
        auto rows = a.bucket_sizes();
        std::uint64_t total = 0;
        for (std::size_t r = 0; r < rows.size(); ++r) {
            CHECK(rows[r].size() <= static_cast<std::size_t>(a.config().max_buckets));
            for (auto s : rows[r]) {
                CHECK(s == (std::uint64_t{1} << r));
                total += s;
            }
        }
        CHECK(total == a.width());
        CHECK(a.width() <= since_start);
    }
}

TEST_CASE("Page-Hinkley matches its cumulative-deviation recurrence") {
    std::vector<double> xs(500, 0.0);
    xs.insert(xs.end(), 500, 1.0);

    // Oracle: direct evaluation without resets, first crossing only.
    std::size_t expect = 0;
    {
        double mean = 0, m = 0, mn = 0;
        for (std::size_t t = 1; t <= xs.size(); ++t) {
            mean = mean + (xs[t - 1] - mean) / static_cast<double>(t);
            m += xs[t - 1] - mean - 0.005;
            mn = t == 1 ? m : std::min(mn, m);
            if (t >= 30 && m - mn > 50.0) {
                expect = t;
                break;
            }
        }
    }
    REQUIRE(expect > 500);

    PageHinkleyDetector ph;
    std::size_t got = 0;
    for (std::size_t t = 1; t <= xs.size(); ++t) {
        if (ph.update(xs[t - 1]) == DriftStatus::Drift) {
            got = t;
            break;
        }
        CHECK(ph.minimum() <= ph.cumulative());
    }
    CHECK(got == expect);
}

TEST_CASE("exact KS tail probability matches exhaustive enumeration") {
    for (int n : {3, 5, 7}) {
        for (int h = 1; h <= n; ++h) {
            CAPTURE(n);
            CAPTURE(h);
            const double d = static_cast<double>(h) / n;
            CHECK(ks_pvalue_equal_sizes(static_cast<std::size_t>(n), d) ==
                  doctest::Approx(brute_ks_tail(n, h)).epsilon(1e-12));
        }
    }
    CHECK(ks_pvalue_equal_sizes(30, 0.0) == 1.0);
}

TEST_CASE("KS statistic") {
    CHECK(ks_statistic({1, 2, 3}, {1, 2, 3}) == 0.0);
    CHECK(ks_statistic({1, 2, 3}, {4, 5, 6}) == 1.0);
    CHECK(ks_statistic({1, 3}, {2, 4}) == doctest::Approx(0.5));
}

TEST_CASE("KSWIN buffer is bounded and a level shift is detected") {
    KswinDetector k;
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> lo(0.0, 0.3), hi(0.7, 1.0);
    bool hit = false;
    int false_alarms = 0;
    for (int i = 0; i < 300; ++i) {
        false_alarms += k.update(lo(rng)) == DriftStatus::Drift;
        CHECK(k.buffered() <= 100);
    }
    // One KS test per update at alpha = 0.005 over ~270 tests.
    CHECK(false_alarms <= 5);
    for (int i = 0; i < 100 && !hit; ++i) hit = k.update(hi(rng)) == DriftStatus::Drift;
    CHECK(hit);
}

TEST_CASE("no detector fires before its minimum sample count") {
    for (const auto& name : drift_detector_names()) {
        CAPTURE(name);
        auto d = make_drift_detector(name);
        for (int i = 0; i < 29; ++i) CHECK(d->update(i % 2 ? 1.0 : 0.0) != DriftStatus::Drift);
    }
}

TEST_CASE("every detector flags an abrupt error-rate increase") {
    for (const auto& name : drift_detector_names()) {
        CAPTURE(name);
        auto d = make_drift_detector(name);
        auto xs = bernoulli_stream(4, 2000, 0.05);
        auto post = bernoulli_stream(5, 2000, 0.8);
        xs.insert(xs.end(), post.begin(), post.end());
        std::size_t first_after = 0;
        for (std::size_t i = 0; i < xs.size(); ++i)
            if (d->update(xs[i]) == DriftStatus::Drift && i >= 2000) {
                first_after = i;
                break;
            }
        CHECK(first_after >= 2000);
        CHECK(first_after < 2500);
    }
}

TEST_CASE("reset and determinism") {
    auto xs = bernoulli_stream(21, 3000, 0.2);
    auto tail = bernoulli_stream(22, 1000, 0.9);
    xs.insert(xs.end(), tail.begin(), tail.end());
    for (const auto& name : drift_detector_names()) {
        CAPTURE(name);
        auto a = make_drift_detector(name);
        auto b = make_drift_detector(name);
        CHECK(feed(*a, xs) == feed(*b, xs));

        auto c = make_drift_detector(name);
        feed(*c, xs);
        c->reset();
        auto fresh = c->fresh();
        CHECK(feed(*c, xs) == feed(*fresh, xs));
        CHECK(c->name() == name);
    }
    AdwinDetector a(AdwinConfig{0.01, 5, 1, 5});
    a.update(1.0);
    a.reset();
    CHECK(a.config().delta == 0.01);
    CHECK(a.width() == 0);
}
