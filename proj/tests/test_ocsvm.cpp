#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "rplids/error.hpp"
#include "rplids/ocsvm.hpp"

using namespace rplids;

namespace {

std::vector<double> gaussian_2d(std::uint64_t seed, std::size_t n) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    std::vector<double> v(2 * n);
    for (auto& x : v) x = g(rng);
    return v;
}

double dual_objective(const std::vector<double>& alpha, const std::vector<double>& z, std::size_t dims, double gamma) {
    const std::size_t n = alpha.size();
    double obj = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t d = 0; d < dims; ++d) s += (z[i * dims + d] - z[j * dims + d]) * (z[i * dims + d] - z[j * dims + d]);
            obj += alpha[i] * alpha[j] * std::exp(-gamma * s);
        }
    return 0.5 * obj;
}

// Frank-Wolfe on {0 <= a <= C, sum a = 1}: the linear step fills the
// smallest-gradient coordinates up to C each.
double reference_optimum(const std::vector<double>& raw, std::size_t dims, double nu, double gamma) {
    const std::size_t n = raw.size() / dims;
    std::vector<double> lo(dims, INFINITY), hi(dims, -INFINITY);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dims; ++d) {
            lo[d] = std::min(lo[d], raw[i * dims + d]);
            hi[d] = std::max(hi[d], raw[i * dims + d]);
        }
    std::vector<double> z(raw.size());
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t d = 0; d < dims; ++d) z[i * dims + d] = (raw[i * dims + d] - lo[d]) / (hi[d] - lo[d]);
    std::vector<double> K(n * n);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0;
            for (std::size_t d = 0; d < dims; ++d) s += std::pow(z[i * dims + d] - z[j * dims + d], 2);
            K[i * n + j] = std::exp(-gamma * s);
        }
    const double C = 1.0 / (nu * static_cast<double>(n));
    std::vector<double> a(n, 1.0 / static_cast<double>(n)), g(n), s(n);
    std::vector<std::size_t> order(n);
    for (int it = 0; it < 20000; ++it) {
        for (std::size_t i = 0; i < n; ++i) {
            g[i] = 0;
            for (std::size_t j = 0; j < n; ++j) g[i] += K[i * n + j] * a[j];
        }
        std::iota(order.begin(), order.end(), 0);
        std::sort(order.begin(), order.end(), [&](auto x, auto y) { return g[x] < g[y]; });
        std::fill(s.begin(), s.end(), 0.0);
        double left = 1.0;
        for (auto i : order) {
            s[i] = std::min(C, left);
            left -= s[i];
            if (left <= 0) break;
        }
        // exact line search on the quadratic
        double num = 0, den = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const double di = s[i] - a[i];
            num -= g[i] * di;
            double kd = 0;
            for (std::size_t j = 0; j < n; ++j) kd += K[i * n + j] * (s[j] - a[j]);
            den += di * kd;
        }
        if (den <= 0) break;
        const double step = std::clamp(num / den, 0.0, 1.0);
        for (std::size_t i = 0; i < n; ++i) a[i] += step * (s[i] - a[i]);
    }
    return dual_objective(a, z, dims, gamma);
}

}  // namespace

TEST_CASE("fit validation") {
    OcsvmTrainConfig cfg;
    cfg.nu = 0.5;
    std::vector<double> same = {1.0, 2.0, 1.0, 2.0};
    CHECK_THROWS_AS(OcsvmModel::fit(same, 2, cfg), DegenerateDataError);
    std::vector<double> one = {1.0, 2.0};
    CHECK_THROWS_AS(OcsvmModel::fit(one, 2, cfg), ValidationError);
    std::vector<double> two = {0.0, 0.0, 1.0, 1.0};
    cfg.nu = 0.0;
    CHECK_THROWS_AS(OcsvmModel::fit(two, 2, cfg), ValidationError);
    cfg.nu = 0.5;
    cfg.gamma = -1.0;
    CHECK_THROWS_AS(OcsvmModel::fit(two, 2, cfg), ValidationError);
    std::vector<double> bad = {0.0, NAN, 1.0, 1.0};
    cfg.gamma = 0.9;
    CHECK_THROWS_AS(OcsvmModel::fit(bad, 2, cfg), ValidationError);
    CHECK_THROWS_AS(OcsvmModel().decision_value(std::vector<double>{0.0}), StateError);
}

TEST_CASE("nu-property on a 2-D Gaussian") {
    auto data = gaussian_2d(1, 500);
    OcsvmTrainConfig cfg;
    OcsvmFitReport rep;
    auto m = OcsvmModel::fit(data, 2, cfg, &rep);
    CHECK(rep.converged);

    std::size_t out = 0;
    for (std::size_t i = 0; i < 500; ++i) out += m.decision_value(std::span<const double>(data).subspan(2 * i, 2)) < 0;
    const double frac = static_cast<double>(out) / 500.0;
    CHECK(frac >= 0.14);
    CHECK(frac <= 0.26);
    CHECK(static_cast<double>(m.support_count()) / 500.0 >= 0.14);

    const double sum = std::accumulate(m.alphas().begin(), m.alphas().end(), 0.0);
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-6));
    const double cap = 1.0 / (0.2 * 500.0);
    for (double a : m.alphas()) {
        CHECK(a > 0.0);
        CHECK(a <= cap + 1e-6);
    }
}

TEST_CASE("solver reaches the reference optimum") {
    for (std::uint64_t seed : {2u, 3u}) {
        auto data = gaussian_2d(seed, 60);
        OcsvmTrainConfig cfg;
        cfg.tolerance = 1e-6;
        auto m = OcsvmModel::fit(data, 2, cfg);
        std::vector<double> sv;
        for (std::size_t i = 0; i < m.support_count(); ++i) {
            auto v = m.support_vector(i);
            sv.insert(sv.end(), v.begin(), v.end());
        }
        const double got = dual_objective(m.alphas(), sv, 2, 0.9);
        const double ref = reference_optimum(data, 2, 0.2, 0.9);
        CHECK(got <= ref + 1e-6);
        CHECK(got == doctest::Approx(ref).epsilon(1e-4));
    }
}

TEST_CASE("decision values") {
    // Dense cluster around (0,0) plus a sparse ring.
    std::mt19937_64 rng(4);
    std::normal_distribution<double> g(0.0, 0.3);
    std::vector<double> data;
    for (int i = 0; i < 300; ++i) {
        data.push_back(g(rng));
        data.push_back(g(rng));
    }
    for (int i = 0; i < 30; ++i) {
        data.push_back(3.0 * std::cos(i * 0.2094));
        data.push_back(3.0 * std::sin(i * 0.2094));
    }
    auto m = OcsvmModel::fit(data, 2, {});
    CHECK(m.decision_value(std::vector<double>{0.0, 0.0}) > 0.0);
    CHECK(m.predict(std::vector<double>{0.0, 0.0}) == 1);

    // Far point: clamping maps it to a corner of the unit box, which the ring
    // does not reach, so the value is close to -rho.
    CHECK(m.decision_value(std::vector<double>{300.0, 300.0}) < 0.0);
    CHECK(m.predict(std::vector<double>{300.0, 300.0}) == -1);
    CHECK_THROWS_AS(m.decision_value(std::vector<double>{1.0}), ValidationError);

    // Once past every support vector along the first axis, moving further
    // increases the distance to all of them.
    double start = 0.0;
    for (std::size_t i = 0; i < m.support_count(); ++i) start = std::max(start, m.support_vector(i)[0]);
    const double lo = m.scaler().lo()[0], span = m.scaler().hi()[0] - m.scaler().lo()[0];
    double prev = INFINITY;
    for (double t = start; t < 1.3; t += 0.01) {
        const double v = m.decision_value(std::vector<double>{lo + t * span, 0.0});
        CHECK(v <= prev + 1e-12);
        prev = v;
    }
}

TEST_CASE("support-vector order does not matter") {
    auto data = gaussian_2d(5, 200);
    auto m = OcsvmModel::fit(data, 2, {});
    std::vector<std::size_t> idx(m.support_count());
    std::iota(idx.rbegin(), idx.rend(), 0);
    std::vector<double> a, sv;
    for (auto i : idx) {
        a.push_back(m.alphas()[i]);
        auto v = m.support_vector(i);
        sv.insert(sv.end(), v.begin(), v.end());
    }
    auto r = OcsvmModel::from_parts(m.scaler(), m.kernel(), m.rho(), m.nu(), a, sv, m.training_size());
    for (std::size_t i = 0; i < 200; ++i) {
        auto x = std::span<const double>(data).subspan(2 * i, 2);
        CHECK(r.decision_value(x) == doctest::Approx(m.decision_value(x)).epsilon(1e-12));
    }
}

TEST_CASE("serialization round trip is exact") {
    auto data = gaussian_2d(6, 300);
    auto m = OcsvmModel::fit(data, 2, {});
    std::stringstream ss;
    m.save(ss);
    auto r = OcsvmModel::load(ss);
    CHECK(r.support_count() == m.support_count());
    CHECK(r.rho() == m.rho());
    for (std::size_t i = 0; i < 300; ++i) {
        auto x = std::span<const double>(data).subspan(2 * i, 2);
        CHECK(r.decision_value(x) == m.decision_value(x));
    }

    std::stringstream bad("rplids-ocsvm 1\ndims 2\nn_train x\n");
    CHECK_THROWS_AS(OcsvmModel::load(bad), ParseError);
    std::stringstream ver("rplids-ocsvm 9\n");
    CHECK_THROWS_AS(OcsvmModel::load(ver), ParseError);
}

TEST_CASE("predict maps zero to inlier") {
    // A single support vector at the origin with rho = 1 gives decision 0 there.
    auto m = OcsvmModel::from_parts(MinMaxScaler({0.0}, {1.0}), KernelParams{1.0}, 1.0, 1.0, {1.0}, {0.0}, 1);
    CHECK(m.decision_value(std::vector<double>{0.0}) == 0.0);
    CHECK(m.predict(std::vector<double>{0.0}) == 1);
    auto pos = OcsvmModel::from_parts(MinMaxScaler({0.0}, {1.0}), KernelParams{1.0}, 0.7, 1.0, {1.0}, {0.0}, 1);
    CHECK(pos.decision_value(std::vector<double>{0.0}) == doctest::Approx(0.3));
    CHECK(pos.predict(std::vector<double>{0.0}) == 1);
    auto neg = OcsvmModel::from_parts(MinMaxScaler({0.0}, {1.0}), KernelParams{1.0}, 1.3, 1.0, {1.0}, {0.0}, 1);
    CHECK(neg.predict(std::vector<double>{0.0}) == -1);
}
