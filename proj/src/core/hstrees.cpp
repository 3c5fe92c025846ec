#include "rplids/hstrees.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

#include "rplids/error.hpp"

namespace rplids {

HsForest::HsForest(HsConfig cfg) : cfg_(cfg) {
    if (cfg_.trees == 0) throw ValidationError("HS-Trees needs at least one tree");
    if (cfg_.depth < 1 || cfg_.depth > 24) throw ValidationError("HS-Trees depth must be in [1,24]");
    if (cfg_.window == 0) throw ValidationError("HS-Trees window must be positive");
    if (cfg_.dims == 0) throw ValidationError("HS-Trees needs at least one dimension");

    nodes_per_tree_ = (std::size_t{1} << (cfg_.depth + 1)) - 1;
    internal_per_tree_ = (std::size_t{1} << cfg_.depth) - 1;
    dim_.resize(cfg_.trees * internal_per_tree_);
    value_.resize(cfg_.trees * internal_per_tree_);
    r_.assign(cfg_.trees * nodes_per_tree_, 0);
    l_.assign(cfg_.trees * nodes_per_tree_, 0);

    std::mt19937_64 rng(cfg_.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(cfg_.dims - 1));
    std::vector<double> lo(cfg_.dims), hi(cfg_.dims);

    for (std::size_t t = 0; t < cfg_.trees; ++t) {
        for (std::size_t d = 0; d < cfg_.dims; ++d) {
            const double s = unit(rng);
            const double half = 2.0 * std::max(s, 1.0 - s);
            lo[d] = s - half;
            hi[d] = s + half;
        }
        // Preorder walk so each node sees the ranges narrowed by its ancestors.
        const std::size_t base = t * internal_per_tree_;
        auto build = [&](auto& self, std::size_t node) -> void {
            if (node >= internal_per_tree_) return;
            const std::uint32_t d = pick(rng);
            const double mid = (lo[d] + hi[d]) / 2.0;
            dim_[base + node] = d;
            value_[base + node] = mid;
            const double saved_hi = hi[d];
            hi[d] = mid;
            self(self, 2 * node + 1);
            hi[d] = saved_hi;
            const double saved_lo = lo[d];
            lo[d] = mid;
            self(self, 2 * node + 2);
            lo[d] = saved_lo;
        };
        build(build, 0);
    }
}

std::uint32_t HsForest::split_dim(std::size_t tree, std::size_t node) const {
    if (node >= internal_per_tree_) throw ValidationError("leaf nodes have no split");
    return dim_[tree * internal_per_tree_ + node];
}

double HsForest::split_value(std::size_t tree, std::size_t node) const {
    if (node >= internal_per_tree_) throw ValidationError("leaf nodes have no split");
    return value_[tree * internal_per_tree_ + node];
}

std::size_t HsForest::leaf_of(std::size_t tree, std::span<const double> x) const {
    if (x.size() != cfg_.dims) throw ValidationError("HS-Trees input arity mismatch");
    std::size_t n = 0;
    const std::size_t base = tree * internal_per_tree_;
    while (n < internal_per_tree_) n = x[dim_[base + n]] < value_[base + n] ? 2 * n + 1 : 2 * n + 2;
    return n;
}

double HsForest::score(std::span<const double> x) const {
    const double leaf_weight = std::ldexp(1.0, cfg_.depth);
    double s = 0.0;
    for (std::size_t t = 0; t < cfg_.trees; ++t) s += r_[t * nodes_per_tree_ + leaf_of(t, x)] * leaf_weight;
    return s;
}

void HsForest::update_mass(std::span<const double> x) {
    for (std::size_t t = 0; t < cfg_.trees; ++t) {
        const std::size_t leaf = leaf_of(t, x);
        // Walk the path bottom-up through the heap parents.
        std::size_t n = leaf;
        while (true) {
            const std::size_t flat = t * nodes_per_tree_ + n;
            if (l_[flat]++ == 0) l_nodes_.push_back(static_cast<std::uint32_t>(flat));
            if (n == 0) break;
            n = (n - 1) / 2;
        }
    }
    if (++count_ == cfg_.window) force_roll();
}

void HsForest::roll_window() {
    if (count_ != cfg_.window) throw StateError("window roll requires a full latest window");
    force_roll();
}

void HsForest::force_roll() {
    for (auto i : r_nodes_) r_[i] = 0;
    for (auto i : l_nodes_) {
        r_[i] = l_[i];
        l_[i] = 0;
    }
    r_nodes_.swap(l_nodes_);
    l_nodes_.clear();
    count_ = 0;
    ++rolls_;
}

// ---------------------------------------------------------------------------

double quantile7(std::vector<double> v, double q) {
    if (v.empty()) throw StateError("quantile of an empty sample");
    std::sort(v.begin(), v.end());
    const double h = (static_cast<double>(v.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

ScoreThreshold::ScoreThreshold(double quantile, std::size_t capacity, std::size_t min_scores)
    : q_(quantile), capacity_(capacity), min_scores_(min_scores) {
    if (!(q_ >= 0.0 && q_ <= 1.0)) throw ValidationError("score quantile must be in [0,1]");
    if (capacity_ == 0 || min_scores_ == 0 || min_scores_ > capacity_)
        throw ValidationError("score reservoir needs 0 < min_scores <= capacity");
    ring_.reserve(capacity_);
}

void ScoreThreshold::push(double score) {
    if (ring_.size() < capacity_) {
        ring_.push_back(score);
    } else {
        ring_[next_] = score;
        next_ = (next_ + 1) % capacity_;
    }
}

double ScoreThreshold::threshold() const {
    if (!ready()) throw StateError("score threshold is cold");
    // q = 1 flags everything, including the maximum itself.
    if (q_ >= 1.0) return std::numeric_limits<double>::infinity();
    return quantile7(ring_, q_);
}

}  // namespace rplids
