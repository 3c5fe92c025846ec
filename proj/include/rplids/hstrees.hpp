#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace rplids {

struct HsConfig {
    std::size_t trees = 25;
    int depth = 15;
    std::size_t window = 250;
    std::size_t dims = 30;
    std::uint64_t seed = 7;
};

// Forest of perfect binary half-space trees over [0,1]^dims. Nodes are
// stored heap-style: children of i are 2i+1 and 2i+2; leaves sit at depth h.
class HsForest {
public:
    explicit HsForest(HsConfig cfg = {});

    // Sum over trees of leaf.r * 2^depth. Does not modify state.
    double score(std::span<const double> x) const;
    // Adds x to the latest-window mass; rolls the window when count reaches
    // the window size.
    void update_mass(std::span<const double> x);
    // r <- l, l <- 0, count <- 0. Throws StateError unless count == window.
    void roll_window();

    std::size_t count() const { return count_; }
    std::size_t window() const { return cfg_.window; }
    std::uint64_t rolls() const { return rolls_; }
    const HsConfig& config() const { return cfg_; }

    std::size_t node_count() const { return nodes_per_tree_; }
    std::size_t first_leaf() const { return nodes_per_tree_ / 2; }
    std::uint32_t r(std::size_t tree, std::size_t node) const { return r_[tree * nodes_per_tree_ + node]; }
    std::uint32_t l(std::size_t tree, std::size_t node) const { return l_[tree * nodes_per_tree_ + node]; }
    std::uint32_t split_dim(std::size_t tree, std::size_t node) const;
    double split_value(std::size_t tree, std::size_t node) const;
    // Leaf index reached by x in `tree`.
    std::size_t leaf_of(std::size_t tree, std::span<const double> x) const;

private:
    void force_roll();

    HsConfig cfg_;
    std::size_t nodes_per_tree_ = 0;
    std::size_t internal_per_tree_ = 0;
    std::vector<std::uint32_t> dim_;    // per internal node
    std::vector<double> value_;         // per internal node
    std::vector<std::uint32_t> r_;
    std::vector<std::uint32_t> l_;
    std::vector<std::uint32_t> r_nodes_;  // flat indices with r > 0
    std::vector<std::uint32_t> l_nodes_;  // flat indices with l > 0
    std::size_t count_ = 0;
    std::uint64_t rolls_ = 0;
};

// Ring reservoir of recent scores; an instance is anomalous when its score is
// below the q-quantile (type 7) of the reservoir.
class ScoreThreshold {
public:
    explicit ScoreThreshold(double quantile = 0.10, std::size_t capacity = 500, std::size_t min_scores = 50);

    void push(double score);
    bool ready() const { return ring_.size() >= min_scores_; }
    std::size_t size() const { return ring_.size(); }
    // Throws StateError before min_scores scores have been seen.
    double threshold() const;
    bool is_anomalous(double score) const { return score < threshold(); }
    double quantile() const { return q_; }

private:
    double q_;
    std::size_t capacity_;
    std::size_t min_scores_;
    std::vector<double> ring_;
    std::size_t next_ = 0;
};

// Type-7 sample quantile (linear interpolation between order statistics).
double quantile7(std::vector<double> values, double q);

}  // namespace rplids
