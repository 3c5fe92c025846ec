#pragma once

#include <cstdint>
#include <deque>
#include <vector>

#include "rplids/types.hpp"

namespace rplids {

// Binary confusion counts with attack as the positive class.
struct ConfusionCounts {
    std::uint64_t tp = 0;
    std::uint64_t fp = 0;
    std::uint64_t tn = 0;
    std::uint64_t fn = 0;

    std::uint64_t total() const { return tp + fp + tn + fn; }
    friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

ConfusionCounts update_confusion(ConfusionCounts cc, const Label& truth, const Label& predicted);

// Bits set in Metrics::degenerate when the corresponding ratio was 0/0.
enum DegenerateFlag : std::uint32_t {
    kDegeneratePrecision = 1u << 0,
    kDegenerateRecall = 1u << 1,
    kDegenerateF1 = 1u << 2,
    kDegenerateFpr = 1u << 3,
    kDegenerateFnr = 1u << 4,
    kDegenerateKappa = 1u << 5,
};

struct Metrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    double fpr = 0.0;
    double fnr = 0.0;
    double kappa = 0.0;
    std::uint32_t degenerate = 0;

    bool is_degenerate(DegenerateFlag f) const { return (degenerate & f) != 0; }
};

// Throws StateError on empty counts.
Metrics metrics(const ConfusionCounts& cc);

class MovingMean {
public:
    explicit MovingMean(std::size_t window_len = 200);

    void push(double v);
    double mean() const;  // 0 when empty
    std::size_t size() const { return buffer_.size(); }
    std::size_t window_len() const { return window_len_; }
    void clear();

private:
    std::size_t window_len_;
    std::deque<double> buffer_;
    // Kahan-compensated running sum; recomputed exactly when the buffer wraps
    // around often enough for drift to matter.
    double sum_ = 0.0;
    double comp_ = 0.0;
    std::size_t since_resum_ = 0;
    std::size_t run_ = 0;  // trailing values equal to buffer_.back()
};

// Confusion counts over the last `window_len` outcomes.
class WindowedConfusion {
public:
    explicit WindowedConfusion(std::size_t window_len = 200);

    void push(const Label& truth, const Label& predicted);
    const ConfusionCounts& counts() const { return cc_; }
    std::size_t window_len() const { return window_len_; }

private:
    enum class Cell : std::uint8_t { Tp, Fp, Tn, Fn };
    std::size_t window_len_;
    std::deque<Cell> cells_;
    ConfusionCounts cc_;
};

// Per-attack-kind accuracy breakdown (instances whose truth is that kind,
// scored as detected when the prediction is any attack).
struct KindBreakdown {
    std::array<std::uint64_t, kAttackKindCount> seen{};
    std::array<std::uint64_t, kAttackKindCount> detected{};
    std::uint64_t normals_seen = 0;
    std::uint64_t normals_correct = 0;

    void add(const Label& truth, const Label& predicted);
};

}  // namespace rplids
