#include "rplids/metrics.hpp"

#include <numeric>

#include "rplids/error.hpp"

namespace rplids {

ConfusionCounts update_confusion(ConfusionCounts cc, const Label& truth, const Label& predicted) {
    const bool t = truth.is_attack();
    const bool p = predicted.is_attack();
    if (t && p)
        ++cc.tp;
    else if (!t && p)
        ++cc.fp;
    else if (!t && !p)
        ++cc.tn;
    else
        ++cc.fn;
    return cc;
}

namespace {

double ratio(double num, double den, std::uint32_t flag, std::uint32_t& degenerate) {
    if (den == 0.0) {
        degenerate |= flag;
        return 0.0;
    }
    return num / den;
}

}  // namespace

Metrics metrics(const ConfusionCounts& cc) {
    const auto total = cc.total();
    if (total == 0) throw StateError("metrics of empty confusion counts");

    const double tp = static_cast<double>(cc.tp);
    const double fp = static_cast<double>(cc.fp);
    const double tn = static_cast<double>(cc.tn);
    const double fn = static_cast<double>(cc.fn);
    const double n = static_cast<double>(total);

    Metrics m;
    m.accuracy = (tp + tn) / n;
    m.precision = ratio(tp, tp + fp, kDegeneratePrecision, m.degenerate);
    m.recall = ratio(tp, tp + fn, kDegenerateRecall, m.degenerate);
    m.f1 = ratio(2.0 * tp, 2.0 * tp + fp + fn, kDegenerateF1, m.degenerate);
    m.fpr = ratio(fp, fp + tn, kDegenerateFpr, m.degenerate);
    m.fnr = ratio(fn, fn + tp, kDegenerateFnr, m.degenerate);

    const double p0 = m.accuracy;
    const double pc = ((tp + fp) * (tp + fn) + (tn + fn) * (tn + fp)) / (n * n);
    m.kappa = ratio(p0 - pc, 1.0 - pc, kDegenerateKappa, m.degenerate);
    return m;
}

MovingMean::MovingMean(std::size_t window_len) : window_len_(window_len) {
    if (window_len_ == 0) throw ValidationError("moving mean window must be positive");
}

void MovingMean::push(double v) {
    run_ = (!buffer_.empty() && buffer_.back() == v) ? run_ + 1 : 1;
    buffer_.push_back(v);
    double removed = 0.0;
    if (buffer_.size() > window_len_) {
        removed = buffer_.front();
        buffer_.pop_front();
    }
    if (++since_resum_ >= window_len_) {
        sum_ = std::accumulate(buffer_.begin(), buffer_.end(), 0.0);
        comp_ = 0.0;
        since_resum_ = 0;
        return;
    }
    const double delta = v - removed;
    const double y = delta - comp_;
    const double t = sum_ + y;
    comp_ = (t - sum_) - y;
    sum_ = t;
}

double MovingMean::mean() const {
    if (buffer_.empty()) return 0.0;
    // A constant window reports its value exactly.
    if (run_ >= buffer_.size()) return buffer_.back();
    return sum_ / static_cast<double>(buffer_.size());
}

void MovingMean::clear() {
    buffer_.clear();
    sum_ = comp_ = 0.0;
    since_resum_ = 0;
    run_ = 0;
}

WindowedConfusion::WindowedConfusion(std::size_t window_len) : window_len_(window_len) {
    if (window_len_ == 0) throw ValidationError("confusion window must be positive");
}

void WindowedConfusion::push(const Label& truth, const Label& predicted) {
    Cell c;
    if (truth.is_attack())
        c = predicted.is_attack() ? Cell::Tp : Cell::Fn;
    else
        c = predicted.is_attack() ? Cell::Fp : Cell::Tn;
    cells_.push_back(c);
    auto bump = [this](Cell cell, int d) {
        switch (cell) {
            case Cell::Tp: cc_.tp += d; break;
            case Cell::Fp: cc_.fp += d; break;
            case Cell::Tn: cc_.tn += d; break;
            case Cell::Fn: cc_.fn += d; break;
        }
    };
    bump(c, 1);
    if (cells_.size() > window_len_) {
        bump(cells_.front(), -1);
        cells_.pop_front();
    }
}

void KindBreakdown::add(const Label& truth, const Label& predicted) {
    if (truth.is_attack()) {
        const auto k = static_cast<std::size_t>(truth.kind());
        ++seen[k];
        if (predicted.is_attack()) ++detected[k];
    } else {
        ++normals_seen;
        if (predicted.is_normal()) ++normals_correct;
    }
}

}  // namespace rplids
