#include "rplids/drift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "rplids/error.hpp"

namespace rplids {

std::string_view to_string(DriftStatus s) {
    switch (s) {
        case DriftStatus::Stable: return "Stable";
        case DriftStatus::Warning: return "Warning";
        case DriftStatus::Drift: return "Drift";
    }
    return "?";
}

DriftStatus DriftDetector::update(double value) {
    if (!std::isfinite(value) || value < 0.0 || value > 1.0)
        throw ValidationError("drift detector input must be in [0,1]");
    ++samples_;
    return do_update(value);
}

// ---------------------------------------------------------------------------
// ADWIN

AdwinDetector::AdwinDetector(AdwinConfig cfg) : cfg_(cfg) {
    if (!(cfg_.delta > 0.0 && cfg_.delta < 1.0)) throw ValidationError("ADWIN delta must be in (0,1)");
    if (cfg_.max_buckets < 2) throw ValidationError("ADWIN needs at least 2 buckets per row");
    if (cfg_.clock < 1) throw ValidationError("ADWIN clock must be positive");
}

void AdwinDetector::reset() {
    rows_.clear();
    width_ = 0;
    total_ = variance_ = 0.0;
    tick_ = 0;
    clear_sample_count();
}

double AdwinDetector::window_mean() const {
    if (width_ == 0) throw StateError("ADWIN window is empty");
    return total_ / static_cast<double>(width_);
}

std::size_t AdwinDetector::bucket_count() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
}

std::vector<std::vector<std::uint64_t>> AdwinDetector::bucket_sizes() const {
    std::vector<std::vector<std::uint64_t>> out;
    for (std::size_t i = 0; i < rows_.size(); ++i)
        out.emplace_back(rows_[i].size(), std::uint64_t{1} << i);
    return out;
}

void AdwinDetector::insert(double value) {
    if (rows_.empty()) rows_.emplace_back();
    rows_[0].push_front({value, 0.0});
    ++width_;
    if (width_ > 1) {
        const double prev = static_cast<double>(width_ - 1);
        const double d = value - total_ / prev;
        variance_ += prev * d * d / static_cast<double>(width_);
    }
    total_ += value;
    compress();
}

void AdwinDetector::compress() {
    const std::size_t limit = static_cast<std::size_t>(cfg_.max_buckets);
    for (std::size_t i = 0; i < rows_.size(); ++i) {
        if (rows_[i].size() <= limit) break;
        const double n = static_cast<double>(std::uint64_t{1} << i);
        Bucket b1 = rows_[i].back();
        rows_[i].pop_back();
        Bucket b2 = rows_[i].back();
        rows_[i].pop_back();
        const double diff = b1.sum / n - b2.sum / n;
        Bucket merged{b1.sum + b2.sum, b1.var + b2.var + n * n * diff * diff / (2.0 * n)};
        if (i + 1 == rows_.size()) rows_.emplace_back();
        rows_[i + 1].push_front(merged);
    }
}

void AdwinDetector::drop_oldest() {
    std::size_t i = rows_.size();
    while (i > 0 && rows_[i - 1].empty()) --i;
    if (i == 0) return;
    Row& row = rows_[i - 1];
    const Bucket b = row.back();
    row.pop_back();
    const std::uint64_t n1 = std::uint64_t{1} << (i - 1);
    width_ -= n1;
    total_ -= b.sum;
    if (width_ > 0) {
        const double w = static_cast<double>(width_);
        const double nb = static_cast<double>(n1);
        const double d = b.sum / nb - total_ / w;
        variance_ -= b.var + nb * w * d * d / (nb + w);
        if (variance_ < 0.0) variance_ = 0.0;
    } else {
        variance_ = 0.0;
        total_ = 0.0;
    }
    while (!rows_.empty() && rows_.back().empty()) rows_.pop_back();
}

bool AdwinDetector::cut(std::uint64_t n0, std::uint64_t n1, double mean0, double mean1) const {
    const double n = static_cast<double>(width_);
    const double dd = std::log(2.0 * std::log(n) / cfg_.delta);
    const double v = variance();
    const double mw = static_cast<double>(cfg_.min_window);
    const double m = 1.0 / (static_cast<double>(n0) - mw + 1.0) + 1.0 / (static_cast<double>(n1) - mw + 1.0);
    const double eps = std::sqrt(2.0 * m * v * dd) + 2.0 / 3.0 * dd * m;
    return std::fabs(mean0 - mean1) > eps;
}

bool AdwinDetector::detect() {
    bool changed = false;
    const auto min_sub = static_cast<std::uint64_t>(cfg_.min_window) + 1;
    bool shrink = true;
    while (shrink) {
        shrink = false;
        std::uint64_t n0 = 0, n1 = width_;
        double u0 = 0.0, u1 = total_;
        // Walk from the oldest bucket towards the newest; each step moves one
        // bucket from W1 (recent) into W0 (old).
        for (std::size_t ri = rows_.size(); ri-- > 0 && !shrink;) {
            const auto& row = rows_[ri];
            const std::uint64_t sz = std::uint64_t{1} << ri;
            for (std::size_t bi = row.size(); bi-- > 0;) {
                if (ri == 0 && bi == 0) break;  // W1 must keep the newest bucket
                n0 += sz;
                n1 -= sz;
                u0 += row[bi].sum;
                u1 -= row[bi].sum;
                if (n0 > min_sub && n1 > min_sub &&
                    cut(n0, n1, u0 / static_cast<double>(n0), u1 / static_cast<double>(n1))) {
                    shrink = true;
                    changed = true;
                    break;
                }
            }
        }
        if (shrink) drop_oldest();
    }
    return changed;
}

DriftStatus AdwinDetector::do_update(double value) {
    insert(value);
    ++tick_;
    if (tick_ % static_cast<std::uint64_t>(cfg_.clock) != 0) return DriftStatus::Stable;
    if (width_ <= static_cast<std::uint64_t>(cfg_.min_window)) return DriftStatus::Stable;
    return detect() ? DriftStatus::Drift : DriftStatus::Stable;
}

// ---------------------------------------------------------------------------
// DDM

DdmDetector::DdmDetector(DdmConfig cfg) : cfg_(cfg) {
    if (!(cfg_.warn_coeff > 0.0 && cfg_.drift_coeff >= cfg_.warn_coeff))
        throw ValidationError("DDM coefficients must satisfy 0 < warn <= drift");
    reset();
}

void DdmDetector::reset() {
    n_ = 0;
    p_ = s_ = 0.0;
    p_min_ = s_min_ = std::numeric_limits<double>::infinity();
    clear_sample_count();
}

DriftStatus DdmDetector::do_update(double value) {
    ++n_;
    p_ += (value - p_) / static_cast<double>(n_);
    s_ = std::sqrt(p_ * (1.0 - p_) / static_cast<double>(n_));
    if (n_ < cfg_.min_samples) return DriftStatus::Stable;

    if (p_ + s_ <= p_min_ + s_min_) {
        p_min_ = p_;
        s_min_ = s_;
    }
    if (p_ + s_ > p_min_ + cfg_.drift_coeff * s_min_) {
        reset();
        return DriftStatus::Drift;
    }
    if (p_ + s_ > p_min_ + cfg_.warn_coeff * s_min_) return DriftStatus::Warning;
    return DriftStatus::Stable;
}

// ---------------------------------------------------------------------------
// EDDM

EddmDetector::EddmDetector(EddmConfig cfg) : cfg_(cfg) {
    if (!(cfg_.drift_threshold < cfg_.warn_threshold && cfg_.warn_threshold < 1.0))
        throw ValidationError("EDDM thresholds must satisfy beta < alpha < 1");
    reset();
}

void EddmDetector::reset() {
    n_ = errors_ = last_error_at_ = 0;
    mean_ = m2_ = max_m2s_ = error_rate_ = 0.0;
    clear_sample_count();
}

double EddmDetector::estimation() const { return error_rate_; }

DriftStatus EddmDetector::do_update(double value) {
    ++n_;
    const bool error = value > 0.5;
    error_rate_ += ((error ? 1.0 : 0.0) - error_rate_) / static_cast<double>(n_);
    if (!error) return DriftStatus::Stable;

    ++errors_;
    const double distance = static_cast<double>(n_ - last_error_at_);
    last_error_at_ = n_;
    const double old_mean = mean_;
    mean_ += (distance - mean_) / static_cast<double>(errors_);
    m2_ += (distance - mean_) * (distance - old_mean);
    const double stddev = std::sqrt(m2_ / static_cast<double>(errors_));
    const double m2s = mean_ + 2.0 * stddev;

    if (n_ < cfg_.min_samples) return DriftStatus::Stable;
    if (m2s > max_m2s_) {
        max_m2s_ = m2s;
        return DriftStatus::Stable;
    }
    const double ratio = m2s / max_m2s_;
    if (errors_ > cfg_.min_errors && ratio < cfg_.drift_threshold) {
        reset();
        return DriftStatus::Drift;
    }
    if (errors_ > cfg_.min_errors && ratio < cfg_.warn_threshold) return DriftStatus::Warning;
    return DriftStatus::Stable;
}

// ---------------------------------------------------------------------------
// Page-Hinkley

PageHinkleyDetector::PageHinkleyDetector(PageHinkleyConfig cfg) : cfg_(cfg) {
    if (!(cfg_.lambda > 0.0)) throw ValidationError("Page-Hinkley threshold must be positive");
    reset();
}

void PageHinkleyDetector::reset() {
    n_ = 0;
    mean_ = m_ = min_m_ = 0.0;
    clear_sample_count();
}

DriftStatus PageHinkleyDetector::do_update(double value) {
    ++n_;
    mean_ += (value - mean_) / static_cast<double>(n_);
    m_ += value - mean_ - cfg_.delta;
    min_m_ = n_ == 1 ? m_ : std::min(min_m_, m_);
    if (n_ < cfg_.min_samples) return DriftStatus::Stable;
    if (m_ - min_m_ > cfg_.lambda) {
        reset();
        return DriftStatus::Drift;
    }
    return DriftStatus::Stable;
}

// ---------------------------------------------------------------------------
// KSWIN

double ks_statistic(std::vector<double> a, std::vector<double> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    const double na = static_cast<double>(a.size());
    const double nb = static_cast<double>(b.size());
    std::size_t i = 0, j = 0;
    double d = 0.0;
    while (i < a.size() && j < b.size()) {
        const double x = std::min(a[i], b[j]);
        while (i < a.size() && a[i] <= x) ++i;
        while (j < b.size() && b[j] <= x) ++j;
        d = std::max(d, std::fabs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
    }
    return d;
}

double ks_pvalue_equal_sizes(std::size_t n, double d) {
    const auto h = static_cast<std::size_t>(std::llround(d * static_cast<double>(n)));
    if (h == 0) return 1.0;
    if (h > n) return 0.0;
    // P(D >= h/n) = 2 * sum_k (-1)^(k+1) C(2n, n-kh) / C(2n, n), evaluated in a
    // nested Horner form to avoid cancellation.
    const double nd = static_cast<double>(n);
    double p = 0.0;
    for (std::size_t k = n / h + 1; k-- > 0;) {
        const double kh = static_cast<double>(k * h);
        double term = 1.0;
        for (std::size_t j = 0; j < h; ++j) {
            const double jd = static_cast<double>(j);
            term = term * (nd - kh - jd) / (nd + kh + jd + 1.0);
        }
        p = term * (1.0 - p);
    }
    return std::min(1.0, 2.0 * p);
}

KswinDetector::KswinDetector(KswinConfig cfg) : cfg_(cfg), rng_(cfg.seed) {
    if (cfg_.stat_size == 0 || cfg_.window_size < 2 * cfg_.stat_size)
        throw ValidationError("KSWIN needs window_size >= 2 * stat_size > 0");
    if (!(cfg_.alpha > 0.0 && cfg_.alpha < 1.0)) throw ValidationError("KSWIN alpha must be in (0,1)");
}

void KswinDetector::reset() {
    window_.clear();
    rng_.seed(cfg_.seed);
    p_value_ = 1.0;
    clear_sample_count();
}

double KswinDetector::estimation() const {
    if (window_.empty()) return 0.0;
    return std::accumulate(window_.begin(), window_.end(), 0.0) / static_cast<double>(window_.size());
}

DriftStatus KswinDetector::do_update(double value) {
    window_.push_back(value);
    if (window_.size() > cfg_.window_size) window_.pop_front();
    if (window_.size() < cfg_.window_size) return DriftStatus::Stable;

    const std::size_t old_part = cfg_.window_size - cfg_.stat_size;
    // Sample stat_size distinct indices from the older part (partial Fisher-Yates).
    std::vector<std::size_t> idx(old_part);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::vector<double> sample;
    sample.reserve(cfg_.stat_size);
    for (std::size_t i = 0; i < cfg_.stat_size; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, old_part - 1);
        std::swap(idx[i], idx[pick(rng_)]);
        sample.push_back(window_[idx[i]]);
    }
    std::vector<double> recent(window_.end() - static_cast<std::ptrdiff_t>(cfg_.stat_size), window_.end());

    const double stat = ks_statistic(sample, recent);
    p_value_ = ks_pvalue_equal_sizes(cfg_.stat_size, stat);
    if (p_value_ <= cfg_.alpha && stat > 0.1) {
        // Keep only the newest values as the start of the next window.
        window_.assign(recent.begin(), recent.end());
        clear_sample_count();
        return DriftStatus::Drift;
    }
    return DriftStatus::Stable;
}

// ---------------------------------------------------------------------------
// HDDM

HddmDetector::HddmDetector(HddmConfig cfg) : cfg_(cfg) {
    if (!(cfg_.drift_confidence > 0.0 && cfg_.drift_confidence < 1.0 && cfg_.warn_confidence > 0.0 &&
          cfg_.warn_confidence < 1.0))
        throw ValidationError("HDDM confidences must be in (0,1)");
    if (cfg_.mode == HddmConfig::Mode::W && !(cfg_.lambda > 0.0 && cfg_.lambda < 1.0))
        throw ValidationError("HDDM_W lambda must be in (0,1)");
    reset();
}

void HddmDetector::reset() {
    n_ = 0;
    total_ = c_min_ = 0.0;
    n_min_ = 0;
    all_ = sample1_ = sample2_ = Ewma{};
    incr_cutpoint_ = std::numeric_limits<double>::infinity();
    clear_sample_count();
}

double HddmDetector::estimation() const {
    if (cfg_.mode == HddmConfig::Mode::A) return n_ ? total_ / static_cast<double>(n_) : 0.0;
    return all_.estimate < 0.0 ? 0.0 : all_.estimate;
}

DriftStatus HddmDetector::do_update(double value) {
    const DriftStatus s = cfg_.mode == HddmConfig::Mode::A ? update_a(value) : update_w(value);
    if (s != DriftStatus::Stable && samples_since_reset() < cfg_.min_samples) return DriftStatus::Stable;
    if (s == DriftStatus::Drift) reset();
    return s;
}

bool HddmDetector::a_mean_increased(double confidence) const {
    if (n_min_ == n_) return false;
    const double n = static_cast<double>(n_);
    const double nm = static_cast<double>(n_min_);
    const double m = (n - nm) / nm * (1.0 / n);
    const double bound = std::sqrt(m / 2.0 * std::log(2.0 / confidence));
    return total_ / n - c_min_ / nm >= bound;
}

DriftStatus HddmDetector::update_a(double value) {
    ++n_;
    total_ += value;
    auto hoeffding = [this](std::uint64_t n) {
        return std::sqrt(1.0 / (2.0 * static_cast<double>(n)) * std::log(1.0 / cfg_.drift_confidence));
    };
    if (n_min_ == 0 || total_ / static_cast<double>(n_) + hoeffding(n_) <=
                           c_min_ / static_cast<double>(n_min_) + hoeffding(n_min_)) {
        c_min_ = total_;
        n_min_ = n_;
    }
    if (a_mean_increased(cfg_.drift_confidence)) return DriftStatus::Drift;
    if (a_mean_increased(cfg_.warn_confidence)) return DriftStatus::Warning;
    return DriftStatus::Stable;
}

bool HddmDetector::w_mean_increased(const Ewma& s1, const Ewma& s2, double confidence) {
    if (s1.estimate < 0.0 || s2.estimate < 0.0) return false;
    const double bound = std::sqrt((s1.bound_sum + s2.bound_sum) * std::log(1.0 / confidence) / 2.0);
    return s2.estimate - s1.estimate > bound;
}

DriftStatus HddmDetector::update_w(double value) {
    ++n_;
    const double lam = cfg_.lambda;
    const double keep = 1.0 - lam;
    auto feed = [&](Ewma& e) {
        if (e.estimate < 0.0) {
            e.estimate = value;
            e.bound_sum = 1.0;
        } else {
            e.estimate = lam * value + keep * e.estimate;
            e.bound_sum = lam * lam + keep * keep * e.bound_sum;
        }
    };
    feed(all_);
    const double eps = std::sqrt(all_.bound_sum * std::log(1.0 / cfg_.drift_confidence) / 2.0);
    if (all_.estimate + eps < incr_cutpoint_) {
        incr_cutpoint_ = all_.estimate + eps;
        sample1_ = all_;
        sample2_ = Ewma{};
    } else {
        feed(sample2_);
    }
    if (w_mean_increased(sample1_, sample2_, cfg_.drift_confidence)) return DriftStatus::Drift;
    if (w_mean_increased(sample1_, sample2_, cfg_.warn_confidence)) return DriftStatus::Warning;
    return DriftStatus::Stable;
}

// ---------------------------------------------------------------------------

const std::vector<std::string>& drift_detector_names() {
    static const std::vector<std::string> names = {"ADWIN", "DDM", "EDDM", "KSWIN", "PageHinkley", "HDDM_A", "HDDM_W"};
    return names;
}

std::unique_ptr<DriftDetector> make_drift_detector(std::string_view name) {
    if (name == "ADWIN") return std::make_unique<AdwinDetector>();
    if (name == "DDM") return std::make_unique<DdmDetector>();
    if (name == "EDDM") return std::make_unique<EddmDetector>();
    if (name == "KSWIN") return std::make_unique<KswinDetector>();
    if (name == "PageHinkley") return std::make_unique<PageHinkleyDetector>();
    if (name == "HDDM_A") return std::make_unique<HddmDetector>(HddmConfig{});
    if (name == "HDDM_W") {
        HddmConfig c;
        c.mode = HddmConfig::Mode::W;
        return std::make_unique<HddmDetector>(c);
    }
    throw ValidationError("unknown drift detector '" + std::string(name) + "'");
}

}  // namespace rplids
