#pragma once

#include <cstdint>
#include <deque>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <vector>

namespace rplids {

enum class DriftStatus { Stable, Warning, Drift };
std::string_view to_string(DriftStatus s);

// Streaming change detector over a real signal in [0,1], typically the 0/1
// misclassification indicator of a classifier. Status sequences are a pure
// function of (configuration, input sequence).
class DriftDetector {
public:
    virtual ~DriftDetector() = default;

    // Throws ValidationError when value is not finite or outside [0,1].
    DriftStatus update(double value);

    // Back to the freshly constructed state; configuration is kept.
    virtual void reset() = 0;
    // Current estimate of the monitored signal's mean (error rate).
    virtual double estimation() const = 0;
    virtual std::string_view name() const = 0;
    // A new detector with the same configuration in its initial state.
    virtual std::unique_ptr<DriftDetector> fresh() const = 0;

    std::uint64_t samples_since_reset() const { return samples_; }

protected:
    virtual DriftStatus do_update(double value) = 0;
    void clear_sample_count() { samples_ = 0; }

private:
    std::uint64_t samples_ = 0;
};

// ---------------------------------------------------------------------------
// ADWIN: adaptive window kept as an exponential histogram of buckets. Row i
// holds buckets summarizing 2^i values each, at most max_buckets per row.

struct AdwinConfig {
    double delta = 0.002;
    int max_buckets = 5;
    int clock = 1;       // run the cut test every `clock` updates
    int min_window = 5;  // minimum sub-window length term of the cut bound
};

class AdwinDetector final : public DriftDetector {
public:
    explicit AdwinDetector(AdwinConfig cfg = {});

    void reset() override;
    double estimation() const override { return width_ ? total_ / static_cast<double>(width_) : 0.0; }
    std::string_view name() const override { return "ADWIN"; }
    std::unique_ptr<DriftDetector> fresh() const override { return std::make_unique<AdwinDetector>(cfg_); }

    // Throws StateError when the window is empty.
    double window_mean() const;
    std::uint64_t width() const { return width_; }
    double variance() const { return width_ ? variance_ / static_cast<double>(width_) : 0.0; }
    std::size_t bucket_count() const;
    const AdwinConfig& config() const { return cfg_; }

    // Bucket sizes by row, newest first within a row; exposed for invariant checks.
    std::vector<std::vector<std::uint64_t>> bucket_sizes() const;

protected:
    DriftStatus do_update(double value) override;

private:
    struct Bucket {
        double sum = 0.0;
        double var = 0.0;  // sum of squared deviations within the bucket
    };
    using Row = std::deque<Bucket>;  // front = newest

    void insert(double value);
    void compress();
    void drop_oldest();
    bool cut(std::uint64_t n0, std::uint64_t n1, double mean0, double mean1) const;
    bool detect();

    AdwinConfig cfg_;
    std::vector<Row> rows_;
    std::uint64_t width_ = 0;
    double total_ = 0.0;
    double variance_ = 0.0;
    std::uint64_t tick_ = 0;
};

// ---------------------------------------------------------------------------

struct DdmConfig {
    double warn_coeff = 2.0;
    double drift_coeff = 3.0;
    std::uint64_t min_samples = 30;
};

class DdmDetector final : public DriftDetector {
public:
    explicit DdmDetector(DdmConfig cfg = {});
    void reset() override;
    double estimation() const override { return p_; }
    std::string_view name() const override { return "DDM"; }
    std::unique_ptr<DriftDetector> fresh() const override { return std::make_unique<DdmDetector>(cfg_); }
    double min_p_plus_s() const { return p_min_ + s_min_; }

protected:
    DriftStatus do_update(double value) override;

private:
    DdmConfig cfg_;
    std::uint64_t n_ = 0;
    double p_ = 0.0;
    double s_ = 0.0;
    double p_min_;
    double s_min_;
};

// ---------------------------------------------------------------------------
// EDDM monitors the distance (in samples) between consecutive errors; a value
// above 0.5 counts as an error.

struct EddmConfig {
    double warn_threshold = 0.95;   // alpha
    double drift_threshold = 0.90;  // beta
    std::uint64_t min_errors = 30;
    std::uint64_t min_samples = 30;
};

class EddmDetector final : public DriftDetector {
public:
    explicit EddmDetector(EddmConfig cfg = {});
    void reset() override;
    double estimation() const override;
    std::string_view name() const override { return "EDDM"; }
    std::unique_ptr<DriftDetector> fresh() const override { return std::make_unique<EddmDetector>(cfg_); }

protected:
    DriftStatus do_update(double value) override;

private:
    EddmConfig cfg_;
    std::uint64_t n_ = 0;
    std::uint64_t errors_ = 0;
    std::uint64_t last_error_at_ = 0;
    double mean_ = 0.0;
    double m2_ = 0.0;
    double max_m2s_ = 0.0;
    double error_rate_ = 0.0;
};

// ---------------------------------------------------------------------------

struct PageHinkleyConfig {
    double delta = 0.005;
    double lambda = 50.0;
    std::uint64_t min_samples = 30;
};

class PageHinkleyDetector final : public DriftDetector {
public:
    explicit PageHinkleyDetector(PageHinkleyConfig cfg = {});
    void reset() override;
    double estimation() const override { return mean_; }
    std::string_view name() const override { return "PageHinkley"; }
    std::unique_ptr<DriftDetector> fresh() const override {
        return std::make_unique<PageHinkleyDetector>(cfg_);
    }
    double cumulative() const { return m_; }
    double minimum() const { return min_m_; }

protected:
    DriftStatus do_update(double value) override;

private:
    PageHinkleyConfig cfg_;
    std::uint64_t n_ = 0;
    double mean_ = 0.0;
    double m_ = 0.0;
    double min_m_ = 0.0;
};

// ---------------------------------------------------------------------------
// KSWIN: two-sample Kolmogorov-Smirnov test between the newest stat_size
// values and a random sample of the older part of a sliding window.

struct KswinConfig {
    std::size_t window_size = 100;
    std::size_t stat_size = 30;
    double alpha = 0.005;
    std::uint64_t seed = 42;
};

class KswinDetector final : public DriftDetector {
public:
    explicit KswinDetector(KswinConfig cfg = {});
    void reset() override;
    double estimation() const override;
    std::string_view name() const override { return "KSWIN"; }
    std::unique_ptr<DriftDetector> fresh() const override { return std::make_unique<KswinDetector>(cfg_); }
    std::size_t buffered() const { return window_.size(); }
    double last_p_value() const { return p_value_; }

protected:
    DriftStatus do_update(double value) override;

private:
    KswinConfig cfg_;
    std::deque<double> window_;
    std::mt19937_64 rng_;
    double p_value_ = 1.0;
};

// Two-sided exact p-value P(D >= d) for two samples of equal size n.
double ks_pvalue_equal_sizes(std::size_t n, double d);
// KS statistic sup|F1 - F2| of two samples.
double ks_statistic(std::vector<double> a, std::vector<double> b);

// ---------------------------------------------------------------------------
// HDDM with Hoeffding bounds: A = moving average test, W = EWMA test.
// Monitors increases of the mean (one-sided).

struct HddmConfig {
    enum class Mode { A, W };
    Mode mode = Mode::A;
    double warn_confidence = 0.005;
    double drift_confidence = 0.001;
    double lambda = 0.05;  // W-mode forgetting factor
    std::uint64_t min_samples = 30;
};

class HddmDetector final : public DriftDetector {
public:
    explicit HddmDetector(HddmConfig cfg = {});
    void reset() override;
    double estimation() const override;
    std::string_view name() const override { return cfg_.mode == HddmConfig::Mode::A ? "HDDM_A" : "HDDM_W"; }
    std::unique_ptr<DriftDetector> fresh() const override { return std::make_unique<HddmDetector>(cfg_); }
    HddmConfig::Mode mode() const { return cfg_.mode; }

protected:
    DriftStatus do_update(double value) override;

private:
    struct Ewma {
        double estimate = -1.0;  // negative = no samples yet
        double bound_sum = 0.0;  // independent bounded condition sum
    };

    DriftStatus update_a(double value);
    DriftStatus update_w(double value);
    bool a_mean_increased(double confidence) const;
    static bool w_mean_increased(const Ewma& s1, const Ewma& s2, double confidence);

    HddmConfig cfg_;
    std::uint64_t n_ = 0;
    // A mode
    double total_ = 0.0;
    double c_min_ = 0.0;
    std::uint64_t n_min_ = 0;
    // W mode
    Ewma all_;
    Ewma sample1_;
    Ewma sample2_;
    double incr_cutpoint_;
};

// Names: ADWIN, DDM, EDDM, KSWIN, PageHinkley, HDDM_A, HDDM_W.
std::unique_ptr<DriftDetector> make_drift_detector(std::string_view name);
const std::vector<std::string>& drift_detector_names();

}  // namespace rplids
