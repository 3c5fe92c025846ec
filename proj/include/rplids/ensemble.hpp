#pragma once

#include <memory>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "rplids/drift.hpp"
#include "rplids/types.hpp"

namespace rplids {

// Running per-dimension min/max over everything the ensemble has learned.
// weights() returns 1/range per dimension (0 for constant dimensions) so a
// weighted Euclidean distance equals distance after min-max scaling.
class RangeTracker {
public:
    void observe(const FeatureVector& x);
    bool empty() const { return !seen_; }
    const FeatureVector& weights() const { return weights_; }

private:
    bool seen_ = false;
    FeatureVector lo_{};
    FeatureVector hi_{};
    FeatureVector weights_{};
};

struct KnnConfig {
    std::size_t capacity = 1000;
    std::size_t k = 6;
};

// FIFO window of (x, y, weight). Prediction is a weighted majority among the
// k nearest; vote ties go to the lower Label::index() (Normal first).
class SlidingKnn {
public:
    explicit SlidingKnn(KnnConfig cfg = {});

    // `weights` scales each dimension before distances; empty = unit weights.
    // Throws StateError when empty.
    Label predict(const FeatureVector& x, std::span<const double> weights = {}) const;
    void learn(const FeatureVector& x, const Label& y, double weight = 1.0);

    std::size_t size() const { return count_; }
    bool empty() const { return count_ == 0; }
    const KnnConfig& config() const { return cfg_; }
    // Drops all but the newest `keep` items.
    void truncate(std::size_t keep);
    void clear() { head_ = count_ = 0; }

private:
    // Ring buffer; slot (head_ + i) % capacity holds the i-th oldest item.
    std::size_t slot(std::size_t i) const { return (head_ + i) % cfg_.capacity; }
    KnnConfig cfg_;
    std::vector<double> xs_;  // capacity * kFeatureCount, row per slot
    std::vector<Label> ys_;
    std::vector<double> ws_;
    std::size_t head_ = 0, count_ = 0;
};

// Sliding KNN that monitors its own prequential error with ADWIN and
// truncates its window to the ADWIN width when that detector fires.
class KnnAdwin {
public:
    explicit KnnAdwin(KnnConfig cfg = {}, AdwinConfig adwin = {});

    Label predict(const FeatureVector& x, std::span<const double> weights = {}) const {
        return knn_.predict(x, weights);
    }
    // Returns true if the internal detector fired on this update. `known` is
    // the current prediction for x when the caller already has it.
    bool learn(const FeatureVector& x, const Label& y, double weight = 1.0, std::span<const double> weights = {},
               std::optional<Label> known = std::nullopt);
    // Stores another copy without touching the error monitor.
    void repeat(const FeatureVector& x, const Label& y) { knn_.learn(x, y, 1.0); }

    std::size_t size() const { return knn_.size(); }
    bool empty() const { return knn_.empty(); }
    const AdwinDetector& adwin() const { return adwin_; }
    const SlidingKnn& knn() const { return knn_; }

private:
    SlidingKnn knn_;
    AdwinDetector adwin_;
};

enum class WeightMode {
    RepeatK,     // train k ~ Poisson(1) times
    PoissonPmf,  // train once with weight e^-1 / k!
};

double poisson_pmf_weight(unsigned k);

struct EnsembleConfig {
    std::size_t n_estimators = 8;
    KnnConfig knn{};
    WeightMode weight_mode = WeightMode::RepeatK;
    // false: plain SlidingKnn members, no per-model detectors, no replacement.
    bool adaptive = true;
    std::string detector = "ADWIN";  // per-model detector when adaptive
    std::uint64_t seed = 1;
};

struct ReplacementEvent {
    std::uint64_t step = 0;
    std::size_t model = 0;
    double window_error = 0.0;
};

// Kronecker vote count over members that voted; ties go to the lower
// Label::index(). Throws StateError when nobody voted.
Label tally_votes(std::span<const std::optional<Label>> votes);

// Index of the highest error (first on ties); nullopt when all are zero.
std::optional<std::size_t> select_loser(std::span<const double> errors);

class OzaEnsemble {
public:
    explicit OzaEnsemble(EnsembleConfig cfg = {});

    // Each member's vote; nullopt for members that have not seen data.
    std::vector<std::optional<Label>> votes(const FeatureVector& x) const;
    // Throws StateError when every member is empty.
    Label predict(const FeatureVector& x) const;
    void learn(const FeatureVector& x, const Label& y);

    // Replaces the member whose detector reports the highest error estimate.
    // Returns the replaced index, if any.
    std::optional<std::size_t> replace_loser();

    // Adapters for prequential_run.
    Label predict(const Instance& x) const { return predict(x.features); }
    void learn(const Instance& x, const Label& y) { learn(x.features, y); }
    std::vector<std::string> drain_events();

    std::size_t size() const { return members_.size(); }
    bool cold() const;
    std::uint64_t steps() const { return step_; }
    const EnsembleConfig& config() const { return cfg_; }
    const std::vector<ReplacementEvent>& replacements() const { return replacements_; }
    std::size_t member_size(std::size_t i) const;
    const DriftDetector* detector(std::size_t i) const { return detectors_.at(i).get(); }
    // Last Poisson draw per member; exposed for tests.
    const std::vector<unsigned>& last_draws() const { return last_draws_; }

private:
    struct Member {
        std::optional<SlidingKnn> plain;
        std::optional<KnnAdwin> adwin;
        bool empty() const { return plain ? plain->empty() : adwin->empty(); }
        Label predict(const FeatureVector& x, std::span<const double> w) const {
            return plain ? plain->predict(x, w) : adwin->predict(x, w);
        }
    };

    Member fresh_member() const;
    const std::vector<std::optional<Label>>& cached_votes(const FeatureVector& x) const;

    EnsembleConfig cfg_;
    std::vector<Member> members_;
    std::vector<std::unique_ptr<DriftDetector>> detectors_;
    std::vector<unsigned> last_draws_;
    RangeTracker ranges_;
    std::mt19937_64 rng_;
    std::uint64_t step_ = 0;
    std::vector<ReplacementEvent> replacements_;
    std::vector<std::string> pending_events_;
    // Votes for the most recent query; cleared whenever any member changes.
    mutable bool cache_valid_ = false;
    mutable FeatureVector cache_x_{};
    mutable std::vector<std::optional<Label>> cache_votes_;
};

}  // namespace rplids
