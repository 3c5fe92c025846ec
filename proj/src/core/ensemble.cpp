#include "rplids/ensemble.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include "rplids/csv.hpp"
#include "rplids/error.hpp"

namespace rplids {

void RangeTracker::observe(const FeatureVector& x) {
    if (!seen_) {
        lo_ = hi_ = x;
        seen_ = true;
    } else {
        for (std::size_t d = 0; d < kFeatureCount; ++d) {
            lo_[d] = std::min(lo_[d], x[d]);
            hi_[d] = std::max(hi_[d], x[d]);
        }
    }
    for (std::size_t d = 0; d < kFeatureCount; ++d) {
        const double r = hi_[d] - lo_[d];
        weights_[d] = r > 0.0 ? 1.0 / r : 0.0;
    }
}

// ---------------------------------------------------------------------------

SlidingKnn::SlidingKnn(KnnConfig cfg) : cfg_(cfg) {
    if (cfg_.capacity == 0) throw ValidationError("KNN capacity must be positive");
    if (cfg_.k == 0) throw ValidationError("KNN k must be positive");
}

Label SlidingKnn::predict(const FeatureVector& x, std::span<const double> weights) const {
    if (count_ == 0) throw StateError("KNN model has no stored instances");
    const std::size_t k = std::min(cfg_.k, count_);
    std::array<double, kFeatureCount> w;
    if (weights.empty())
        w.fill(1.0);
    else
        std::copy_n(weights.begin(), kFeatureCount, w.begin());

    // Small sorted buffer of (distance, age); newer items win distance ties.
    struct Cand {
        double d;
        std::size_t slot;
    };
    std::vector<Cand> best;
    best.reserve(k + 1);
    const std::size_t cap = cfg_.capacity;
    for (std::size_t p = count_; p-- > 0;) {
        std::size_t at_slot = head_ + p;
        if (at_slot >= cap) at_slot -= cap;
        const double* it = xs_.data() + at_slot * kFeatureCount;
        static_assert(kFeatureCount % 6 == 0);
        // Partial sums only grow, so a candidate can be dropped as soon as it
        // passes the current k-th best.
        const double cut = best.size() == k ? best.back().d : std::numeric_limits<double>::infinity();
        // Six running sums keep the adds independent.
        double acc[6] = {};
        double s = 0.0;
        for (std::size_t d = 0; d < kFeatureCount && s < cut; d += 6) {
            for (std::size_t j = 0; j < 6; ++j) {
                const double t = (it[d + j] - x[d + j]) * w[d + j];
                acc[j] += t * t;
            }
            s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + (acc[4] + acc[5]);
        }
        if (s >= cut) continue;
        auto at = std::upper_bound(best.begin(), best.end(), s, [](double v, const Cand& c) { return v < c.d; });
        best.insert(at, Cand{s, at_slot});
        if (best.size() > k) best.pop_back();
    }

    std::array<double, Label::kIndexCount> tally{};
    for (const auto& c : best) tally[static_cast<std::size_t>(ys_[c.slot].index())] += ws_[c.slot];
    std::size_t win = 0;
    for (std::size_t i = 1; i < tally.size(); ++i)
        if (tally[i] > tally[win]) win = i;
    return Label::from_index(static_cast<int>(win));
}

void SlidingKnn::learn(const FeatureVector& x, const Label& y, double weight) {
    const std::size_t cap = cfg_.capacity;
    if (xs_.empty()) {
        xs_.resize(cap * kFeatureCount);
        ys_.resize(cap);
        ws_.resize(cap);
    }
    std::size_t s;
    if (count_ < cap) {
        s = slot(count_);
        ++count_;
    } else {
        s = head_;  // overwrite the oldest
        head_ = (head_ + 1) % cap;
    }
    std::copy(x.begin(), x.end(), xs_.begin() + static_cast<std::ptrdiff_t>(s * kFeatureCount));
    ys_[s] = y;
    ws_[s] = weight;
}

void SlidingKnn::truncate(std::size_t keep) {
    if (count_ <= keep) return;
    head_ = slot(count_ - keep);
    count_ = keep;
}

// ---------------------------------------------------------------------------

KnnAdwin::KnnAdwin(KnnConfig cfg, AdwinConfig adwin) : knn_(cfg), adwin_(adwin) {}

bool KnnAdwin::learn(const FeatureVector& x, const Label& y, double weight, std::span<const double> weights,
                     std::optional<Label> known) {
    bool fired = false;
    if (!knn_.empty()) {
        const Label pred = known ? *known : knn_.predict(x, weights);
        const double err = pred == y ? 0.0 : 1.0;
        if (adwin_.update(err) == DriftStatus::Drift) {
            knn_.truncate(static_cast<std::size_t>(adwin_.width()));
            fired = true;
        }
    }
    knn_.learn(x, y, weight);
    return fired;
}

// ---------------------------------------------------------------------------

double poisson_pmf_weight(unsigned k) {
    return std::exp(-1.0 - std::lgamma(static_cast<double>(k) + 1.0));
}

std::optional<std::size_t> select_loser(std::span<const double> errors) {
    std::optional<std::size_t> idx;
    double best = 0.0;
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (errors[i] > best) {
            best = errors[i];
            idx = i;
        }
    return idx;
}

OzaEnsemble::OzaEnsemble(EnsembleConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
    if (cfg_.n_estimators == 0) throw ValidationError("ensemble needs at least one estimator");
    // Validate the KNN parameters once up front.
    SlidingKnn probe(cfg_.knn);
    (void)probe;
    for (std::size_t i = 0; i < cfg_.n_estimators; ++i) {
        members_.push_back(fresh_member());
        detectors_.push_back(cfg_.adaptive ? make_drift_detector(cfg_.detector) : nullptr);
    }
    last_draws_.assign(cfg_.n_estimators, 0);
}

OzaEnsemble::Member OzaEnsemble::fresh_member() const {
    Member m;
    // The internal detector of a KNN-ADWIN member is always ADWIN; the
    // configurable detector is the ensemble-level one.
    if (cfg_.adaptive)
        m.adwin.emplace(cfg_.knn);
    else
        m.plain.emplace(cfg_.knn);
    return m;
}

bool OzaEnsemble::cold() const {
    return std::all_of(members_.begin(), members_.end(), [](const Member& m) { return m.empty(); });
}

std::size_t OzaEnsemble::member_size(std::size_t i) const {
    const auto& m = members_.at(i);
    return m.plain ? m.plain->size() : m.adwin->size();
}

const std::vector<std::optional<Label>>& OzaEnsemble::cached_votes(const FeatureVector& x) const {
    if (cache_valid_ && cache_x_ == x) return cache_votes_;
    cache_votes_.assign(members_.size(), std::nullopt);
    const auto w = std::span<const double>(ranges_.weights());
    for (std::size_t i = 0; i < members_.size(); ++i)
        if (!members_[i].empty()) cache_votes_[i] = members_[i].predict(x, w);
    cache_x_ = x;
    cache_valid_ = true;
    return cache_votes_;
}

std::vector<std::optional<Label>> OzaEnsemble::votes(const FeatureVector& x) const { return cached_votes(x); }

Label tally_votes(std::span<const std::optional<Label>> votes) {
    std::array<int, Label::kIndexCount> tally{};
    bool any = false;
    for (const auto& v : votes)
        if (v) {
            ++tally[static_cast<std::size_t>(v->index())];
            any = true;
        }
    if (!any) throw StateError("no member voted");
    std::size_t win = 0;
    for (std::size_t i = 1; i < tally.size(); ++i)
        if (tally[i] > tally[win]) win = i;
    return Label::from_index(static_cast<int>(win));
}

Label OzaEnsemble::predict(const FeatureVector& x) const {
    if (cold()) throw StateError("ensemble has not been trained");
    return tally_votes(cached_votes(x));
}

void OzaEnsemble::learn(const FeatureVector& x, const Label& y) {
    ++step_;
    // Errors are judged with the scaling in force before x is observed, the
    // same state a preceding predict(x) used.
    const std::vector<std::optional<Label>> before_votes = cached_votes(x);
    ranges_.observe(x);
    cache_valid_ = false;
    const auto w = std::span<const double>(ranges_.weights());
    std::poisson_distribution<unsigned> poisson(1.0);
    bool change = false;

    for (std::size_t i = 0; i < members_.size(); ++i) {
        Member& m = members_[i];
        if (detectors_[i] && before_votes[i]) {
            const double err = *before_votes[i] == y ? 0.0 : 1.0;
            const double before = detectors_[i]->estimation();
            if (detectors_[i]->update(err) == DriftStatus::Drift) {
                pending_events_.push_back(std::string(detectors_[i]->name()) + ":Drift:m" + std::to_string(i));
                // Only a rise in error counts as a reason to replace.
                if (detectors_[i]->estimation() > before) change = true;
            }
        }

        const unsigned k = poisson(rng_);
        last_draws_[i] = k;
        if (cfg_.weight_mode == WeightMode::RepeatK) {
            for (unsigned r = 0; r < k; ++r) {
                if (m.plain)
                    m.plain->learn(x, y);
                else if (r == 0)
                    m.adwin->learn(x, y, 1.0, w, before_votes[i]);
                else
                    m.adwin->repeat(x, y);  // the member's monitor sees each instance once
            }
        } else {
            const double wt = poisson_pmf_weight(k);
            if (m.plain)
                m.plain->learn(x, y, wt);
            else
                m.adwin->learn(x, y, wt, w, before_votes[i]);
        }
    }
    if (change) replace_loser();
}

std::optional<std::size_t> OzaEnsemble::replace_loser() {
    if (!cfg_.adaptive) return std::nullopt;
    std::vector<double> errors(members_.size(), 0.0);
    for (std::size_t i = 0; i < members_.size(); ++i) errors[i] = detectors_[i]->estimation();
    auto idx = select_loser(errors);
    if (!idx) return std::nullopt;
    replacements_.push_back(ReplacementEvent{step_, *idx, errors[*idx]});
    pending_events_.push_back("replace:m" + std::to_string(*idx) + ":err=" + csv::format_double(errors[*idx]));
    members_[*idx] = fresh_member();
    cache_valid_ = false;
    detectors_[*idx] = detectors_[*idx]->fresh();
    return idx;
}

std::vector<std::string> OzaEnsemble::drain_events() {
    std::vector<std::string> out;
    out.swap(pending_events_);
    return out;
}

}  // namespace rplids
