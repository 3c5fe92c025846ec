#pragma once

#include <concepts>
#include <deque>
#include <span>
#include <string>
#include <vector>

#include "rplids/error.hpp"
#include "rplids/metrics.hpp"
#include "rplids/types.hpp"

namespace rplids {

template <class L>
concept StreamLearner = requires(L& l, const Instance& x, const Label& y) {
    { l.predict(x) } -> std::convertible_to<Label>;
    l.learn(x, y);
};

// Learners may optionally report events (drift, replacement) raised since
// the previous call; they land in the drift_events column of the log.
template <class L>
concept EventSource = requires(L& l) {
    { l.drain_events() } -> std::convertible_to<std::vector<std::string>>;
};

struct PrequentialConfig {
    std::size_t label_delay = 0;
    std::size_t moving_window = 200;
};

struct StepRecord {
    std::uint64_t step = 0;
    Label truth;
    Label prediction;
    Metrics cumulative;
    Metrics moving;
    std::string events;  // ';'-separated "detector:status" entries
};

struct PrequentialLog {
    std::vector<StepRecord> steps;
    ConfusionCounts cumulative;
    KindBreakdown per_kind;

    void write_csv(const std::string& path) const;
};

// Interleaved test-then-train. Every instance is predicted first; its label is
// handed to the learner `label_delay` steps later (delay 0 = classic ordering).
template <StreamLearner L>
PrequentialLog prequential_run(std::span<const Instance> stream, L& model,
                               const PrequentialConfig& cfg = {}) {
    PrequentialLog log;
    log.steps.reserve(stream.size());
    WindowedConfusion window(cfg.moving_window);
    std::deque<std::size_t> pending;

    for (std::size_t t = 0; t < stream.size(); ++t) {
        const Instance& x = stream[t];
        if (!x.label) throw ValidationError("prequential stream instance " + std::to_string(t) + " has no label");

        const Label pred = model.predict(x);
        log.cumulative = update_confusion(log.cumulative, *x.label, pred);
        window.push(*x.label, pred);
        log.per_kind.add(*x.label, pred);

        pending.push_back(t);
        while (!pending.empty() && pending.front() + cfg.label_delay <= t) {
            const Instance& due = stream[pending.front()];
            model.learn(due, *due.label);
            pending.pop_front();
        }

        StepRecord rec;
        rec.step = t;
        rec.truth = *x.label;
        rec.prediction = pred;
        rec.cumulative = metrics(log.cumulative);
        rec.moving = metrics(window.counts());
        if constexpr (EventSource<L>) {
            const std::vector<std::string> ev = model.drain_events();
            for (std::size_t i = 0; i < ev.size(); ++i) {
                if (i) rec.events.push_back(';');
                rec.events += ev[i];
            }
        }
        log.steps.push_back(std::move(rec));
    }
    // Labels still in flight once the stream ends are delivered so the model
    // state reflects every instance.
    while (!pending.empty()) {
        const Instance& due = stream[pending.front()];
        model.learn(due, *due.label);
        pending.pop_front();
    }
    return log;
}

}  // namespace rplids
