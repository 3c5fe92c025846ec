#include "rplids/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <regex>
#include <sstream>
#include <tuple>

#include "rplids/csv.hpp"
#include "rplids/error.hpp"
#include "rplids/prequential.hpp"

namespace rplids {

namespace fs = std::filesystem;

void validate(const ExperimentSpec& spec) {
    validate(spec.sim);
    if (spec.seeds.empty()) throw ValidationError("seed list must not be empty");
    if (spec.attacks.empty()) throw ValidationError("attack set must not be empty");
    if (!(spec.pretrain_fraction > 0.0 && spec.pretrain_fraction < 1.0))
        throw ValidationError("pretrain_fraction must be in (0,1)");
    if (spec.pool_cap < 2) throw ValidationError("pool_cap must be at least 2");
    if (!(spec.ids.gate.nu > 0.0 && spec.ids.gate.nu <= 1.0)) throw ValidationError("nu must be in (0,1]");
    if (!(spec.ids.gate.gamma > 0.0)) throw ValidationError("gamma must be positive");
    if (spec.ids.ensemble.n_estimators == 0) throw ValidationError("estimators must be positive");
    if (spec.ids.ensemble.knn.k == 0) throw ValidationError("neighbors must be positive");
    if (!(spec.ids.quantile > 0.0 && spec.ids.quantile < 1.0)) throw ValidationError("quantile must be in (0,1)");
    if (spec.ids.forest.trees == 0 || spec.ids.forest.window == 0) throw ValidationError("forest trees and window must be positive");
    if (spec.ids.forest.depth < 1 || spec.ids.forest.depth > 24) throw ValidationError("forest depth must be in 1..24");
    if (spec.ids.ensemble.knn.capacity == 0) throw ValidationError("knn_window must be positive");
    if (!(spec.features.horizon > 0.0)) throw ValidationError("horizon must be positive");
    make_drift_detector(spec.ids.ensemble.detector);  // throws on unknown names
}

namespace {

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    for (auto f : csv::split(v, ',')) {
        std::string item(f);
        item.erase(0, item.find_first_not_of(" \t"));
        item.erase(item.find_last_not_of(" \t") + 1);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

double number(const std::string& key, const std::string& v) {
    double d = 0.0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), d);
    if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(d))
        throw ValidationError(key + ": expected a number, got '" + v + "'");
    return d;
}

std::uint64_t whole(const std::string& key, const std::string& v) {
    std::uint64_t n = 0;
    const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
    if (ec != std::errc() || p != v.data() + v.size())
        throw ValidationError(key + ": expected a non-negative integer, got '" + v + "'");
    return n;
}

}  // namespace

void apply_experiment_entry(ExperimentSpec& spec, const std::string& key, const std::string& v) {
    auto& ids = spec.ids;
    if (key == "seeds") {
        spec.seeds.clear();
        for (const auto& s : split_list(v)) spec.seeds.push_back(whole(key, s));
    } else if (key == "attacks") {
        spec.attacks.clear();
        for (const auto& a : split_list(v)) {
            const auto k = parse_attack_kind(a);
            if (!k) throw ValidationError("unknown attack '" + a + "'");
            spec.attacks.push_back(*k);
        }
    } else if (key == "nu") ids.gate.nu = number(key, v);
    else if (key == "gamma") ids.gate.gamma = number(key, v);
    else if (key == "estimators") ids.ensemble.n_estimators = whole(key, v);
    else if (key == "neighbors") ids.ensemble.knn.k = whole(key, v);
    else if (key == "knn_window") ids.ensemble.knn.capacity = whole(key, v);
    else if (key == "drift_detector") ids.ensemble.detector = v;
    else if (key == "trees") ids.forest.trees = whole(key, v);
    else if (key == "depth") ids.forest.depth = static_cast<int>(whole(key, v));
    else if (key == "forest_window") ids.forest.window = whole(key, v);
    else if (key == "quantile") ids.quantile = number(key, v);
    else if (key == "label_delay") ids.label_delay = whole(key, v);
    else if (key == "pretrain_fraction") spec.pretrain_fraction = number(key, v);
    else if (key == "pool_cap") spec.pool_cap = whole(key, v);
    else if (key == "horizon") spec.features.horizon = number(key, v);
    else apply_sim_config_entry(spec.sim, key, v);
}

ExperimentSpec read_experiment_spec(const std::string& path) {
    auto in = csv::open_input(path);
    ExperimentSpec spec;
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        const auto eq = line.find('=');
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        if (eq == std::string::npos) throw ParseError("expected key=value", ln);
        auto trim = [](std::string x) {
            x.erase(0, x.find_first_not_of(" \t\r"));
            x.erase(x.find_last_not_of(" \t\r") + 1);
            return x;
        };
        try {
            apply_experiment_entry(spec, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(ln) + ": " + e.what());
        }
    }
    return spec;
}

namespace {

std::vector<Instance> observe(const SimConfig& cfg, const FeatureConfig& fc) {
    const auto sim = run_simulation(cfg);
    return extract_labeled(sim.events, sim.detectors, fc);
}

}  // namespace

SeedData prepare_seed(const ExperimentSpec& spec, std::uint64_t seed) {
    SeedData d;
    d.seed = seed;
    SimConfig cfg = spec.sim;
    cfg.seed = seed;
    cfg.attack.reset();
    d.normal = observe(cfg, spec.features);
    const double split = spec.pretrain_fraction * cfg.duration;
    for (AttackKind k : spec.attacks) {
        cfg.attack = k;
        auto all = observe(cfg, spec.features);
        auto& head = d.pretrain[k];
        auto& tail = d.eval[k];
        for (auto& x : all) (x.timestamp < split ? head : tail).push_back(std::move(x));
    }
    return d;
}

std::vector<Instance> pretraining_pool(const SeedData& data, std::span<const AttackKind> known, std::size_t cap) {
    std::vector<const Instance*> all;
    for (AttackKind k : known) {
        auto it = data.pretrain.find(k);
        if (it == data.pretrain.end()) throw ValidationError("no pre-training data for " + std::string(to_string(k)));
        for (const auto& x : it->second) all.push_back(&x);
    }
    std::vector<Instance> pool;
    const std::size_t n = all.size();
    const std::size_t take = std::min(n, cap);
    pool.reserve(take);
    for (std::size_t i = 0; i < take; ++i) pool.push_back(*all[n > cap ? i * n / cap : i]);
    // Interleave the runs in time so the KNN windows end up holding every
    // known kind, not just the last run's tail.
    std::stable_sort(pool.begin(), pool.end(), [](const Instance& a, const Instance& b) {
        return std::tie(a.timestamp, a.sender, a.placement) < std::tie(b.timestamp, b.sender, b.placement);
    });
    return pool;
}

StreamResult run_stream(const HybridConfig& cfg, std::span<const Instance> normal, std::span<const Instance> pool,
                        std::span<const Instance> eval) {
    HybridIds ids(cfg);
    ids.warmup(normal, pool);
    StreamResult r;
    r.verdicts.reserve(eval.size());
    for (std::size_t i = 0; i < eval.size(); ++i) {
        const auto v = ids.process(eval[i]);
        r.verdicts.push_back(make_record(i, eval[i], v));
        for (auto& e : ids.drain_events()) r.events.push_back(std::to_string(i) + ":" + e);
    }
    ids.flush();
    r.counters = ids.counters();
    return r;
}

ConfusionCounts tally(std::span<const VerdictRecord> rows) {
    ConfusionCounts cc;
    for (const auto& r : rows) {
        if (!r.truth) continue;
        const bool alarm = r.verdict != VerdictKind::Normal;
        if (r.truth->is_attack())
            (alarm ? cc.tp : cc.fn)++;
        else
            (alarm ? cc.fp : cc.tn)++;
    }
    return cc;
}

namespace {

std::string prediction_name(const VerdictRecord& r) {
    switch (r.verdict) {
        case VerdictKind::Normal: return "Normal";
        case VerdictKind::KnownAttack: return std::string(to_string(*r.attack));
        case VerdictKind::UnknownAnomaly: return "Unknown";
    }
    return "?";
}

}  // namespace

void write_step_metrics(const std::string& path, std::span<const VerdictRecord> rows, std::size_t window) {
    auto out = csv::open_output(path);
    out << "step,truth,prediction,cumulative_acc,cumulative_f1,cumulative_kappa,cumulative_fpr,"
           "cumulative_fnr,moving_acc,moving_f1,moving_kappa,drift_events\n";
    ConfusionCounts cum;
    WindowedConfusion win(window);
    // A stand-in attack label carries "alarm" into the binary counters.
    const Label alarm = Label::attack(AttackKind::SH);
    for (const auto& r : rows) {
        if (!r.truth) continue;
        const Label pred = r.verdict == VerdictKind::Normal ? Label::normal() : alarm;
        const Label truth = r.truth->is_attack() ? alarm : Label::normal();
        cum = update_confusion(cum, truth, pred);
        win.push(truth, pred);
        const Metrics c = metrics(cum);
        const Metrics m = metrics(win.counts());
        out << r.step << ',' << r.truth->name() << ',' << prediction_name(r) << ',' << csv::format_double(c.accuracy)
            << ',' << csv::format_double(c.f1) << ',' << csv::format_double(c.kappa) << ','
            << csv::format_double(c.fpr) << ',' << csv::format_double(c.fnr) << ','
            << csv::format_double(m.accuracy) << ',' << csv::format_double(m.f1) << ','
            << csv::format_double(m.kappa) << ",\n";
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

namespace {

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int scenario_code(const std::string& name) {
    auto k = parse_attack_kind(name);
    return k ? static_cast<int>(*k) : kAttackKindCount;
}

}  // namespace

std::vector<SummaryRow> with_medians(std::vector<SummaryRow> rows) {
    std::erase_if(rows, [](const SummaryRow& r) { return !r.seed; });
    std::stable_sort(rows.begin(), rows.end(), [](const SummaryRow& a, const SummaryRow& b) {
        const int ca = scenario_code(a.scenario), cb = scenario_code(b.scenario);
        if (ca != cb) return ca < cb;
        if (a.scenario != b.scenario) return a.scenario < b.scenario;
        return *a.seed < *b.seed;
    });
    std::vector<SummaryRow> out;
    for (std::size_t i = 0; i < rows.size();) {
        std::size_t j = i;
        SummaryRow med;
        med.scenario = rows[i].scenario;
        std::vector<double> acc, prec, rec, f1, fpr, fnr, kappa;
        for (; j < rows.size() && rows[j].scenario == rows[i].scenario; ++j) {
            out.push_back(rows[j]);
            med.counts.tp += rows[j].counts.tp;
            med.counts.fp += rows[j].counts.fp;
            med.counts.tn += rows[j].counts.tn;
            med.counts.fn += rows[j].counts.fn;
            acc.push_back(rows[j].m.accuracy);
            prec.push_back(rows[j].m.precision);
            rec.push_back(rows[j].m.recall);
            f1.push_back(rows[j].m.f1);
            fpr.push_back(rows[j].m.fpr);
            fnr.push_back(rows[j].m.fnr);
            kappa.push_back(rows[j].m.kappa);
        }
        med.m.accuracy = median(acc);
        med.m.precision = median(prec);
        med.m.recall = median(rec);
        med.m.f1 = median(f1);
        med.m.fpr = median(fpr);
        med.m.fnr = median(fnr);
        med.m.kappa = median(kappa);
        out.push_back(med);
        i = j;
    }
    return out;
}

namespace {

std::string fx(double v) { return csv::format_fixed(v, 6); }

std::string seed_field(const SummaryRow& r) { return r.seed ? std::to_string(*r.seed) : std::string("median"); }

}  // namespace

std::string format_attack_summary(std::span<const SummaryRow> rows) {
    std::ostringstream o;
    o << "attack,seed,instances,attack_instances,accuracy,precision,recall,f1,fpr,fnr,kappa\n";
    for (const auto& r : rows)
        o << r.scenario << ',' << seed_field(r) << ',' << r.counts.total() << ',' << (r.counts.tp + r.counts.fn) << ','
          << fx(r.m.accuracy) << ',' << fx(r.m.precision) << ',' << fx(r.m.recall) << ',' << fx(r.m.f1) << ','
          << fx(r.m.fpr) << ',' << fx(r.m.fnr) << ',' << fx(r.m.kappa) << '\n';
    return o.str();
}

std::string format_unknown_summary(std::span<const SummaryRow> rows) {
    std::ostringstream o;
    o << "held_out,seed,instances,accuracy,precision,f1,tpr,fpr\n";
    for (const auto& r : rows)
        o << r.scenario << ',' << seed_field(r) << ',' << r.counts.total() << ',' << fx(r.m.accuracy) << ','
          << fx(r.m.precision) << ',' << fx(r.m.f1) << ',' << fx(r.m.recall) << ',' << fx(r.m.fpr) << '\n';
    return o.str();
}

std::string verdict_log_name(std::string_view prefix, AttackKind kind, std::uint64_t seed) {
    return std::string(prefix) + "_" + std::string(to_string(kind)) + "_s" + std::to_string(seed) + ".csv";
}

namespace {

void write_text(const std::string& path, const std::string& text) {
    auto out = csv::open_output(path);
    out << text;
    if (!out) throw IoError("failed writing '" + path + "'");
}

void ensure_dir(const std::string& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir + "': " + ec.message());
}

SummaryRow row_from(const std::string& scenario, std::uint64_t seed, std::span<const VerdictRecord> v) {
    SummaryRow r;
    r.scenario = scenario;
    r.seed = seed;
    r.counts = tally(v);
    r.m = metrics(r.counts);
    return r;
}

void write_counters(std::ostream& o, const std::string& scenario, std::uint64_t seed, const StageCounters& c) {
    o << scenario << ',' << seed << ',' << c.seen << ',' << c.gate_flagged << ',' << c.ensemble_attack << ','
      << c.forest_scored << ',' << c.forest_flagged << ',' << c.learned << '\n';
}

constexpr const char* kCounterHeader = "scenario,seed,seen,gate_flagged,ensemble_attack,forest_scored,forest_flagged,learned\n";

}  // namespace

void cmd_simulate(const SimConfig& cfg, const std::string& out_path) {
    const auto sim = run_simulation(cfg);
    write_trace(out_path, sim.events);
}

std::vector<SummaryRow> cmd_run(const ExperimentSpec& spec, const std::string& out_dir) {
    validate(spec);
    ensure_dir(out_dir);
    std::vector<SummaryRow> rows;
    std::ostringstream counters;
    counters << kCounterHeader;
    for (std::uint64_t seed : spec.seeds) {
        const SeedData data = prepare_seed(spec, seed);
        const auto pool = pretraining_pool(data, spec.attacks, spec.pool_cap);
        for (AttackKind k : spec.attacks) {
            const auto res = run_stream(spec.ids, data.normal, pool, data.eval.at(k));
            write_verdict_log((fs::path(out_dir) / verdict_log_name("verdicts", k, seed)).string(), res.verdicts);
            write_step_metrics((fs::path(out_dir) / verdict_log_name("metrics", k, seed)).string(), res.verdicts);
            write_counters(counters, std::string(to_string(k)), seed, res.counters);
            rows.push_back(row_from(std::string(to_string(k)), seed, res.verdicts));
        }
    }
    rows = with_medians(std::move(rows));
    write_text((fs::path(out_dir) / "summary.csv").string(), format_attack_summary(rows));
    write_text((fs::path(out_dir) / "stage_counters.csv").string(), counters.str());
    return rows;
}

std::vector<SummaryRow> cmd_unknown_attack(const ExperimentSpec& spec, AttackKind held_out, const std::string& out_dir) {
    validate(spec);
    ensure_dir(out_dir);
    ExperimentSpec s = spec;
    if (std::find(s.attacks.begin(), s.attacks.end(), held_out) == s.attacks.end()) s.attacks.push_back(held_out);
    std::vector<AttackKind> known;
    for (AttackKind k : s.attacks)
        if (k != held_out) known.push_back(k);
    if (known.empty()) throw ValidationError("unknown-attack runs need at least one known attack");

    std::vector<SummaryRow> rows;
    std::ostringstream counters;
    counters << kCounterHeader;
    for (std::uint64_t seed : s.seeds) {
        const SeedData data = prepare_seed(s, seed);
        const auto pool = pretraining_pool(data, known, s.pool_cap);
        for (const auto& x : pool)
            if (x.label && x.label->is_attack() && x.label->kind() == held_out)
                throw StateError("pre-training pool contains the held-out attack");
        const auto& eval = data.eval.at(held_out);
        for (const auto& x : eval)
            if (x.label && x.label->is_attack() && x.label->kind() != held_out)
                throw StateError("evaluation stream contains a known attack");
        const auto res = run_stream(s.ids, data.normal, pool, eval);
        write_verdict_log((fs::path(out_dir) / verdict_log_name("unknown", held_out, seed)).string(), res.verdicts);
        write_counters(counters, std::string(to_string(held_out)), seed, res.counters);
        rows.push_back(row_from(std::string(to_string(held_out)), seed, res.verdicts));
    }
    rows = with_medians(std::move(rows));
    write_text((fs::path(out_dir) / ("unknown_summary_" + std::string(to_string(held_out)) + ".csv")).string(),
               format_unknown_summary(rows));
    write_text((fs::path(out_dir) / ("unknown_counters_" + std::string(to_string(held_out)) + ".csv")).string(),
               counters.str());
    return rows;
}

namespace {

// Ensemble adapter that answers Normal until a member has data.
struct ColdSafe {
    OzaEnsemble& e;
    Label predict(const Instance& x) const { return e.cold() ? Label::normal() : e.predict(x); }
    void learn(const Instance& x, const Label& y) { e.learn(x, y); }
    std::vector<std::string> drain_events() { return e.drain_events(); }
};

}  // namespace

std::vector<DriftComparisonRow> cmd_compare_drift(const ExperimentSpec& spec, const std::string& out_dir,
                                                  std::size_t max_instances) {
    validate(spec);
    ensure_dir(out_dir);
    const SeedData data = prepare_seed(spec, spec.seeds.front());
    std::vector<Instance> stream;
    for (AttackKind k : spec.attacks) {
        stream.insert(stream.end(), data.pretrain.at(k).begin(), data.pretrain.at(k).end());
        stream.insert(stream.end(), data.eval.at(k).begin(), data.eval.at(k).end());
    }
    if (stream.size() > max_instances) {
        std::vector<Instance> thin;
        for (std::size_t i = 0; i < max_instances; ++i) thin.push_back(stream[i * stream.size() / max_instances]);
        stream.swap(thin);
    }

    std::vector<DriftComparisonRow> rows;
    std::ostringstream series;
    series << "detector,step,moving_acc,cumulative_acc\n";
    for (const auto& name : drift_detector_names()) {
        EnsembleConfig ec = spec.ids.ensemble;
        ec.detector = name;
        ec.adaptive = true;
        OzaEnsemble ens(ec);
        ColdSafe model{ens};
        const auto t0 = std::chrono::steady_clock::now();
        const auto log = prequential_run(std::span<const Instance>(stream), model);
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        DriftComparisonRow r;
        r.detector = name;
        r.instances = stream.size();
        const Metrics m = metrics(log.cumulative);
        r.accuracy = m.accuracy;
        r.kappa = m.kappa;
        r.replacements = ens.replacements().size();
        r.seconds = secs;
        rows.push_back(r);
        for (const auto& s : log.steps)
            if ((s.step + 1) % 100 == 0 || s.step + 1 == log.steps.size())
                series << name << ',' << s.step + 1 << ',' << fx(s.moving.accuracy) << ',' << fx(s.cumulative.accuracy)
                       << '\n';
    }
    std::ostringstream summary, timing;
    summary << "detector,instances,accuracy,kappa,replacements\n";
    timing << "detector,wall_seconds\n";
    for (const auto& r : rows) {
        summary << r.detector << ',' << r.instances << ',' << fx(r.accuracy) << ',' << fx(r.kappa) << ','
                << r.replacements << '\n';
        timing << r.detector << ',' << csv::format_fixed(r.seconds, 3) << '\n';
    }
    write_text((fs::path(out_dir) / "drift_summary.csv").string(), summary.str());
    write_text((fs::path(out_dir) / "drift_series.csv").string(), series.str());
    write_text((fs::path(out_dir) / "timing.csv").string(), timing.str());
    return rows;
}

std::string summarize_verdict_logs(const std::string& out_dir, bool unknown_attack) {
    const std::regex pat(unknown_attack ? R"(unknown_([A-Z]{2})_s(\d+)\.csv)" : R"(verdicts_([A-Z]{2})_s(\d+)\.csv)");
    std::vector<SummaryRow> rows;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(out_dir, ec)) {
        const std::string name = entry.path().filename().string();
        std::smatch m;
        if (!std::regex_match(name, m, pat) || !parse_attack_kind(m[1].str())) continue;
        const auto v = read_verdict_log(entry.path().string());
        rows.push_back(row_from(m[1].str(), std::stoull(m[2].str()), v));
    }
    if (ec) throw IoError("cannot list '" + out_dir + "': " + ec.message());
    rows = with_medians(std::move(rows));
    return unknown_attack ? format_unknown_summary(rows) : format_attack_summary(rows);
}

}  // namespace rplids
