// rplids: simulate RPL networks and run the hybrid IDS experiments.
#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rplids/rplids.h"

namespace {

struct Options {
    std::string config;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> attacks;
    int nodes = 0;
    double malicious_frac = -1.0;
    std::string drift_detector;
    std::string out;
    std::string held_out;
    double nu = 0.0;
    double gamma = 0.0;
    int estimators = 0;
    int neighbors = 0;
};

// Exit status for a failed library call.
int report(rplids_status s) {
    std::cerr << "rplids: " << rplids_last_error() << '\n';
    return s == RPLIDS_ERR_VALIDATION || s == RPLIDS_ERR_PARSE ? 2 : 1;
}

std::string num(double v) {
    std::ostringstream o;
    o << std::setprecision(17) << v;
    return o.str();
}

std::string join(const std::vector<std::string>& xs) {
    std::string out;
    for (const auto& x : xs) out += (out.empty() ? "" : ",") + x;
    return out;
}

// Builds the experiment from --config and the flag overrides.
rplids_status build(const Options& o, rplids_experiment** exp) {
    rplids_status s = o.config.empty() ? rplids_experiment_new(exp) : rplids_experiment_load(exp, o.config.c_str());
    if (s != RPLIDS_OK) return s;
    std::vector<std::pair<std::string, std::string>> kv;
    if (!o.seeds.empty()) {
        std::string seeds;
        for (auto v : o.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(v);
        kv.emplace_back("seeds", seeds);
        kv.emplace_back("seed", std::to_string(o.seeds.front()));
    }
    if (!o.attacks.empty()) kv.emplace_back("attacks", join(o.attacks));
    if (o.nodes) kv.emplace_back("node_count", std::to_string(o.nodes));
    if (o.malicious_frac >= 0.0) kv.emplace_back("malicious_fraction", num(o.malicious_frac));
    if (!o.drift_detector.empty()) kv.emplace_back("drift_detector", o.drift_detector);
    if (o.nu > 0.0) kv.emplace_back("nu", num(o.nu));
    if (o.gamma > 0.0) kv.emplace_back("gamma", num(o.gamma));
    if (o.estimators) kv.emplace_back("estimators", std::to_string(o.estimators));
    if (o.neighbors) kv.emplace_back("neighbors", std::to_string(o.neighbors));
    for (const auto& [k, v] : kv)
        if ((s = rplids_experiment_set(*exp, k.c_str(), v.c_str())) != RPLIDS_OK) return s;
    return rplids_experiment_validate(*exp);
}

void print_file(const std::string& path) {
    std::ifstream in(path);
    if (in) std::cout << in.rdbuf();
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RPL network simulator and hybrid intrusion detection experiments"};
    app.require_subcommand(1);
    Options o;

    auto common = [&o](CLI::App* c, bool detector_flags) {
        c->add_option("--config", o.config, "experiment/simulator key=value file")->check(CLI::ExistingFile);
        c->add_option("--seed", o.seeds, "seed (repeat for several)");
        c->add_option("--nodes", o.nodes, "LLN node count (multiple of 16)");
        c->add_option("--malicious-frac", o.malicious_frac, "share of malicious nodes");
        c->add_option("--out", o.out, "output path")->required();
        if (!detector_flags) return;
        c->add_option("--drift-detector", o.drift_detector, "ADWIN, DDM, EDDM, KSWIN, PageHinkley, HDDM_A, HDDM_W");
        c->add_option("--nu", o.nu, "OCSVM nu");
        c->add_option("--gamma", o.gamma, "OCSVM RBF gamma");
        c->add_option("--estimators", o.estimators, "ensemble size");
        c->add_option("--neighbors", o.neighbors, "KNN k");
    };

    auto* sim = app.add_subcommand("simulate", "write one packet trace");
    common(sim, false);
    std::string sim_attack = "none";
    sim->add_option("--attack", sim_attack, "attack kind or 'none'");

    auto* run = app.add_subcommand("run", "prequential evaluation per attack");
    common(run, true);
    run->add_option("--attack", o.attacks, "attack kinds to evaluate (default all)");

    auto* drift = app.add_subcommand("compare-drift", "ensemble accuracy with each drift detector");
    common(drift, true);
    drift->add_option("--attack", o.attacks, "attack runs making up the stream (default all)");

    auto* unknown = app.add_subcommand("unknown-attack", "leave one attack out of pre-training");
    common(unknown, true);
    unknown->add_option("--held-out", o.held_out, "attack kind excluded from pre-training")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    rplids_experiment* exp = nullptr;
    rplids_status s = build(o, &exp);
    int rc = 0;
    if (s != RPLIDS_OK) {
        rc = report(s);
    } else if (*sim) {
        int code = -1;
        if (sim_attack != "none" && (code = rplids_attack_code(sim_attack.c_str())) < 0) {
            std::cerr << "rplids: unknown attack '" << sim_attack << "'\n";
            rc = 2;
        } else {
            const std::uint64_t seed = o.seeds.empty() ? 1 : o.seeds.front();
            if ((s = rplids_simulate(exp, seed, code, o.out.c_str())) != RPLIDS_OK) rc = report(s);
        }
    } else if (*run) {
        if ((s = rplids_run(exp, o.out.c_str())) != RPLIDS_OK) rc = report(s);
        else print_file(o.out + "/summary.csv");
    } else if (*drift) {
        if ((s = rplids_compare_drift(exp, o.out.c_str())) != RPLIDS_OK) rc = report(s);
        else print_file(o.out + "/drift_summary.csv");
    } else if (*unknown) {
        const int code = rplids_attack_code(o.held_out.c_str());
        if (code < 0) {
            std::cerr << "rplids: unknown attack '" << o.held_out << "'\n";
            rc = 2;
        } else if ((s = rplids_unknown_attack(exp, code, o.out.c_str())) != RPLIDS_OK) {
            rc = report(s);
        } else {
            print_file(o.out + "/unknown_summary_" + o.held_out + ".csv");
        }
    }
    rplids_experiment_free(exp);
    return rc;
}
