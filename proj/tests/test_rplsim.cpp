#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "rplids/error.hpp"
#include "rplids/features.hpp"
#include "rplids/rplsim.hpp"

using namespace rplids;

namespace {

SimConfig small(std::optional<AttackKind> attack = std::nullopt, double duration = 600.0) {
    SimConfig c;
    c.duration = duration;
    c.attack = attack;
    c.seed = 3;
    return c;
}

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / ("rplids_sim_" + name)).string();
}

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

double distance(const NodeInfo& a, const NodeInfo& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

TEST_CASE("log-distance radio: 10 m link") {
    SimConfig c;
    CHECK(path_loss_db(c, 10.0) == doctest::Approx(60.0).epsilon(1e-12));
    CHECK(rssi_dbm(c, 10.0) == doctest::Approx(-60.0).epsilon(1e-12));
    CHECK(link_ok(c, 10.0));
    CHECK(link_ok(c, 50.0));
    CHECK_FALSE(link_ok(c, 50.5));  // range gate
    // Distances under 1 m are clamped to the reference distance.
    CHECK(path_loss_db(c, 0.1) == doctest::Approx(40.0));
    // Tight sensitivity cuts the link before the range does.
    c.rx_sensitivity = -55.0;
    CHECK_FALSE(link_ok(c, 10.0));
}

TEST_CASE("config validation") {
    SimConfig c;
    CHECK_NOTHROW(validate(c));
    c.node_count = 17;
    CHECK_THROWS_AS(validate(c), ValidationError);
    CHECK_THROWS_AS(run_simulation(c), ValidationError);
    c = SimConfig{};
    c.malicious_fraction = 0.25;
    CHECK_THROWS_AS(validate(c), ValidationError);
    c = SimConfig{};
    c.terrain_side = 900.0;
    CHECK_THROWS_AS(validate(c), ValidationError);
    c = SimConfig{};
    c.attack_params.grayhole_drop = 1.5;
    CHECK_THROWS_AS(validate(c), ValidationError);
}

TEST_CASE("config text round trip and errors") {
    SimConfig c;
    c.node_count = 64;
    c.attack = AttackKind::GH;
    c.attack_params.grayhole_drop = 0.25;
    c.objective = ObjectiveFunction::LQ;
    c.mobility = MobilityModel::GroupWalk;
    c.seed = 99;
    const SimConfig back = parse_sim_config(format_sim_config(c));
    CHECK(format_sim_config(back) == format_sim_config(c));
    CHECK(back.node_count == 64);
    CHECK(back.attack == AttackKind::GH);

    const SimConfig d = parse_sim_config("# comment\nnode_count = 16\n\nattack=none\n");
    CHECK(d.node_count == 16);
    CHECK(!d.attack);
    CHECK_THROWS_AS(parse_sim_config("bogus_key=1\n"), ValidationError);
    CHECK_THROWS_AS(parse_sim_config("attack=XX\n"), ValidationError);
    try {
        parse_sim_config("node_count=32\nno equals sign\n");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("layout: roles and mobility") {
    SimConfig c;
    c.attack = AttackKind::SH;
    const auto nodes = plan_layout(c);
    REQUIRE(nodes.size() == 33);
    CHECK(nodes[0].role == NodeRole::Root);
    std::map<NodeRole, int> roles;
    int mobile = 0, mobile_attackers = 0;
    for (const auto& n : nodes) {
        ++roles[n.role];
        mobile += n.mobile;
        mobile_attackers += n.mobile && n.role == NodeRole::Attacker;
        CHECK(n.x >= 0.0);
        CHECK(n.x <= c.terrain_side);
        CHECK(n.y >= 0.0);
        CHECK(n.y <= c.terrain_side);
    }
    CHECK(roles[NodeRole::Attacker] == 6);  // round(0.2 * 32)
    CHECK(roles[NodeRole::Detector] == 3);
    CHECK(mobile == 6);                     // round(0.2 * 32)
    CHECK(mobile_attackers == 3);           // half the attackers
    CHECK(!nodes[0].mobile);

    // The layout does not depend on which attack runs.
    c.attack = AttackKind::DA;
    const auto again = plan_layout(c);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
        CHECK(again[i].x == nodes[i].x);
        CHECK(again[i].role == nodes[i].role);
    }
    // Without an attack the would-be attackers are ordinary nodes.
    c.attack.reset();
    for (const auto& n : plan_layout(c)) CHECK(n.role != NodeRole::Attacker);
}

TEST_CASE("same seed gives a byte-identical trace") {
    const auto cfg = small(AttackKind::WH);
    const auto a = run_simulation(cfg);
    const auto b = run_simulation(cfg);
    const auto pa = temp_path("det_a.csv"), pb = temp_path("det_b.csv");
    write_trace(pa, a.events);
    write_trace(pb, b.events);
    CHECK(slurp(pa) == slurp(pb));
    auto other = cfg;
    other.seed = 4;
    write_trace(pb, run_simulation(other).events);
    CHECK(slurp(pa) != slurp(pb));
    std::remove(pa.c_str());
    std::remove(pb.c_str());
}

TEST_CASE("attack-free trace: no attack labels, ordered, all kinds present") {
    const auto r = run_simulation(small());
    REQUIRE(!r.events.empty());
    std::set<PacketKind> kinds;
    double last = 0.0;
    for (const auto& e : r.events) {
        CHECK(e.truth.is_normal());
        CHECK(e.time >= last);
        last = e.time;
        kinds.insert(e.kind);
    }
    CHECK(kinds.size() == 5);
}

TEST_CASE("range gate between static nodes") {
    auto cfg = small();
    cfg.mobile_fraction = 0.0;
    const auto r = run_simulation(cfg);
    for (const auto& e : r.events) {
        if (e.multicast() || e.status != PacketStatus::Successful) continue;
        CHECK(distance(r.nodes[e.src], r.nodes[e.dst]) <= cfg.tx_range);
    }
}

TEST_CASE("DODAG snapshots: acyclic, rank above the advertised parent rank") {
    for (auto attack : {std::optional<AttackKind>{}, std::optional<AttackKind>{AttackKind::SH},
                        std::optional<AttackKind>{AttackKind::WP}}) {
        SimOptions opt;
        opt.snapshot_interval = 30.0;
        const auto r = run_simulation(small(attack), opt);
        REQUIRE(r.snapshots.size() >= 10);
        for (const auto& s : r.snapshots) {
            CHECK(s.rank[kRootId] == kRootRank);
            for (NodeId n = 1; n < s.parent.size(); ++n) {
                if (s.role[n] == NodeRole::Attacker || s.parent[n] == kNoNode) continue;
                // Walk to the root; a legitimate chain never revisits a node.
                std::set<NodeId> seen{n};
                NodeId p = s.parent[n];
                while (p != kNoNode && p != kRootId) {
                    CHECK(seen.insert(p).second);
                    if (!seen.count(p) || seen.size() > s.parent.size()) break;
                    p = s.parent[p];
                }
                CHECK(s.rank[n] > s.parent_rank[n]);
            }
        }
    }
}

TEST_CASE("DIS flooding multiplies what neighbours receive") {
    auto base_cfg = small(std::nullopt, 300.0);
    base_cfg.mobile_fraction = 0.0;
    auto da_cfg = base_cfg;
    da_cfg.attack = AttackKind::DA;
    const auto base = run_simulation(base_cfg);
    const auto da = run_simulation(da_cfg);

    // DIS heard by each node over [200, 260) s.
    auto heard = [](const SimResult& r, double t0, double t1) {
        std::map<NodeId, int> n;
        for (const auto& e : r.events) {
            if (e.kind != PacketKind::DIS || e.time < t0 || e.time >= t1 || e.status != PacketStatus::Successful)
                continue;
            for (const auto& node : r.nodes)
                if (node.id != e.src && distance(node, r.nodes[e.src]) <= 50.0) ++n[node.id];
        }
        return n;
    };
    const auto b = heard(base, 200.0, 260.0);
    const auto a = heard(da, 200.0, 260.0);
    int neighbours = 0;
    for (const auto& att : da.nodes) {
        if (att.role != NodeRole::Attacker) continue;
        for (const auto& n : da.nodes) {
            if (n.id == att.id || n.role == NodeRole::Attacker || distance(n, att) > 50.0) continue;
            ++neighbours;
            const int before = b.count(n.id) ? b.at(n.id) : 0;
            const int after = a.count(n.id) ? a.at(n.id) : 0;
            CHECK(after >= 10 * std::max(before, 1));
        }
    }
    CHECK(neighbours > 0);
}

TEST_CASE("blackhole drops every packet it should forward") {
    const auto r = run_simulation(small(AttackKind::BH));
    std::set<NodeId> attackers;
    for (const auto& n : r.nodes)
        if (n.role == NodeRole::Attacker) attackers.insert(n.id);
    int drops = 0;
    for (const auto& e : r.events) {
        if (!attackers.count(e.src) || e.kind != PacketKind::APP) continue;
        CHECK(e.status == PacketStatus::Dropped);
        CHECK(e.truth == Label::attack(AttackKind::BH));
        ++drops;
    }
    REQUIRE(drops > 0);

    // Seen from any detector, a blackhole sender's packet loss is total.
    const auto inst = extract_labeled(r.events, r.detectors);
    int seen = 0;
    for (const auto& x : inst) {
        if (!attackers.count(x.sender) || x.features[kPktType] != static_cast<double>(PacketKind::APP)) continue;
        CHECK(x.features[kPktLoss] == 1.0);
        ++seen;
    }
    CHECK(seen > 0);
}

TEST_CASE("sinkhole pulls a legitimate child within five trickle intervals") {
    auto cfg = small(AttackKind::SH, 400.0);
    const auto r = run_simulation(cfg);
    double horizon = 0.0, interval = cfg.trickle_imin;
    for (int i = 0; i < 5; ++i, interval *= 2.0) horizon += interval;
    bool pulled = false;
    for (const auto& pc : r.parent_changes)
        if (pc.time <= horizon && pc.parent != kNoNode && r.nodes[pc.parent].role == NodeRole::Attacker) pulled = true;
    CHECK(pulled);
}

TEST_CASE("attack labels mark only the attack traffic") {
    for (AttackKind k : kAllAttackKinds) {
        CAPTURE(to_string(k));
        const auto r = run_simulation(small(k, 300.0));
        std::set<NodeId> attackers;
        for (const auto& n : r.nodes)
            if (n.role == NodeRole::Attacker) attackers.insert(n.id);
        int labeled = 0;
        for (const auto& e : r.events) {
            if (e.truth.is_normal()) continue;
            ++labeled;
            CHECK(e.truth.kind() == k);
            CHECK(attackers.count(e.src) == 1);
            switch (k) {
                case AttackKind::DA: CHECK(e.kind == PacketKind::DIS); break;
                case AttackKind::SH:
                case AttackKind::IR:
                case AttackKind::DS: CHECK(e.kind == PacketKind::DIO); break;
                case AttackKind::BH:
                case AttackKind::GH: CHECK(e.status == PacketStatus::Dropped); break;
                case AttackKind::WP: CHECK((e.kind == PacketKind::DIO || e.kind == PacketKind::DAO)); break;
                case AttackKind::WH: break;
            }
        }
        CHECK(labeled > 0);
        if (k == AttackKind::SH)
            for (const auto& e : r.events)
                if (!e.truth.is_normal()) CHECK(e.src_rank == kRootRank + 1);
    }
}

TEST_CASE("trace round trip, empty trace, corrupted row") {
    const auto r = run_simulation(small(AttackKind::GH, 200.0));
    const auto path = temp_path("trace.csv");
    write_trace(path, r.events);
    const auto back = read_trace(path);
    REQUIRE(back.size() == r.events.size());
    for (std::size_t i = 0; i < back.size(); ++i) {
        CAPTURE(i);
        CHECK(back[i] == r.events[i]);
    }

    write_trace(path, {});
    CHECK(read_trace(path).empty());
    const std::string text = slurp(path);
    CHECK(std::count(text.begin(), text.end(), '\n') == 2);  // schema line + header

    write_trace(path, r.events);
    {
        std::string body = slurp(path);
        // Damage the third data row (file line 5).
        std::size_t pos = 0;
        for (int i = 0; i < 4; ++i) pos = body.find('\n', pos) + 1;
        body.insert(pos, "garbage,");
        std::ofstream(path, std::ios::binary) << body;
    }
    try {
        read_trace(path);
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 5);
    }

    std::ofstream(path, std::ios::binary) << "# schema_version=2\n";
    CHECK_THROWS_AS(read_trace(path), ParseError);
    std::remove(path.c_str());
    CHECK_THROWS_AS(read_trace(path), IoError);
}
