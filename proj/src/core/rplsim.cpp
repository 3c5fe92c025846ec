#include "rplids/rplsim.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <queue>
#include <random>
#include <sstream>

#include "rplids/csv.hpp"
#include "rplids/error.hpp"

namespace rplids {

std::string_view to_string(PacketKind k) {
    switch (k) {
        case PacketKind::DIO: return "DIO";
        case PacketKind::DIS: return "DIS";
        case PacketKind::DAO: return "DAO";
        case PacketKind::DAOACK: return "DAOACK";
        case PacketKind::APP: return "APP";
    }
    return "?";
}

std::string_view to_string(PacketStatus s) {
    switch (s) {
        case PacketStatus::Successful: return "Successful";
        case PacketStatus::Collided: return "Collided";
        case PacketStatus::Dropped: return "Dropped";
    }
    return "?";
}

std::optional<PacketKind> parse_packet_kind(std::string_view s) {
    for (auto k : {PacketKind::DIO, PacketKind::DIS, PacketKind::DAO, PacketKind::DAOACK, PacketKind::APP})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

std::optional<PacketStatus> parse_packet_status(std::string_view s) {
    for (auto k : {PacketStatus::Successful, PacketStatus::Collided, PacketStatus::Dropped})
        if (to_string(k) == s) return k;
    return std::nullopt;
}

bool is_control(PacketKind k) { return k != PacketKind::APP; }

// ---------------------------------------------------------------------------
// Configuration

namespace {

bool near(double a, double b) { return std::fabs(a - b) < 1e-9; }

void require(bool ok, const std::string& what) {
    if (!ok) throw ValidationError(what);
}

}  // namespace

void validate(const SimConfig& c) {
    require(c.node_count == 16 || c.node_count == 32 || c.node_count == 64 || c.node_count == 128,
            "node_count must be one of 16, 32, 64, 128 (got " + std::to_string(c.node_count) + ")");
    require(near(c.malicious_fraction, 0.1) || near(c.malicious_fraction, 0.2) || near(c.malicious_fraction, 0.3),
            "malicious_fraction must be 0.1, 0.2 or 0.3");
    require(c.mobile_fraction >= 0.0 && c.mobile_fraction <= 1.0, "mobile_fraction must be in [0,1]");
    require(c.detector_fraction > 0.0 && c.detector_fraction <= 1.0, "detector_fraction must be in (0,1]");
    require(c.terrain_side >= 250.0 && c.terrain_side <= 850.0, "terrain_side must be within 250-850 m");
    require(c.tx_range > 0.0 && std::isfinite(c.tx_range), "tx_range must be positive");
    require(c.velocity >= 0.0 && std::isfinite(c.velocity), "velocity must be non-negative");
    require(c.duration > 0.0 && std::isfinite(c.duration), "duration must be positive");
    require(std::isfinite(c.rx_sensitivity) && std::isfinite(c.tx_power), "radio powers must be finite");
    require(c.path_loss_exponent > 0.0 && std::isfinite(c.path_loss_d0), "path loss parameters out of range");
    require(c.node_spacing > 0.0, "node_spacing must be positive");
    require(c.trickle_imin > 0.0 && c.trickle_doublings >= 0 && c.trickle_doublings <= 20 && c.trickle_k > 0,
            "trickle parameters out of range");
    require(c.app_interval > 0.0 && c.dao_interval > 0.0 && c.dis_interval > 0.0, "timer intervals must be positive");
    require(c.slot > 0.0 && c.max_retries >= 0, "slot must be positive and max_retries non-negative");
    const auto& a = c.attack_params;
    require(a.dis_rate > 0.0 && a.ds_rate > 0.0 && a.ir_dio_interval > 0.0, "attack rates must be positive");
    require(a.grayhole_drop >= 0.0 && a.grayhole_drop <= 1.0, "grayhole_drop must be in [0,1]");
    require(a.ir_step > 0, "ir_step must be positive");
    require(a.wormhole_replay_gap >= 0.0, "wormhole_replay_gap must be non-negative");
}

namespace {

double parse_num(const std::string& key, const std::string& v) {
    try {
        return csv::parse_double(v, 0);
    } catch (const ParseError&) {
        throw ValidationError("'" + key + "' expects a number, got '" + v + "'");
    }
}

int parse_whole(const std::string& key, const std::string& v) {
    const double d = parse_num(key, v);
    if (d != std::floor(d) || std::fabs(d) > 1e9) throw ValidationError("'" + key + "' expects an integer");
    return static_cast<int>(d);
}

}  // namespace

void apply_sim_config_entry(SimConfig& c, const std::string& key, const std::string& v) {
    auto& a = c.attack_params;
    if (key == "node_count") c.node_count = parse_whole(key, v);
    else if (key == "malicious_fraction") c.malicious_fraction = parse_num(key, v);
    else if (key == "mobile_fraction") c.mobile_fraction = parse_num(key, v);
    else if (key == "terrain_side") c.terrain_side = parse_num(key, v);
    else if (key == "tx_range") c.tx_range = parse_num(key, v);
    else if (key == "velocity") c.velocity = parse_num(key, v);
    else if (key == "duration") c.duration = parse_num(key, v);
    else if (key == "objective") {
        if (v == "OF0") c.objective = ObjectiveFunction::OF0;
        else if (v == "LQ") c.objective = ObjectiveFunction::LQ;
        else throw ValidationError("objective must be OF0 or LQ");
    } else if (key == "mobility") {
        if (v == "RandomWalk") c.mobility = MobilityModel::RandomWalk;
        else if (v == "GroupWalk") c.mobility = MobilityModel::GroupWalk;
        else throw ValidationError("mobility must be RandomWalk or GroupWalk");
    } else if (key == "rx_sensitivity") c.rx_sensitivity = parse_num(key, v);
    else if (key == "tx_power") c.tx_power = parse_num(key, v);
    else if (key == "path_loss_exponent") c.path_loss_exponent = parse_num(key, v);
    else if (key == "path_loss_d0") c.path_loss_d0 = parse_num(key, v);
    else if (key == "detector_fraction") c.detector_fraction = parse_num(key, v);
    else if (key == "node_spacing") c.node_spacing = parse_num(key, v);
    else if (key == "attack") {
        if (v == "none") c.attack.reset();
        else if (auto k = parse_attack_kind(v)) c.attack = *k;
        else throw ValidationError("unknown attack kind '" + v + "'");
    } else if (key == "dis_rate") a.dis_rate = parse_num(key, v);
    else if (key == "grayhole_drop") a.grayhole_drop = parse_num(key, v);
    else if (key == "ir_step") {
        const int s = parse_whole(key, v);
        if (s <= 0 || s > 0xFFFF) throw ValidationError("ir_step must be in 1..65535");
        a.ir_step = static_cast<std::uint16_t>(s);
    } else if (key == "ir_dio_interval") a.ir_dio_interval = parse_num(key, v);
    else if (key == "ir_max_increase") {
        const int s = parse_whole(key, v);
        if (s <= 0 || s > 0xFFFF) throw ValidationError("ir_max_increase must be in 1..65535");
        a.ir_max_increase = static_cast<std::uint16_t>(s);
    } else if (key == "ds_rate") a.ds_rate = parse_num(key, v);
    else if (key == "wormhole_tx_power") a.wormhole_tx_power = parse_num(key, v);
    else if (key == "wormhole_replay_gap") a.wormhole_replay_gap = parse_num(key, v);
    else if (key == "trickle_imin") c.trickle_imin = parse_num(key, v);
    else if (key == "trickle_doublings") c.trickle_doublings = parse_whole(key, v);
    else if (key == "trickle_k") c.trickle_k = parse_whole(key, v);
    else if (key == "app_interval") c.app_interval = parse_num(key, v);
    else if (key == "dao_interval") c.dao_interval = parse_num(key, v);
    else if (key == "dis_interval") c.dis_interval = parse_num(key, v);
    else if (key == "slot") c.slot = parse_num(key, v);
    else if (key == "max_retries") c.max_retries = parse_whole(key, v);
    else if (key == "seed") {
        const double d = parse_num(key, v);
        if (d < 0 || d != std::floor(d) || d > 9.0e15) throw ValidationError("seed must be a non-negative integer");
        c.seed = static_cast<std::uint64_t>(d);
    } else throw ValidationError("unknown config key '" + key + "'");
}

SimConfig parse_sim_config(const std::string& text) {
    SimConfig c;
    std::istringstream in(text);
    std::string line;
    std::size_t ln = 0;
    auto trim = [](std::string s) {
        const auto b = s.find_first_not_of(" \t\r");
        const auto e = s.find_last_not_of(" \t\r");
        return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    while (std::getline(in, line)) {
        ++ln;
        if (auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key=value", ln);
        try {
            apply_sim_config_entry(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
        } catch (const ValidationError& e) {
            throw ValidationError("line " + std::to_string(ln) + ": " + e.what());
        }
    }
    return c;
}

SimConfig read_sim_config(const std::string& path) {
    auto in = csv::open_input(path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_sim_config(ss.str());
}

std::string format_sim_config(const SimConfig& c) {
    std::ostringstream o;
    auto d = [](double v) { return csv::format_double(v); };
    const auto& a = c.attack_params;
    o << "node_count=" << c.node_count << '\n'
      << "malicious_fraction=" << d(c.malicious_fraction) << '\n'
      << "mobile_fraction=" << d(c.mobile_fraction) << '\n'
      << "terrain_side=" << d(c.terrain_side) << '\n'
      << "tx_range=" << d(c.tx_range) << '\n'
      << "velocity=" << d(c.velocity) << '\n'
      << "duration=" << d(c.duration) << '\n'
      << "objective=" << (c.objective == ObjectiveFunction::OF0 ? "OF0" : "LQ") << '\n'
      << "mobility=" << (c.mobility == MobilityModel::RandomWalk ? "RandomWalk" : "GroupWalk") << '\n'
      << "rx_sensitivity=" << d(c.rx_sensitivity) << '\n'
      << "tx_power=" << d(c.tx_power) << '\n'
      << "path_loss_exponent=" << d(c.path_loss_exponent) << '\n'
      << "path_loss_d0=" << d(c.path_loss_d0) << '\n'
      << "detector_fraction=" << d(c.detector_fraction) << '\n'
      << "node_spacing=" << d(c.node_spacing) << '\n'
      << "attack=" << (c.attack ? std::string(to_string(*c.attack)) : std::string("none")) << '\n'
      << "dis_rate=" << d(a.dis_rate) << '\n'
      << "grayhole_drop=" << d(a.grayhole_drop) << '\n'
      << "ir_step=" << a.ir_step << '\n'
      << "ir_dio_interval=" << d(a.ir_dio_interval) << '\n'
      << "ir_max_increase=" << a.ir_max_increase << '\n'
      << "ds_rate=" << d(a.ds_rate) << '\n'
      << "wormhole_tx_power=" << d(a.wormhole_tx_power) << '\n'
      << "wormhole_replay_gap=" << d(a.wormhole_replay_gap) << '\n'
      << "trickle_imin=" << d(c.trickle_imin) << '\n'
      << "trickle_doublings=" << c.trickle_doublings << '\n'
      << "trickle_k=" << c.trickle_k << '\n'
      << "app_interval=" << d(c.app_interval) << '\n'
      << "dao_interval=" << d(c.dao_interval) << '\n'
      << "dis_interval=" << d(c.dis_interval) << '\n'
      << "slot=" << d(c.slot) << '\n'
      << "max_retries=" << c.max_retries << '\n'
      << "seed=" << c.seed << '\n';
    return o.str();
}

// ---------------------------------------------------------------------------
// Radio

double path_loss_db(const SimConfig& cfg, double distance) {
    // Distances under 1 m are treated as 1 m.
    return cfg.path_loss_d0 + 10.0 * cfg.path_loss_exponent * std::log10(std::max(distance, 1.0));
}

double rssi_dbm(const SimConfig& cfg, double distance) { return cfg.tx_power - path_loss_db(cfg, distance); }

bool link_ok(const SimConfig& cfg, double distance) {
    return distance <= cfg.tx_range && rssi_dbm(cfg, distance) >= cfg.rx_sensitivity;
}

// ---------------------------------------------------------------------------
// Layout

std::vector<NodeInfo> plan_layout(const SimConfig& cfg) {
    validate(cfg);
    std::mt19937_64 rng(cfg.seed * 0x9E3779B97F4A7C15ull + 0x51ull);
    std::uniform_real_distribution<double> u(-1.0, 1.0);

    const int total = cfg.node_count + 1;
    const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(total))));
    const int rows = (total + cols - 1) / cols;
    const double sp = std::min(cfg.node_spacing, cfg.terrain_side / cols);
    const double ox = (cfg.terrain_side - (cols - 1) * sp) / 2.0;
    const double oy = (cfg.terrain_side - (rows - 1) * sp) / 2.0;
    const double cx = cfg.terrain_side / 2.0, cy = cfg.terrain_side / 2.0;

    struct Cell {
        double x, y;
    };
    std::vector<Cell> cells;
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) cells.push_back({ox + c * sp, oy + r * sp});
    // Root takes the cell nearest the centre; the rest are shuffled.
    std::stable_sort(cells.begin(), cells.end(), [&](const Cell& a, const Cell& b) {
        return std::hypot(a.x - cx, a.y - cy) < std::hypot(b.x - cx, b.y - cy);
    });
    cells.resize(static_cast<std::size_t>(total));
    std::shuffle(cells.begin() + 1, cells.end(), rng);

    std::vector<NodeInfo> nodes(static_cast<std::size_t>(total));
    for (int i = 0; i < total; ++i) {
        auto& n = nodes[static_cast<std::size_t>(i)];
        n.id = static_cast<NodeId>(i);
        const double jitter = i == 0 ? 0.0 : 0.15 * sp;
        n.x = cells[static_cast<std::size_t>(i)].x + jitter * u(rng);
        n.y = cells[static_cast<std::size_t>(i)].y + jitter * u(rng);
        n.role = i == 0 ? NodeRole::Root : NodeRole::Legit;
    }

    // Detectors: one per zone of a grid partition of the deployment box, the
    // node nearest each zone centre.
    const int n_det = std::max(1, static_cast<int>(std::lround(cfg.detector_fraction * cfg.node_count)));
    double x0 = 1e300, x1 = -1e300, y0 = 1e300, y1 = -1e300;
    for (const auto& n : nodes) {
        x0 = std::min(x0, n.x);
        x1 = std::max(x1, n.x);
        y0 = std::min(y0, n.y);
        y1 = std::max(y1, n.y);
    }
    const int gx = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_det))));
    const int gy = (n_det + gx - 1) / gx;
    for (int z = 0; z < n_det; ++z) {
        const double zx = x0 + (x1 - x0) * ((z % gx) + 0.5) / gx;
        const double zy = y0 + (y1 - y0) * ((z / gx) + 0.5) / gy;
        NodeId best = kNoNode;
        double bd = 1e300;
        for (const auto& n : nodes) {
            if (n.role != NodeRole::Legit) continue;
            const double d = std::hypot(n.x - zx, n.y - zy);
            if (d < bd) {
                bd = d;
                best = n.id;
            }
        }
        if (best != kNoNode) nodes[best].role = NodeRole::Detector;
    }

    // Attackers among the remaining nodes; the role is only Attacker when an
    // attack is configured, but the choice does not depend on it.
    const int n_mal = static_cast<int>(std::lround(cfg.malicious_fraction * cfg.node_count));
    std::vector<NodeId> pool;
    for (const auto& n : nodes)
        if (n.role == NodeRole::Legit) pool.push_back(n.id);
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<NodeId> mal(pool.begin(), pool.begin() + std::min<std::size_t>(pool.size(), n_mal));
    std::vector<NodeId> honest(pool.begin() + static_cast<std::ptrdiff_t>(mal.size()), pool.end());
    std::sort(mal.begin(), mal.end());

    // Mobility: half of the attackers, topped up from honest non-detectors.
    const int n_mob = static_cast<int>(std::lround(cfg.mobile_fraction * cfg.node_count));
    int placed = 0;
    if (n_mob > 0) {
        for (std::size_t i = 0; i < mal.size() / 2 && placed < n_mob; ++i, ++placed) nodes[mal[i]].mobile = true;
        for (std::size_t i = 0; i < honest.size() && placed < n_mob; ++i, ++placed) nodes[honest[i]].mobile = true;
    }
    if (cfg.attack)
        for (NodeId m : mal) nodes[m].role = NodeRole::Attacker;
    return nodes;
}

// ---------------------------------------------------------------------------
// Simulator

namespace {

constexpr std::uint8_t kVersion = 240;
constexpr double kNeighbourTimeout = 600.0;

struct Packet {
    PacketKind kind = PacketKind::DIO;
    NodeId src = kNoNode;
    NodeId dst = kBroadcast;
    std::uint16_t rank = 0;
    std::uint8_t version = kVersion;
    NodeId origin = kNoNode;
    std::uint16_t hops = 0;
    double origin_time = 0.0;
    std::uint64_t seq = 0;
    double tx_power = std::numeric_limits<double>::quiet_NaN();  // NaN = configured power
    int attempt = 0;
    bool forged = false;  // produced or altered by the attack behaviour
};

enum class EvType { Send, SlotFlush, TrickleFire, TrickleEnd, App, Dao, Dis, Tick, Attack, Replay };

struct Ev {
    double t;
    std::uint64_t order;
    EvType type;
    NodeId node;
    std::uint64_t gen;
    Packet pkt;
};

struct EvLater {
    bool operator()(const Ev& a, const Ev& b) const { return a.t != b.t ? a.t > b.t : a.order > b.order; }
};

struct Neighbour {
    bool known = false;
    std::uint16_t rank = kInfiniteRank;
    double heard = -1e300;
};

struct Node {
    NodeInfo info;
    double x = 0, y = 0;
    double heading = 0;
    int group = -1;
    NodeId parent = kNoNode;
    std::uint16_t rank = kInfiniteRank;
    std::vector<Neighbour> nbr;
    // trickle
    bool trickle_on = false;
    double I = 0;
    int c = 0;
    std::uint64_t tgen = 0;
    bool dao_timer = false;
    bool dis_timer = false;
    std::uint64_t seq = 0;
    std::uint16_t ir_rank = 0;
    NodeId partner = kNoNode;
    double last_replay = -1e300;
    bool attacker() const { return info.role == NodeRole::Attacker; }
    bool legit() const { return info.role == NodeRole::Legit || info.role == NodeRole::Detector; }
};

struct Tx {
    double t;
    std::uint64_t order;
    Packet p;
};

class Simulator {
public:
    Simulator(const SimConfig& cfg, const SimOptions& opt)
        : cfg_(cfg), opt_(opt), rng_(cfg.seed * 0xD1B54A32D192ED03ull + 0x3Bull) {}

    SimResult run();

private:
    double uni(double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng_); }
    double dist(NodeId a, NodeId b) const {
        return std::hypot(nodes_[a].x - nodes_[b].x, nodes_[a].y - nodes_[b].y);
    }
    double rx_dbm(double tx_power, double d) const { return tx_power - path_loss_db(cfg_, d); }
    bool hears(NodeId from, NodeId to, double tx_power) const {
        const double d = dist(from, to);
        return d <= cfg_.tx_range && rx_dbm(tx_power, d) >= cfg_.rx_sensitivity;
    }
    bool attached(NodeId n) const { return n == kRootId || nodes_[n].parent != kNoNode; }
    bool is_attack(AttackKind k, NodeId n) const { return nodes_[n].attacker() && cfg_.attack == k; }
    Label label_of(const Packet& p) const {
        return p.forged && nodes_[p.src].attacker() ? Label::attack(*cfg_.attack) : Label::normal();
    }
    void mark_forged(Packet& p) const;

    void schedule(double t, EvType type, NodeId node, std::uint64_t gen = 0, Packet p = {}) {
        queue_.push(Ev{t, order_++, type, node, gen, p});
    }
    void send(NodeId n, Packet p, double delay) {
        p.src = n;
        if (std::isnan(p.tx_power)) p.tx_power = cfg_.tx_power;
        schedule(now_ + delay, EvType::Send, n, 0, p);
    }
    double proc_delay() { return uni(0.001, 0.010); }
    Packet make_dao(NodeId n, NodeId parent) {
        Packet p;
        p.kind = PacketKind::DAO;
        p.dst = parent;
        p.origin = n;
        p.origin_time = now_;
        p.seq = ++nodes_[n].seq;
        return p;
    }

    std::uint16_t advertised(NodeId n) const;
    std::uint16_t increase(NodeId n, NodeId p) const;
    bool chain_contains(NodeId from, NodeId target) const;
    void evaluate_parent(NodeId n, bool parent_lost = false);
    void set_parent(NodeId n, NodeId p, std::uint16_t rank);
    void detach(NodeId n);

    void trickle_start(NodeId n);
    void trickle_reset(NodeId n);
    void trickle_interval(NodeId n);
    void send_dio(NodeId n);

    void on_send(const Ev& e);
    void flush_slot(std::int64_t k);
    void deliver(NodeId r, const Packet& p, double rssi);
    void forward(NodeId r, Packet p);
    void drop(NodeId r, const Packet& p, NodeId next, bool malicious = false);
    void emit(double t, const Packet& p, PacketStatus status, double rssi);
    void tick();
    void move_nodes();
    void cascade();
    bool cascade_pass();
    void snapshot();

    const SimConfig& cfg_;
    SimOptions opt_;
    std::mt19937_64 rng_;
    std::vector<Node> nodes_;
    std::vector<NodeId> detectors_;
    std::priority_queue<Ev, std::vector<Ev>, EvLater> queue_;
    std::uint64_t order_ = 0;
    double now_ = 0.0;
    double imax_ = 0.0;
    std::map<std::int64_t, std::vector<Tx>> slots_;
    std::int64_t last_flushed_ = -1;
    double bx0_ = 0, bx1_ = 0, by0_ = 0, by1_ = 0;
    std::uint64_t ticks_ = 0;
    SimResult out_;
};

std::uint16_t Simulator::advertised(NodeId n) const {
    const Node& nd = nodes_[n];
    if (n == kRootId) return kRootRank;
    if (nd.parent == kNoNode) return kInfiniteRank;
    if (is_attack(AttackKind::SH, n)) return kRootRank + 1;
    if (is_attack(AttackKind::IR, n)) return nd.ir_rank;
    if (is_attack(AttackKind::WH, n) && nd.partner != kNoNode && attached(nd.partner))
        return static_cast<std::uint16_t>(
            std::min<unsigned>(nd.rank, static_cast<unsigned>(nodes_[nd.partner].rank) + kMinHopRankIncrease));
    return nd.rank;
}

std::uint16_t Simulator::increase(NodeId n, NodeId p) const {
    if (cfg_.objective == ObjectiveFunction::OF0 || is_attack(AttackKind::WP, n)) return kMinHopRankIncrease;
    // ETX estimated from the link margin.
    const double margin = rx_dbm(cfg_.tx_power, dist(n, p)) - cfg_.rx_sensitivity;
    const double prr = std::clamp(margin / 20.0, 0.1, 1.0);
    return static_cast<std::uint16_t>(std::lround(kMinHopRankIncrease / prr));
}

bool Simulator::chain_contains(NodeId from, NodeId target) const {
    NodeId p = from;
    for (std::size_t steps = 0; p != kNoNode && steps <= nodes_.size(); ++steps) {
        if (p == target) return true;
        p = nodes_[p].parent;
    }
    return p != kNoNode;  // a walk that does not end is treated as a loop
}

void Simulator::evaluate_parent(NodeId n, bool parent_lost) {
    if (n == kRootId) return;
    Node& nd = nodes_[n];
    const bool worst = is_attack(AttackKind::WP, n);
    NodeId best = kNoNode;
    unsigned best_rank = kInfiniteRank;
    double best_rssi = 0.0;
    unsigned cur_rank = kInfiniteRank;
    double cur_rssi = 0.0;
    for (NodeId c = 0; c < nodes_.size(); ++c) {
        if (c == n) continue;
        const Neighbour& nb = nd.nbr[c];
        if (!nb.known || nb.rank >= kInfiniteRank || now_ - nb.heard > kNeighbourTimeout) continue;
        if (!attached(c) || !hears(n, c, cfg_.tx_power) || chain_contains(c, n)) continue;
        if (parent_lost && c == nd.parent) continue;
        const unsigned r = static_cast<unsigned>(nb.rank) + increase(n, c);
        if (r >= kInfiniteRank) continue;
        const double q = rx_dbm(cfg_.tx_power, dist(n, c));
        if (c == nd.parent) {
            cur_rank = r;
            cur_rssi = q;
        }
        bool better;
        if (best == kNoNode) better = true;
        else if (worst) better = q < best_rssi;
        else better = r < best_rank || (r == best_rank && q > best_rssi);
        if (better) {
            best = c;
            best_rank = r;
            best_rssi = q;
        }
    }
    if (best == kNoNode) {
        if (nd.parent != kNoNode) detach(n);
        return;
    }
    if (nd.parent != kNoNode && cur_rank < kInfiniteRank && best != nd.parent) {
        // Hysteresis against flapping.
        if (worst) {
            if (best_rssi > cur_rssi - 3.0) best = nd.parent, best_rank = cur_rank;
        } else {
            const unsigned h = cfg_.objective == ObjectiveFunction::LQ ? 128u : 0u;
            if (best_rank + h >= cur_rank) best = nd.parent, best_rank = cur_rank;
        }
    }
    set_parent(n, best, static_cast<std::uint16_t>(best_rank));
}

void Simulator::set_parent(NodeId n, NodeId p, std::uint16_t rank) {
    Node& nd = nodes_[n];
    const bool joined = nd.parent == kNoNode;
    const bool changed = nd.parent != p;
    const std::uint16_t old_rank = nd.rank;
    nd.parent = p;
    nd.rank = rank;
    if (joined && is_attack(AttackKind::IR, n)) nd.ir_rank = rank;
    if (changed) {
        if (nd.legit()) out_.parent_changes.push_back({now_, n, p});
        send(n, make_dao(n, p), uni(0.05, 0.5));
    }
    if (joined) {
        if (!nd.trickle_on) trickle_start(n);
        if (!nd.dao_timer) {
            nd.dao_timer = true;
            schedule(now_ + cfg_.dao_interval * uni(0.9, 1.1), EvType::Dao, n);
        }
    }
    if (changed || std::abs(static_cast<int>(old_rank) - static_cast<int>(rank)) >= 128) trickle_reset(n);
}

void Simulator::detach(NodeId n) {
    Node& nd = nodes_[n];
    nd.parent = kNoNode;
    nd.rank = kInfiniteRank;
    if (nd.legit()) out_.parent_changes.push_back({now_, n, kNoNode});
    if (!nd.dis_timer) {
        nd.dis_timer = true;
        schedule(now_ + uni(0.0, 0.5), EvType::Dis, n);
    }
}

void Simulator::trickle_start(NodeId n) {
    nodes_[n].trickle_on = true;
    nodes_[n].I = cfg_.trickle_imin;
    trickle_interval(n);
}

void Simulator::trickle_reset(NodeId n) {
    Node& nd = nodes_[n];
    if (!nd.trickle_on || nd.I <= cfg_.trickle_imin) return;
    nd.I = cfg_.trickle_imin;
    trickle_interval(n);
}

void Simulator::trickle_interval(NodeId n) {
    Node& nd = nodes_[n];
    ++nd.tgen;
    nd.c = 0;
    schedule(now_ + uni(nd.I / 2.0, nd.I), EvType::TrickleFire, n, nd.tgen);
    schedule(now_ + nd.I, EvType::TrickleEnd, n, nd.tgen);
}

void Simulator::send_dio(NodeId n) {
    if (!attached(n)) return;
    Packet p;
    p.kind = PacketKind::DIO;
    p.rank = advertised(n);
    send(n, p, 0.0);
    if (is_attack(AttackKind::IR, n)) {
        Node& nd = nodes_[n];
        const unsigned next = static_cast<unsigned>(nd.ir_rank) + cfg_.attack_params.ir_step;
        const unsigned cap = std::min<unsigned>(kInfiniteRank, static_cast<unsigned>(nd.rank) + cfg_.attack_params.ir_max_increase);
        nd.ir_rank = next >= cap ? nd.rank : static_cast<std::uint16_t>(next);
    }
}

// Which attacker transmissions carry the attack: control messages that
// advertise forged routing state, floods, and data packets whose fate the
// attacker changed (dropped or tunnelled). The attacker's remaining traffic
// is ordinary RPL behaviour.
void Simulator::mark_forged(Packet& p) const {
    const Node& nd = nodes_[p.src];
    if (!nd.attacker()) return;
    switch (*cfg_.attack) {
        case AttackKind::SH:
        case AttackKind::IR:
        case AttackKind::DS: p.forged = p.forged || p.kind == PacketKind::DIO; break;
        case AttackKind::WH: p.forged = p.forged || (p.kind == PacketKind::DIO && p.rank < nd.rank); break;
        case AttackKind::DA: p.forged = p.forged || p.kind == PacketKind::DIS; break;
        case AttackKind::WP:
            // DIOs advertise the rank through the worst parent; DAOs register it.
            p.forged = p.forged || p.kind == PacketKind::DIO || (p.kind == PacketKind::DAO && p.dst == nd.parent);
            break;
        case AttackKind::BH:
        case AttackKind::GH: break;  // only their drops
    }
}

void Simulator::on_send(const Ev& e) {
    Packet p = e.pkt;
    // Non-DIO packets carry the sender's rank at transmission time.
    if (p.kind != PacketKind::DIO) p.rank = advertised(p.src);
    mark_forged(p);
    std::int64_t k = static_cast<std::int64_t>(std::floor(e.t / cfg_.slot));
    if (k <= last_flushed_) k = last_flushed_ + 1;
    auto& bucket = slots_[k];
    if (bucket.empty()) schedule(static_cast<double>(k + 1) * cfg_.slot, EvType::SlotFlush, kNoNode, static_cast<std::uint64_t>(k));
    bucket.push_back(Tx{e.t, e.order, p});
}

void Simulator::emit(double t, const Packet& p, PacketStatus status, double rssi) {
    PacketEvent ev;
    ev.time = t;
    ev.kind = p.kind;
    ev.src = p.src;
    ev.dst = p.dst;
    ev.src_rank = p.rank;
    ev.adv_version = p.version;
    ev.status = status;
    ev.origin = p.origin;
    ev.hop_count = p.hops;
    ev.origin_time = p.origin_time;
    ev.seq = p.seq;
    ev.tx_power = p.tx_power;
    ev.rx_sensitivity = cfg_.rx_sensitivity;
    ev.rssi = rssi;
    ev.truth = label_of(p);
    for (NodeId det : detectors_) {
        const bool near_src = det == p.src || hears(p.src, det, p.tx_power);
        const bool near_dst = p.dst != kBroadcast && p.dst != kNoNode && (det == p.dst || hears(p.dst, det, cfg_.tx_power));
        if (!near_src && !near_dst) continue;
        const double r = det == p.src ? p.tx_power : rx_dbm(p.tx_power, dist(p.src, det));
        ev.observers.push_back(Observation{det, r});
    }
    out_.events.push_back(std::move(ev));
}

void Simulator::flush_slot(std::int64_t k) {
    auto it = slots_.find(k);
    if (it == slots_.end()) return;
    std::vector<Tx> txs = std::move(it->second);
    slots_.erase(it);
    last_flushed_ = std::max(last_flushed_, k);
    std::sort(txs.begin(), txs.end(), [](const Tx& a, const Tx& b) { return a.t != b.t ? a.t < b.t : a.order < b.order; });

    std::vector<char> transmitting(nodes_.size(), 0);
    for (const auto& tx : txs) transmitting[tx.p.src] = 1;

    struct Delivery {
        NodeId to;
        Packet p;
        double rssi;
    };
    std::vector<Delivery> deliveries;
    for (std::size_t i = 0; i < txs.size(); ++i) {
        const Packet& p = txs[i].p;
        auto collided_at = [&](NodeId r) {
            if (transmitting[r]) return true;
            for (std::size_t j = 0; j < txs.size(); ++j)
                if (j != i && txs[j].p.src != r && hears(txs[j].p.src, r, txs[j].p.tx_power)) return true;
            return false;
        };
        if (p.dst != kBroadcast) {
            const NodeId d = p.dst;
            const double rssi = rx_dbm(p.tx_power, dist(p.src, d));
            if (!hears(p.src, d, p.tx_power)) {
                emit(txs[i].t, p, PacketStatus::Dropped, rssi);
            } else if (collided_at(d)) {
                emit(txs[i].t, p, PacketStatus::Collided, rssi);
                if (p.attempt < cfg_.max_retries) {
                    Packet again = p;
                    ++again.attempt;
                    schedule(now_ + uni(0.010, 0.040), EvType::Send, p.src, 0, again);
                }
            } else {
                emit(txs[i].t, p, PacketStatus::Successful, rssi);
                deliveries.push_back({d, p, rssi});
            }
        } else {
            bool any = false, clean_any = false;
            double best = -1e300;
            std::vector<Delivery> local;
            for (NodeId r = 0; r < nodes_.size(); ++r) {
                if (r == p.src || !hears(p.src, r, p.tx_power)) continue;
                any = true;
                const double q = rx_dbm(p.tx_power, dist(p.src, r));
                best = std::max(best, q);
                if (!collided_at(r)) {
                    clean_any = true;
                    local.push_back({r, p, q});
                }
            }
            const PacketStatus st = any && !clean_any ? PacketStatus::Collided : PacketStatus::Successful;
            emit(txs[i].t, p, st, any ? best : cfg_.rx_sensitivity);
            deliveries.insert(deliveries.end(), local.begin(), local.end());
        }
    }
    for (const auto& d : deliveries) deliver(d.to, d.p, d.rssi);
}

void Simulator::drop(NodeId r, const Packet& in, NodeId next, bool malicious) {
    Packet p = in;
    p.src = r;
    p.forged = malicious;
    p.dst = next == kNoNode ? kRootId : next;
    p.rank = advertised(r);
    p.tx_power = cfg_.tx_power;
    emit(now_, p, PacketStatus::Dropped, rx_dbm(cfg_.tx_power, dist(r, p.dst)));
}

void Simulator::forward(NodeId r, Packet p) {
    Node& nd = nodes_[r];
    NodeId via = r;
    // Wormhole: traffic enters the tunnel when the far end is closer to the root.
    if (is_attack(AttackKind::WH, r) && nd.partner != kNoNode && attached(nd.partner) &&
        static_cast<unsigned>(nodes_[nd.partner].rank) + kMinHopRankIncrease < nd.rank)
        via = nd.partner;
    if (!attached(via) || p.hops >= 64) {
        drop(r, p, nodes_[r].parent);
        return;
    }
    p.dst = nodes_[via].parent;
    p.hops = static_cast<std::uint16_t>(p.hops + 1);
    p.rank = advertised(via);
    p.attempt = 0;
    p.forged = via != r;  // tunnelled
    p.tx_power = std::numeric_limits<double>::quiet_NaN();
    send(via, p, proc_delay());
}

void Simulator::deliver(NodeId r, const Packet& p, double) {
    Node& nd = nodes_[r];
    switch (p.kind) {
        case PacketKind::DIO: {
            Neighbour& nb = nd.nbr[p.src];
            const bool was_parent = nd.parent == p.src;
            const bool changed = nb.known && nb.rank != p.rank;
            nb.known = true;
            nb.rank = p.rank;
            nb.heard = now_;
            if (was_parent && changed)
                trickle_reset(r);
            else if (p.version == kVersion && p.rank < kInfiniteRank)
                ++nd.c;
            if (r != kRootId) evaluate_parent(r);
            // Wormhole: replay DIOs heard here at the far end.
            if (is_attack(AttackKind::WH, r) && nd.partner != kNoNode && nodes_[p.src].legit() &&
                now_ - nodes_[nd.partner].last_replay >= cfg_.attack_params.wormhole_replay_gap) {
                nodes_[nd.partner].last_replay = now_;
                Packet rp;
                rp.kind = PacketKind::DIO;
                rp.rank = p.rank;
                rp.tx_power = cfg_.attack_params.wormhole_tx_power;
                rp.forged = true;
                schedule(now_ + 0.001, EvType::Replay, nd.partner, 0, rp);
            }
            break;
        }
        case PacketKind::DIS:
            if (attached(r)) trickle_reset(r);
            break;
        case PacketKind::DAO: {
            if (p.dst != r) break;
            Packet ack;
            ack.kind = PacketKind::DAOACK;
            ack.dst = p.src;
            ack.origin = p.origin;
            ack.seq = p.seq;
            ack.rank = advertised(r);
            send(r, ack, proc_delay());
            if (r != kRootId) forward(r, p);
            break;
        }
        case PacketKind::DAOACK:
            break;
        case PacketKind::APP: {
            if (p.dst != r || r == kRootId) break;
            if (is_attack(AttackKind::BH, r)) {
                drop(r, p, nd.parent, true);
                break;
            }
            if (is_attack(AttackKind::GH, r) && uni(0.0, 1.0) < cfg_.attack_params.grayhole_drop) {
                drop(r, p, nd.parent, true);
                break;
            }
            forward(r, p);
            break;
        }
    }
}

void Simulator::move_nodes() {
    const double v = cfg_.velocity;
    std::map<int, double> group_heading;
    for (auto& nd : nodes_) {
        if (!nd.info.mobile || v <= 0.0) continue;
        double h;
        if (cfg_.mobility == MobilityModel::GroupWalk) {
            auto it = group_heading.find(nd.group);
            if (it == group_heading.end()) {
                // The group leader (first member) steers.
                if (uni(0.0, 1.0) < 0.2) nd.heading = uni(0.0, 2.0 * M_PI);
                it = group_heading.emplace(nd.group, nd.heading).first;
            }
            h = it->second;
            nd.heading = h;
        } else {
            if (uni(0.0, 1.0) < 0.2) nd.heading = uni(0.0, 2.0 * M_PI);
            h = nd.heading;
        }
        double dx = v * std::cos(h), dy = v * std::sin(h);
        if (cfg_.mobility == MobilityModel::GroupWalk) {
            dx += uni(-0.2, 0.2) * v;
            dy += uni(-0.2, 0.2) * v;
        }
        nd.x += dx;
        nd.y += dy;
        if (nd.x < bx0_) nd.x = 2 * bx0_ - nd.x, nd.heading = M_PI - nd.heading;
        if (nd.x > bx1_) nd.x = 2 * bx1_ - nd.x, nd.heading = M_PI - nd.heading;
        if (nd.y < by0_) nd.y = 2 * by0_ - nd.y, nd.heading = -nd.heading;
        if (nd.y > by1_) nd.y = 2 * by1_ - nd.y, nd.heading = -nd.heading;
        nd.x = std::clamp(nd.x, bx0_, bx1_);
        nd.y = std::clamp(nd.y, by0_, by1_);
    }
}

// Re-derives ranks along the parent tree so a child's rank always exceeds its
// parent's; nodes cut off from the root rejoin elsewhere or detach.
void Simulator::cascade() {
    // A node re-parented during a pass took its rank from a possibly stale
    // DIO, so passes repeat until the tree is stable.
    for (std::size_t pass = 0; pass < nodes_.size() && cascade_pass(); ++pass) {
    }
}

bool Simulator::cascade_pass() {
    bool reparented = false;
    std::vector<std::vector<NodeId>> kids(nodes_.size());
    for (NodeId n = 1; n < nodes_.size(); ++n)
        if (nodes_[n].parent != kNoNode) kids[nodes_[n].parent].push_back(n);
    std::vector<char> reached(nodes_.size(), 0);
    std::deque<NodeId> q{kRootId};
    reached[kRootId] = 1;
    while (!q.empty()) {
        const NodeId p = q.front();
        q.pop_front();
        for (NodeId c : kids[p]) {
            if (nodes_[c].parent != p) continue;  // re-parented during this pass
            reached[c] = 1;
            const unsigned r = static_cast<unsigned>(advertised(p)) + increase(c, p);
            if (r >= kInfiniteRank) {
                evaluate_parent(c, true);
                reparented = true;
            } else if (r != nodes_[c].rank) {
                const int delta = std::abs(static_cast<int>(r) - static_cast<int>(nodes_[c].rank));
                nodes_[c].rank = static_cast<std::uint16_t>(r);
                if (delta >= 128) trickle_reset(c);
            }
            if (nodes_[c].parent != kNoNode) q.push_back(c);
        }
    }
    for (NodeId n = 1; n < nodes_.size(); ++n)
        if (!reached[n] && nodes_[n].parent != kNoNode) {
            evaluate_parent(n, true);
            reparented = true;
        }
    return reparented;
}

void Simulator::snapshot() {
    DodagSnapshot s;
    s.time = now_;
    for (const auto& nd : nodes_) {
        s.parent.push_back(nd.parent);
        s.rank.push_back(nd.rank);
        s.role.push_back(nd.info.role);
        s.parent_rank.push_back(nd.parent == kNoNode ? kInfiniteRank : advertised(nd.parent));
    }
    out_.snapshots.push_back(std::move(s));
}

void Simulator::tick() {
    ++ticks_;
    move_nodes();
    for (NodeId n = 1; n < nodes_.size(); ++n) {
        Node& nd = nodes_[n];
        if (nd.parent != kNoNode && !hears(n, nd.parent, cfg_.tx_power)) evaluate_parent(n, true);
    }
    cascade();
    if (opt_.snapshot_interval > 0.0) {
        const auto every = static_cast<std::uint64_t>(std::max(1.0, std::round(opt_.snapshot_interval)));
        if (ticks_ % every == 0) snapshot();
    }
    if (now_ + 1.0 <= cfg_.duration) schedule(now_ + 1.0, EvType::Tick, kNoNode);
}

SimResult Simulator::run() {
    const auto layout = plan_layout(cfg_);
    imax_ = cfg_.trickle_imin * std::pow(2.0, cfg_.trickle_doublings);
    nodes_.resize(layout.size());
    bx0_ = by0_ = 1e300;
    bx1_ = by1_ = -1e300;
    int mobile_index = 0;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        Node& nd = nodes_[i];
        nd.info = layout[i];
        nd.x = layout[i].x;
        nd.y = layout[i].y;
        nd.nbr.assign(layout.size(), Neighbour{});
        nd.heading = uni(0.0, 2.0 * M_PI);
        if (nd.info.mobile) nd.group = mobile_index++ / 3;
        if (nd.info.role == NodeRole::Detector) detectors_.push_back(nd.info.id);
        bx0_ = std::min(bx0_, nd.x);
        bx1_ = std::max(bx1_, nd.x);
        by0_ = std::min(by0_, nd.y);
        by1_ = std::max(by1_, nd.y);
    }
    bx0_ = std::max(0.0, bx0_ - 20.0);
    by0_ = std::max(0.0, by0_ - 20.0);
    bx1_ = std::min(cfg_.terrain_side, bx1_ + 20.0);
    by1_ = std::min(cfg_.terrain_side, by1_ + 20.0);

    // Wormhole endpoints: pair the attackers farthest apart first.
    if (cfg_.attack == AttackKind::WH) {
        std::vector<NodeId> free;
        for (const auto& nd : nodes_)
            if (nd.attacker()) free.push_back(nd.info.id);
        while (free.size() >= 2) {
            std::size_t bi = 0, bj = 1;
            double bd = -1;
            for (std::size_t i = 0; i < free.size(); ++i)
                for (std::size_t j = i + 1; j < free.size(); ++j)
                    if (dist(free[i], free[j]) > bd) bd = dist(free[i], free[j]), bi = i, bj = j;
            nodes_[free[bi]].partner = free[bj];
            nodes_[free[bj]].partner = free[bi];
            free.erase(free.begin() + static_cast<std::ptrdiff_t>(bj));
            free.erase(free.begin() + static_cast<std::ptrdiff_t>(bi));
        }
    }

    nodes_[kRootId].rank = kRootRank;
    trickle_start(kRootId);
    for (NodeId n = 1; n < nodes_.size(); ++n) {
        Node& nd = nodes_[n];
        nd.dis_timer = true;
        schedule(uni(0.0, 2.0), EvType::Dis, n);
        if (nd.legit()) schedule(uni(5.0, 5.0 + cfg_.app_interval), EvType::App, n);
        if (nd.attacker()) {
            switch (*cfg_.attack) {
                case AttackKind::DA: schedule(uni(1.0, 3.0), EvType::Attack, n); break;
                case AttackKind::DS: schedule(uni(5.0, 10.0), EvType::Attack, n); break;
                case AttackKind::IR: schedule(uni(5.0, 10.0), EvType::Attack, n); break;
                default: break;
            }
        }
    }
    schedule(1.0, EvType::Tick, kNoNode);
    if (opt_.snapshot_interval > 0.0) snapshot();

    while (!queue_.empty()) {
        Ev e = queue_.top();
        queue_.pop();
        if (e.t > cfg_.duration) break;
        now_ = e.t;
        Node* nd = e.node == kNoNode ? nullptr : &nodes_[e.node];
        switch (e.type) {
            case EvType::Send: on_send(e); break;
            case EvType::SlotFlush: flush_slot(static_cast<std::int64_t>(e.gen)); break;
            case EvType::TrickleFire:
                if (e.gen == nd->tgen && nd->c < cfg_.trickle_k) send_dio(e.node);
                break;
            case EvType::TrickleEnd:
                if (e.gen == nd->tgen) {
                    nd->I = std::min(2.0 * nd->I, imax_);
                    trickle_interval(e.node);
                }
                break;
            case EvType::App:
                if (attached(e.node)) {
                    Packet p;
                    p.kind = PacketKind::APP;
                    p.dst = nd->parent;
                    p.rank = advertised(e.node);
                    p.origin = e.node;
                    p.origin_time = now_;
                    p.seq = ++nd->seq;
                    send(e.node, p, 0.0);
                }
                schedule(now_ + cfg_.app_interval, EvType::App, e.node);
                break;
            case EvType::Dao:
                if (attached(e.node)) send(e.node, make_dao(e.node, nd->parent), 0.0);
                schedule(now_ + cfg_.dao_interval * uni(0.9, 1.1), EvType::Dao, e.node);
                break;
            case EvType::Dis:
                if (attached(e.node)) {
                    nd->dis_timer = false;
                } else {
                    Packet p;
                    p.kind = PacketKind::DIS;
                    p.rank = kInfiniteRank;
                    send(e.node, p, 0.0);
                    evaluate_parent(e.node);
                    schedule(now_ + cfg_.dis_interval * uni(0.9, 1.1), EvType::Dis, e.node);
                }
                break;
            case EvType::Tick: tick(); break;
            case EvType::Attack: {
                const auto& a = cfg_.attack_params;
                if (cfg_.attack == AttackKind::DA) {
                    Packet p;
                    p.kind = PacketKind::DIS;
                    p.rank = advertised(e.node);
                    send(e.node, p, 0.0);
                    schedule(now_ + uni(0.9, 1.1) / a.dis_rate, EvType::Attack, e.node);
                } else if (cfg_.attack == AttackKind::DS) {
                    send_dio(e.node);
                    schedule(now_ + uni(0.9, 1.1) / a.ds_rate, EvType::Attack, e.node);
                } else if (cfg_.attack == AttackKind::IR) {
                    send_dio(e.node);
                    schedule(now_ + a.ir_dio_interval * uni(0.9, 1.1), EvType::Attack, e.node);
                }
                break;
            }
            case EvType::Replay:
                if (attached(e.node)) {
                    Packet p = e.pkt;
                    send(e.node, p, 0.0);
                }
                break;
        }
    }

    std::stable_sort(out_.events.begin(), out_.events.end(),
                     [](const PacketEvent& a, const PacketEvent& b) { return a.time < b.time; });
    out_.nodes = layout;
    out_.detectors = detectors_;
    return std::move(out_);
}

}  // namespace

SimResult run_simulation(const SimConfig& cfg, const SimOptions& opt) {
    validate(cfg);
    Simulator sim(cfg, opt);
    return sim.run();
}

// ---------------------------------------------------------------------------
// Trace CSV

namespace {

constexpr const char* kTraceHeader =
    "time,kind,src,dst,src_rank,adv_version,status,origin,hop_count,origin_time,seq,tx_power,rx_sensitivity,rssi,"
    "truth,observers";

std::string node_field(NodeId n) {
    if (n == kBroadcast) return "*";
    if (n == kNoNode) return "";
    return std::to_string(n);
}

NodeId parse_node(std::string_view s, std::size_t ln) {
    if (s == "*") return kBroadcast;
    if (s.empty()) return kNoNode;
    const auto v = csv::parse_int(s, ln);
    if (v < 0 || v >= static_cast<std::int64_t>(kBroadcast)) throw ParseError("node id out of range", ln);
    return static_cast<NodeId>(v);
}

}  // namespace

void write_trace(const std::string& path, const std::vector<PacketEvent>& events) {
    auto out = csv::open_output(path);
    out << "# schema_version=1\n" << kTraceHeader << '\n';
    for (const auto& e : events) {
        out << csv::format_double(e.time) << ',' << to_string(e.kind) << ',' << node_field(e.src) << ','
            << node_field(e.dst) << ',' << e.src_rank << ',' << static_cast<int>(e.adv_version) << ','
            << to_string(e.status) << ',' << node_field(e.origin) << ',' << e.hop_count << ','
            << csv::format_double(e.origin_time) << ',' << e.seq << ',' << csv::format_double(e.tx_power) << ','
            << csv::format_double(e.rx_sensitivity) << ',' << csv::format_double(e.rssi) << ',' << e.truth.name()
            << ',';
        for (std::size_t i = 0; i < e.observers.size(); ++i) {
            if (i) out << ';';
            out << e.observers[i].detector << ':' << csv::format_double(e.observers[i].rssi);
        }
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<PacketEvent> read_trace(const std::string& path) {
    auto in = csv::open_input(path);
    std::string line;
    std::size_t ln = 1;
    if (!std::getline(in, line)) throw ParseError("missing schema line", ln);
    if (line.rfind("# schema_version=", 0) != 0) throw ParseError("missing schema line", ln);
    if (line != "# schema_version=1") throw ParseError("unsupported trace " + line.substr(2), ln);
    ++ln;
    if (!std::getline(in, line) || line != kTraceHeader) throw ParseError("unexpected trace header", ln);
    std::vector<PacketEvent> events;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != 16) throw ParseError("expected 16 fields, got " + std::to_string(f.size()), ln);
        PacketEvent e;
        e.time = csv::parse_double(f[0], ln);
        auto k = parse_packet_kind(f[1]);
        if (!k) throw ParseError("unknown packet kind '" + std::string(f[1]) + "'", ln);
        e.kind = *k;
        e.src = parse_node(f[2], ln);
        e.dst = parse_node(f[3], ln);
        const auto rank = csv::parse_int(f[4], ln);
        if (rank < 0 || rank > 0xFFFF) throw ParseError("rank out of range", ln);
        e.src_rank = static_cast<std::uint16_t>(rank);
        const auto ver = csv::parse_int(f[5], ln);
        if (ver < 0 || ver > 0xFF) throw ParseError("version out of range", ln);
        e.adv_version = static_cast<std::uint8_t>(ver);
        auto st = parse_packet_status(f[6]);
        if (!st) throw ParseError("unknown status '" + std::string(f[6]) + "'", ln);
        e.status = *st;
        e.origin = parse_node(f[7], ln);
        const auto hops = csv::parse_int(f[8], ln);
        if (hops < 0 || hops > 0xFFFF) throw ParseError("hop count out of range", ln);
        e.hop_count = static_cast<std::uint16_t>(hops);
        e.origin_time = csv::parse_double(f[9], ln);
        const auto seq = csv::parse_int(f[10], ln);
        if (seq < 0) throw ParseError("negative sequence number", ln);
        e.seq = static_cast<std::uint64_t>(seq);
        e.tx_power = csv::parse_double(f[11], ln);
        e.rx_sensitivity = csv::parse_double(f[12], ln);
        e.rssi = csv::parse_double(f[13], ln);
        auto t = Label::parse(f[14]);
        if (!t) throw ParseError("unknown label '" + std::string(f[14]) + "'", ln);
        e.truth = *t;
        if (!f[15].empty()) {
            for (auto part : csv::split(f[15], ';')) {
                const auto colon = part.find(':');
                if (colon == std::string_view::npos) throw ParseError("bad observer entry", ln);
                Observation o;
                o.detector = parse_node(part.substr(0, colon), ln);
                o.rssi = csv::parse_double(part.substr(colon + 1), ln);
                e.observers.push_back(o);
            }
        }
        events.push_back(std::move(e));
    }
    return events;
}

}  // namespace rplids
