#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rplids/types.hpp"

namespace rplids {

enum class PacketKind : std::uint8_t { DIO = 0, DIS = 1, DAO = 2, DAOACK = 3, APP = 4 };
enum class PacketStatus : std::uint8_t { Successful = 0, Collided = 1, Dropped = 2 };
enum class ObjectiveFunction { OF0, LQ };
enum class MobilityModel { RandomWalk, GroupWalk };

std::string_view to_string(PacketKind k);
std::string_view to_string(PacketStatus s);
std::optional<PacketKind> parse_packet_kind(std::string_view s);
std::optional<PacketStatus> parse_packet_status(std::string_view s);
bool is_control(PacketKind k);

inline constexpr std::uint16_t kRootRank = 256;
inline constexpr std::uint16_t kMinHopRankIncrease = 256;
inline constexpr std::uint16_t kInfiniteRank = 0xFFFF;
inline constexpr NodeId kRootId = 0;

struct AttackParams {
    double dis_rate = 10.0;           // DA: DIS per second
    double grayhole_drop = 0.5;       // GH: drop probability
    std::uint16_t ir_step = 1024;     // IR: rank growth per DIO
    std::uint16_t ir_max_increase = 0xFFFF;  // IR: wraps back to the true rank past this much
    double ir_dio_interval = 4.0;     // IR: seconds between DIOs
    double ds_rate = 5.0;             // DS: DIO per second
    double wormhole_tx_power = 0.0;   // WH: dBm used for tunnel replays
    double wormhole_replay_gap = 0.0; // WH: min seconds between replays at one endpoint
};

struct SimConfig {
    int node_count = 32;              // LLN nodes, excluding the root
    double malicious_fraction = 0.2;
    double mobile_fraction = 0.2;
    double terrain_side = 250.0;      // metres
    double tx_range = 50.0;           // metres
    double velocity = 5.0;            // m/s
    double duration = 1800.0;         // seconds
    ObjectiveFunction objective = ObjectiveFunction::OF0;
    MobilityModel mobility = MobilityModel::RandomWalk;
    double rx_sensitivity = -85.0;    // dBm
    double tx_power = 0.0;            // dBm
    double path_loss_exponent = 2.0;
    double path_loss_d0 = 40.0;       // dB at 1 m
    double detector_fraction = 0.1;
    double node_spacing = 35.0;       // metres between grid neighbours
    std::optional<AttackKind> attack; // none = attack-free run
    AttackParams attack_params{};
    // Timers
    double trickle_imin = 4.0;
    int trickle_doublings = 8;
    int trickle_k = 10;
    double app_interval = 10.0;
    double dao_interval = 60.0;
    double dis_interval = 5.0;        // while detached
    double slot = 0.005;              // collision slot length
    int max_retries = 2;
    std::uint64_t seed = 1;
};

// Throws ValidationError.
void validate(const SimConfig& cfg);

// Flat key=value file; '#' starts a comment. Unknown keys are rejected.
SimConfig read_sim_config(const std::string& path);
SimConfig parse_sim_config(const std::string& text);
void apply_sim_config_entry(SimConfig& cfg, const std::string& key, const std::string& value);
std::string format_sim_config(const SimConfig& cfg);

// A detector that overheard the packet and the RSSI it measured.
struct Observation {
    NodeId detector = kNoNode;
    double rssi = 0.0;
    friend bool operator==(const Observation&, const Observation&) = default;
};

struct PacketEvent {
    double time = 0.0;
    PacketKind kind = PacketKind::DIO;
    NodeId src = kNoNode;
    NodeId dst = kBroadcast;          // kBroadcast for multicast
    std::uint16_t src_rank = 0;
    std::uint8_t adv_version = 0;
    PacketStatus status = PacketStatus::Successful;
    NodeId origin = kNoNode;          // first sender of a multi-hop packet
    std::uint16_t hop_count = 0;      // hops already travelled before this one
    double origin_time = 0.0;
    std::uint64_t seq = 0;
    double tx_power = 0.0;
    double rx_sensitivity = 0.0;
    double rssi = 0.0;                // at dst (unicast) or strongest receiver
    Label truth;
    std::vector<Observation> observers;

    bool multicast() const { return dst == kBroadcast; }
    friend bool operator==(const PacketEvent&, const PacketEvent&) = default;
};

enum class NodeRole { Root, Legit, Detector, Attacker };

struct NodeInfo {
    NodeId id = 0;
    NodeRole role = NodeRole::Legit;
    bool mobile = false;
    double x = 0.0;  // initial position
    double y = 0.0;
};

// Snapshot of the routing state for invariant checks.
struct DodagSnapshot {
    double time = 0.0;
    std::vector<NodeId> parent;       // kNoNode when detached
    std::vector<std::uint16_t> rank;
    std::vector<NodeRole> role;
    std::vector<std::uint16_t> parent_rank;  // what the parent advertises (kInfiniteRank when detached)
};

struct SimResult {
    std::vector<PacketEvent> events;
    std::vector<NodeInfo> nodes;
    std::vector<NodeId> detectors;
    std::vector<DodagSnapshot> snapshots;  // only when requested
    // (time, node, new parent) for every parent change of a legitimate node.
    struct ParentChange {
        double time;
        NodeId node;
        NodeId parent;
    };
    std::vector<ParentChange> parent_changes;
};

struct SimOptions {
    double snapshot_interval = 0.0;  // 0 = none
};

// Log-distance path loss: PL(d) = PL(d0) + 10 n log10(d / 1 m).
double path_loss_db(const SimConfig& cfg, double distance);
double rssi_dbm(const SimConfig& cfg, double distance);
bool link_ok(const SimConfig& cfg, double distance);

// Deterministic in cfg. Throws ValidationError on bad configuration.
SimResult run_simulation(const SimConfig& cfg, const SimOptions& opt = {});

// Role/layout assignment only (same for every attack kind under one seed).
std::vector<NodeInfo> plan_layout(const SimConfig& cfg);

// Trace CSV with a "# schema_version=1" first line.
void write_trace(const std::string& path, const std::vector<PacketEvent>& events);
std::vector<PacketEvent> read_trace(const std::string& path);

}  // namespace rplids
