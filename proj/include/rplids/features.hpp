#pragma once

#include <array>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "rplids/rplsim.hpp"
#include "rplids/types.hpp"

namespace rplids {

// Column order of FeatureVector.
enum Feature : std::size_t {
    kPktType,
    kPktStatus,
    kSrcRank,
    kAdvVn,
    kSndDisCount,
    kSndDioCount,
    kSndDaoCount,
    kSndDaoackCount,
    kSndCpktCount,
    kRcvdDisCount,
    kRcvdDioCount,
    kRcvdDaoCount,
    kRcvdDaoackCount,
    kRcvdCpktCount,
    kAvgIntpktTime,
    kRnkAltCount,
    kVnAltCount,
    kTransAppCount,
    kPktE2eDelay,
    kCpktLoss,
    kPktLoss,
    kAvgHopcount,
    kNeighbourCount,
    kChildCount,
    kSameParent,
    kRxSen,
    kTxPwr,
    kRssi,
    kCmpSndPrtLq,
    kPrtBstLq,
};

const std::array<std::string_view, kFeatureCount>& feature_names();

struct FeatureConfig {
    double horizon = 60.0;  // seconds of history behind every counter
};

// Instances plus, for each, the index of the trace event it came from.
struct Extraction {
    std::vector<Instance> instances;
    std::vector<std::size_t> source;
};

// Passive view of one detector: every event listing `placement` among its
// observers yields one instance. Labels are left empty. Throws
// ValidationError when the trace is not time-ordered.
Extraction extract(std::span<const PacketEvent> trace, NodeId placement, const FeatureConfig& cfg = {});

// Copies each generating event's truth label onto its instance.
void label_instances(Extraction& ex, std::span<const PacketEvent> trace);

// Labeled instances of several placements merged in CIDS order: timestamp,
// then sender id, then placement id.
std::vector<Instance> extract_labeled(std::span<const PacketEvent> trace, std::span<const NodeId> placements,
                                      const FeatureConfig& cfg = {});

// Feature CSV: the 30 feature columns, label, timestamp, sender, placement.
void write_feature_csv(const std::string& path, std::span<const Instance> rows);
std::vector<Instance> read_feature_csv(const std::string& path);

}  // namespace rplids
