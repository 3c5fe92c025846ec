#include "rplids/features.hpp"

#include <algorithm>
#include <deque>
#include <map>
#include <optional>
#include <unordered_map>

#include "rplids/csv.hpp"
#include "rplids/error.hpp"

namespace rplids {

const std::array<std::string_view, kFeatureCount>& feature_names() {
    static const std::array<std::string_view, kFeatureCount> names = {
        "pkt_type",        "pkt_status",      "src_rank",         "adv_vn",          "snd_dis_count",
        "snd_dio_count",   "snd_dao_count",   "snd_daoack_count", "snd_cpkt_count",  "rcvd_dis_count",
        "rcvd_dio_count",  "rcvd_dao_count",  "rcvd_daoack_count", "rcvd_cpkt_count", "avg_intpkt_time",
        "rnk_alt_count",   "vn_alt_count",    "trans_app_count",  "pkt_e2e_delay",   "cpkt_loss",
        "pkt_loss",        "avg_hopcount",    "neighbour_count",  "child_count",     "same_parent",
        "rx_sen",          "tx_pwr",          "rssi",             "cmp_snd_prt_lq",  "prt_bst_lq"};
    return names;
}

namespace {

constexpr std::size_t kKinds = 5;

struct Sent {
    double t;
    PacketKind kind;
    bool bad;       // status other than Successful
    bool dropped;
    bool rank_alt;
    bool vn_alt;
    double rssi;    // as measured at the placement
    double rx_sen;
    double tx_pwr;
};

// Rolling per-node state over the horizon.
struct History {
    std::deque<Sent> sent;
    std::array<int, kKinds> snd{};
    int ctrl = 0, ctrl_bad = 0, app = 0, app_bad = 0, app_tx = 0, rank_alt = 0, vn_alt = 0;
    double rssi_sum = 0.0, rx_sum = 0.0, tx_sum = 0.0;
    std::deque<double> tx_times;  // non-drop transmissions

    std::deque<std::pair<double, PacketKind>> rcvd;
    std::array<int, kKinds> rcv{};

    std::deque<std::pair<double, NodeId>> peers;
    std::map<NodeId, int> peer_count;

    std::optional<std::uint16_t> last_dio_rank;
    std::optional<std::uint8_t> last_dio_version;
    std::optional<std::uint16_t> last_rank;

    void prune(double cutoff) {
        while (!sent.empty() && sent.front().t < cutoff) {
            const Sent& s = sent.front();
            const auto k = static_cast<std::size_t>(s.kind);
            if (!s.dropped) --snd[k];
            if (s.kind == PacketKind::APP) {
                --app;
                app_bad -= s.bad;
                app_tx -= !s.dropped;
            } else {
                --ctrl;
                ctrl_bad -= s.bad;
            }
            rank_alt -= s.rank_alt;
            vn_alt -= s.vn_alt;
            rssi_sum -= s.rssi;
            rx_sum -= s.rx_sen;
            tx_sum -= s.tx_pwr;
            sent.pop_front();
        }
        if (sent.empty()) rssi_sum = rx_sum = tx_sum = 0.0;  // shed rounding residue
        while (!tx_times.empty() && tx_times.front() < cutoff) tx_times.pop_front();
        while (!rcvd.empty() && rcvd.front().first < cutoff) {
            --rcv[static_cast<std::size_t>(rcvd.front().second)];
            rcvd.pop_front();
        }
        while (!peers.empty() && peers.front().first < cutoff) {
            auto it = peer_count.find(peers.front().second);
            if (--it->second == 0) peer_count.erase(it);
            peers.pop_front();
        }
    }

    void add_sent(const Sent& s) {
        sent.push_back(s);
        const auto k = static_cast<std::size_t>(s.kind);
        if (!s.dropped) {
            ++snd[k];
            tx_times.push_back(s.t);
        }
        if (s.kind == PacketKind::APP) {
            ++app;
            app_bad += s.bad;
            app_tx += !s.dropped;
        } else {
            ++ctrl;
            ctrl_bad += s.bad;
        }
        rank_alt += s.rank_alt;
        vn_alt += s.vn_alt;
        rssi_sum += s.rssi;
        rx_sum += s.rx_sen;
        tx_sum += s.tx_pwr;
    }

    void add_peer(double t, NodeId p) {
        peers.emplace_back(t, p);
        ++peer_count[p];
    }

    std::optional<double> lq() const {
        if (sent.empty()) return std::nullopt;
        return rssi_sum / static_cast<double>(sent.size());
    }
};

class Extractor {
public:
    Extractor(NodeId placement, const FeatureConfig& cfg) : placement_(placement), cfg_(cfg) {}

    FeatureVector observe(const PacketEvent& e, double rssi_here);

private:
    History& hist(NodeId n) { return hist_[n]; }
    History* fresh(NodeId n, double cutoff) {
        auto it = hist_.find(n);
        if (it == hist_.end()) return nullptr;
        it->second.prune(cutoff);
        return &it->second;
    }
    std::optional<NodeId> parent_of(NodeId n) const {
        auto it = parent_.find(n);
        if (it == parent_.end()) return std::nullopt;
        return it->second;
    }
    void set_parent(NodeId child, NodeId parent);
    double avg_hopcount();

    NodeId placement_;
    FeatureConfig cfg_;
    std::unordered_map<NodeId, History> hist_;
    std::unordered_map<NodeId, NodeId> parent_;
    std::unordered_map<NodeId, int> children_;
    bool hop_dirty_ = true;
    double hop_cache_ = 0.0;
};

void Extractor::set_parent(NodeId child, NodeId parent) {
    auto it = parent_.find(child);
    if (it != parent_.end()) {
        if (it->second == parent) return;
        --children_[it->second];
        it->second = parent;
    } else {
        parent_.emplace(child, parent);
    }
    ++children_[parent];
    hop_dirty_ = true;
}

// Mean depth of the DAO-derived tree; a chain ends at the first node with no
// known parent (normally the root). Nodes caught in a loop are skipped.
double Extractor::avg_hopcount() {
    if (!hop_dirty_) return hop_cache_;
    long total = 0, counted = 0;
    for (const auto& [n, p] : parent_) {
        (void)p;
        NodeId cur = n;
        long depth = 0;
        bool loop = false;
        while (true) {
            auto it = parent_.find(cur);
            if (it == parent_.end()) break;
            cur = it->second;
            if (++depth > static_cast<long>(parent_.size())) {
                loop = true;
                break;
            }
        }
        if (loop) continue;
        total += depth;
        ++counted;
    }
    hop_cache_ = counted ? static_cast<double>(total) / static_cast<double>(counted) : 0.0;
    hop_dirty_ = false;
    return hop_cache_;
}

FeatureVector Extractor::observe(const PacketEvent& e, double rssi_here) {
    const double cutoff = e.time - cfg_.horizon;
    const NodeId s = e.src;
    const bool dropped = e.status == PacketStatus::Dropped;
    const bool multicast = e.dst == kBroadcast;

    History& hs = hist(s);
    hs.prune(cutoff);
    Sent rec{e.time, e.kind, e.status != PacketStatus::Successful, dropped, false, false, rssi_here, e.rx_sensitivity,
             e.tx_power};
    if (e.kind == PacketKind::DIO) {
        rec.rank_alt = hs.last_dio_rank && *hs.last_dio_rank != e.src_rank;
        rec.vn_alt = hs.last_dio_version && *hs.last_dio_version != e.adv_version;
        hs.last_dio_rank = e.src_rank;
        hs.last_dio_version = e.adv_version;
    }
    hs.last_rank = e.src_rank;
    hs.add_sent(rec);

    const NodeId receiver = multicast ? placement_ : e.dst;
    if (!dropped && e.status == PacketStatus::Successful && receiver != s) {
        History& hr = hist(receiver);
        hr.prune(cutoff);
        hr.rcvd.emplace_back(e.time, e.kind);
        ++hr.rcv[static_cast<std::size_t>(e.kind)];
    }
    if (!multicast && !dropped && e.dst != kNoNode) {
        hs.add_peer(e.time, e.dst);
        History& hd = hist(e.dst);
        hd.prune(cutoff);
        hd.add_peer(e.time, s);
    }
    if (e.kind == PacketKind::DAO && e.hop_count == 0 && e.status == PacketStatus::Successful && !multicast)
        set_parent(s, e.dst);

    FeatureVector f{};
    f[kPktType] = static_cast<double>(e.kind);
    f[kPktStatus] = static_cast<double>(e.status);
    f[kSrcRank] = e.src_rank;
    f[kAdvVn] = e.adv_version;
    f[kSndDisCount] = hs.snd[static_cast<std::size_t>(PacketKind::DIS)];
    f[kSndDioCount] = hs.snd[static_cast<std::size_t>(PacketKind::DIO)];
    f[kSndDaoCount] = hs.snd[static_cast<std::size_t>(PacketKind::DAO)];
    f[kSndDaoackCount] = hs.snd[static_cast<std::size_t>(PacketKind::DAOACK)];
    f[kSndCpktCount] = f[kSndDisCount] + f[kSndDioCount] + f[kSndDaoCount] + f[kSndDaoackCount];
    if (History* hr = receiver == kNoNode ? nullptr : fresh(receiver, cutoff)) {
        f[kRcvdDisCount] = hr->rcv[static_cast<std::size_t>(PacketKind::DIS)];
        f[kRcvdDioCount] = hr->rcv[static_cast<std::size_t>(PacketKind::DIO)];
        f[kRcvdDaoCount] = hr->rcv[static_cast<std::size_t>(PacketKind::DAO)];
        f[kRcvdDaoackCount] = hr->rcv[static_cast<std::size_t>(PacketKind::DAOACK)];
        f[kRcvdCpktCount] = f[kRcvdDisCount] + f[kRcvdDioCount] + f[kRcvdDaoCount] + f[kRcvdDaoackCount];
    }
    // With fewer than two packets the gap defaults to the whole horizon.
    f[kAvgIntpktTime] = hs.tx_times.size() >= 2
                            ? (hs.tx_times.back() - hs.tx_times.front()) / static_cast<double>(hs.tx_times.size() - 1)
                            : cfg_.horizon;
    f[kRnkAltCount] = hs.rank_alt;
    f[kVnAltCount] = hs.vn_alt;
    f[kTransAppCount] = hs.app_tx;
    f[kPktE2eDelay] = e.kind == PacketKind::APP ? std::max(0.0, e.time - e.origin_time) : 0.0;
    f[kCpktLoss] = hs.ctrl ? static_cast<double>(hs.ctrl_bad) / hs.ctrl : 0.0;
    f[kPktLoss] = hs.app ? static_cast<double>(hs.app_bad) / hs.app : 0.0;
    f[kAvgHopcount] = avg_hopcount();
    f[kNeighbourCount] = static_cast<double>(hs.peer_count.size());
    if (auto it = children_.find(s); it != children_.end()) f[kChildCount] = it->second;
    const auto ps = parent_of(s);
    const auto pp = parent_of(placement_);
    f[kSameParent] = ps && pp && *ps == *pp ? 1.0 : 0.0;
    const double n_sent = static_cast<double>(hs.sent.size());
    f[kRxSen] = hs.rx_sum / n_sent;
    f[kTxPwr] = hs.tx_sum / n_sent;
    f[kRssi] = rssi_here;

    const auto lq_s = hs.lq();
    std::optional<double> lq_p;
    if (ps)
        if (History* hp = fresh(*ps, cutoff)) lq_p = hp->lq();
    f[kCmpSndPrtLq] = lq_s && lq_p && *lq_s > *lq_p ? 1.0 : 0.0;
    if (lq_p && hs.last_rank) {
        // Best link among nodes heard advertising a lower rank than the sender.
        double best = *lq_p;
        for (auto& [n, h] : hist_) {
            if (n == s || !h.last_rank || *h.last_rank >= *hs.last_rank) continue;
            h.prune(cutoff);
            if (auto q = h.lq()) best = std::max(best, *q);
        }
        f[kPrtBstLq] = *lq_p >= best ? 1.0 : 0.0;
    }
    return f;
}

}  // namespace

Extraction extract(std::span<const PacketEvent> trace, NodeId placement, const FeatureConfig& cfg) {
    if (!(cfg.horizon > 0.0)) throw ValidationError("feature horizon must be positive");
    Extraction ex;
    Extractor fx(placement, cfg);
    double last = -1e300;
    for (std::size_t i = 0; i < trace.size(); ++i) {
        const auto& e = trace[i];
        if (e.time < last) throw ValidationError("trace is not time-ordered at event " + std::to_string(i));
        last = e.time;
        const Observation* seen = nullptr;
        for (const auto& o : e.observers)
            if (o.detector == placement) seen = &o;
        if (!seen) continue;
        Instance x;
        x.features = fx.observe(e, seen->rssi);
        x.timestamp = e.time;
        x.sender = e.src;
        x.placement = placement;
        ex.instances.push_back(x);
        ex.source.push_back(i);
    }
    return ex;
}

void label_instances(Extraction& ex, std::span<const PacketEvent> trace) {
    for (std::size_t i = 0; i < ex.instances.size(); ++i) ex.instances[i].label = trace[ex.source.at(i)].truth;
}

std::vector<Instance> extract_labeled(std::span<const PacketEvent> trace, std::span<const NodeId> placements,
                                      const FeatureConfig& cfg) {
    std::vector<Instance> all;
    for (NodeId p : placements) {
        auto ex = extract(trace, p, cfg);
        label_instances(ex, trace);
        all.insert(all.end(), ex.instances.begin(), ex.instances.end());
    }
    std::stable_sort(all.begin(), all.end(), [](const Instance& a, const Instance& b) {
        if (a.timestamp != b.timestamp) return a.timestamp < b.timestamp;
        if (a.sender != b.sender) return a.sender < b.sender;
        return a.placement < b.placement;
    });
    return all;
}

void write_feature_csv(const std::string& path, std::span<const Instance> rows) {
    auto out = csv::open_output(path);
    for (const auto& n : feature_names()) out << n << ',';
    out << "label,timestamp,sender,placement\n";
    for (const auto& x : rows) {
        for (double v : x.features) out << csv::format_double(v) << ',';
        out << (x.label ? x.label->name() : std::string()) << ',' << csv::format_double(x.timestamp) << ','
            << x.sender << ',' << x.placement << '\n';
    }
    if (!out) throw IoError("failed writing '" + path + "'");
}

std::vector<Instance> read_feature_csv(const std::string& path) {
    auto in = csv::open_input(path);
    std::string line;
    std::size_t ln = 1;
    std::string header;
    for (const auto& n : feature_names()) header += std::string(n) + ',';
    header += "label,timestamp,sender,placement";
    if (!std::getline(in, line) || line != header) throw ParseError("unexpected feature header", ln);
    std::vector<Instance> rows;
    while (std::getline(in, line)) {
        ++ln;
        if (line.empty()) continue;
        const auto f = csv::split(line);
        if (f.size() != kFeatureCount + 4)
            throw ParseError("expected " + std::to_string(kFeatureCount + 4) + " fields", ln);
        Instance x;
        for (std::size_t d = 0; d < kFeatureCount; ++d) x.features[d] = csv::parse_double(f[d], ln);
        if (!f[kFeatureCount].empty()) {
            auto y = Label::parse(f[kFeatureCount]);
            if (!y) throw ParseError("unknown label", ln);
            x.label = *y;
        }
        x.timestamp = csv::parse_double(f[kFeatureCount + 1], ln);
        x.sender = static_cast<NodeId>(csv::parse_int(f[kFeatureCount + 2], ln));
        x.placement = static_cast<NodeId>(csv::parse_int(f[kFeatureCount + 3], ln));
        rows.push_back(x);
    }
    return rows;
}

}  // namespace rplids
