#include "fbchain/netsim.hpp"

#include <algorithm>
#include <cmath>

namespace fbchain {

void TopologyConfig::validate() const {
    if (total_nodes == 0) throw Error(ErrorCode::Config, "total_nodes must be positive");
    std::set<NodeId> unique(lt_ids.begin(), lt_ids.end());
    if (unique.size() != lt_ids.size()) throw Error(ErrorCode::Config, "duplicate LT id");
    for (NodeId id : lt_ids) {
        if (id < 1 || id > total_nodes) {
            throw Error(ErrorCode::Config, "LT id " + std::to_string(id) + " outside 1..total_nodes");
        }
    }
    if (!(base_speed > 0.0) || !(speed_step > 0.0)) {
        throw Error(ErrorCode::Config, "base_speed and speed_step must be positive");
    }
    if (!(td_lo >= 0.0) || !(td_hi >= td_lo)) throw Error(ErrorCode::Config, "td_range must satisfy 0 <= lo <= hi");
}

std::vector<NodeNetProfile> build_profiles(const TopologyConfig& cfg) {
    cfg.validate();
    Rng rng = Rng::derive(cfg.seed, {stream_tag("netsim.td")});
    std::vector<NodeNetProfile> out;
    out.reserve(cfg.total_nodes);
    for (NodeId id = 1; id <= cfg.total_nodes; ++id) {
        double td = std::max(rng.uniform(cfg.td_lo, cfg.td_hi), kMinDelaySeconds);
        out.push_back({id, cfg.base_speed + cfg.speed_step * id, td});
    }
    return out;
}

double transfer_time(const NodeNetProfile& sender, const NodeNetProfile& receiver,
                     std::uint64_t payload_bytes, bool both_endpoint_delays) {
    double speed = std::min(sender.link_speed, receiver.link_speed);
    double delays = both_endpoint_delays ? sender.delay + receiver.delay : sender.delay;
    return static_cast<double>(payload_bytes) / speed + delays;
}

const NodeNetProfile& find_profile(std::span<const NodeNetProfile> profiles, NodeId node) {
    auto it = std::find_if(profiles.begin(), profiles.end(),
                           [node](const NodeNetProfile& p) { return p.node == node; });
    if (it == profiles.end()) throw Error(ErrorCode::UnknownNode, "no profile for node " + std::to_string(node));
    return *it;
}

std::vector<TransferRecord> round_delays(Round round, const std::set<NodeId>& lt_set, NodeId receiver,
                                         std::span<const NodeNetProfile> profiles,
                                         const std::map<NodeId, std::uint64_t>& payloads,
                                         bool both_endpoint_delays) {
    const NodeNetProfile& rx = find_profile(profiles, receiver);
    std::vector<TransferRecord> out;
    for (const auto& [sender, bytes] : payloads) {
        if (!lt_set.contains(sender)) {
            throw Error(ErrorCode::UnknownNode, "node " + std::to_string(sender) + " is not an LT node");
        }
        const NodeNetProfile& tx = find_profile(profiles, sender);
        out.push_back({round, sender, receiver, bytes, transfer_time(tx, rx, bytes, both_endpoint_delays)});
    }
    return out;
}

}  // namespace fbchain
