// Virtual-time network model: per-node link speed and delay, and the
// transfer time between two endpoints. Nothing here sleeps.

#pragma once

#include "fbchain/common.hpp"
#include "fbchain/consensus.hpp"

#include <map>
#include <set>
#include <span>
#include <vector>

namespace fbchain {

inline constexpr double kMinDelaySeconds = 1e-6;

struct TopologyConfig {
    std::uint32_t total_nodes = 20;
    std::vector<NodeId> lt_ids{1, 3, 5, 7, 9, 11, 13, 15, 17, 18, 19, 20};
    double base_speed = 70000.0;
    double speed_step = 7000.0;
    double td_lo = 0.0;
    double td_hi = 1.0;
    std::uint64_t seed = 1;
    // Count both endpoint delays in a transfer (false: sender only).
    bool both_endpoint_delays = true;

    void validate() const;
};

struct TransferRecord {
    Round round = 0;
    NodeId sender = 0;
    NodeId receiver = 0;
    std::uint64_t payload_bytes = 0;
    double delay_s = 0.0;
};

// Nodes are numbered 1..total_nodes; D_i = base + step * i, TD_i ~ U[lo, hi].
std::vector<NodeNetProfile> build_profiles(const TopologyConfig& cfg);

// payload / min(D_s, D_r) + TD_s (+ TD_r)
double transfer_time(const NodeNetProfile& sender, const NodeNetProfile& receiver,
                     std::uint64_t payload_bytes, bool both_endpoint_delays = true);

// One record per LT with a payload entry, in ascending sender order.
std::vector<TransferRecord> round_delays(Round round, const std::set<NodeId>& lt_set, NodeId receiver,
                                         std::span<const NodeNetProfile> profiles,
                                         const std::map<NodeId, std::uint64_t>& payloads,
                                         bool both_endpoint_delays = true);

const NodeNetProfile& find_profile(std::span<const NodeNetProfile> profiles, NodeId node);

}  // namespace fbchain
