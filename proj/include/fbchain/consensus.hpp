// PoWLS package-node selection and the PoS baseline selector.

#pragma once

#include "fbchain/common.hpp"

#include <map>
#include <set>
#include <span>
#include <vector>

namespace fbchain {

struct NodeNetProfile {
    NodeId node = 0;
    double link_speed = 0.0;  // D, bytes/s
    double delay = 0.0;       // TD, seconds
};

struct PowlsConfig {
    double upsilon = 1.0;
    double phi = 100.0;
    std::size_t tau = 3;
    // 0: select once at experiment start; R > 0: re-select every R rounds.
    Round reselect_every = 0;

    void validate() const;
};

struct PackageList {
    std::vector<NodeId> members;  // descending WV
    Round round_assigned = 0;
};

// WV = upsilon * D + phi / TD
double weighted_value(const NodeNetProfile& p, const PowlsConfig& cfg);

// Total order: WV desc, then D desc, then TD asc, then node id asc.
PackageList select_package_nodes(std::span<const NodeNetProfile> profiles,
                                 const std::set<NodeId>& lt_nodes, const PowlsConfig& cfg,
                                 Round round_assigned = 0);

// members[(round - round_assigned) mod size]
NodeId producer_for_round(const PackageList& list, Round round);

NodeId pos_select(const std::map<NodeId, double>& stakes, const std::set<NodeId>& eligible);

}  // namespace fbchain
