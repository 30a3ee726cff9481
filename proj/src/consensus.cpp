#include "fbchain/consensus.hpp"

#include <algorithm>
#include <cmath>

namespace fbchain {

void PowlsConfig::validate() const {
    if (!(upsilon >= 0.0) || !(phi >= 0.0) || (upsilon == 0.0 && phi == 0.0)) {
        throw Error(ErrorCode::Config, "PoWLS weights must be non-negative and not both zero");
    }
    if (tau < 1) throw Error(ErrorCode::Config, "tau must be at least 1");
}

double weighted_value(const NodeNetProfile& p, const PowlsConfig& cfg) {
    if (!(p.delay > 0.0) || !std::isfinite(p.delay)) {
        throw Error(ErrorCode::InvalidProfile, "node " + std::to_string(p.node) + " has TD <= 0");
    }
    if (!(p.link_speed > 0.0) || !std::isfinite(p.link_speed)) {
        throw Error(ErrorCode::InvalidProfile, "node " + std::to_string(p.node) + " has D <= 0");
    }
    return cfg.upsilon * p.link_speed + cfg.phi * (1.0 / p.delay);
}

PackageList select_package_nodes(std::span<const NodeNetProfile> profiles,
                                 const std::set<NodeId>& lt_nodes, const PowlsConfig& cfg,
                                 Round round_assigned) {
    cfg.validate();
    struct Ranked {
        double wv;
        const NodeNetProfile* profile;
    };
    std::vector<Ranked> ranked;
    for (const auto& p : profiles) {
        if (lt_nodes.contains(p.node)) continue;
        ranked.push_back({weighted_value(p, cfg), &p});
    }
    if (ranked.empty()) throw Error(ErrorCode::EmptyCandidates, "no eligible non-LT nodes");

    std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
        if (a.wv != b.wv) return a.wv > b.wv;
        if (a.profile->link_speed != b.profile->link_speed) {
            return a.profile->link_speed > b.profile->link_speed;
        }
        if (a.profile->delay != b.profile->delay) return a.profile->delay < b.profile->delay;
        return a.profile->node < b.profile->node;
    });

    PackageList list;
    list.round_assigned = round_assigned;
    std::size_t n = std::min(cfg.tau, ranked.size());
    for (std::size_t i = 0; i < n; ++i) list.members.push_back(ranked[i].profile->node);
    return list;
}

NodeId producer_for_round(const PackageList& list, Round round) {
    if (list.members.empty()) throw Error(ErrorCode::EmptyPackageList, "package list is empty");
    if (round < list.round_assigned) {
        throw Error(ErrorCode::InvalidArgument, "round precedes package list assignment");
    }
    return list.members[(round - list.round_assigned) % list.members.size()];
}

NodeId pos_select(const std::map<NodeId, double>& stakes, const std::set<NodeId>& eligible) {
    if (eligible.empty()) throw Error(ErrorCode::EmptyCandidates, "no eligible nodes for PoS");
    NodeId best = *eligible.begin();
    double best_stake = -1.0;
    // eligible iterates in ascending id, so strict > keeps the lowest id on ties.
    for (NodeId n : eligible) {
        auto it = stakes.find(n);
        double s = it == stakes.end() ? 0.0 : it->second;
        if (s > best_stake) {
            best = n;
            best_stake = s;
        }
    }
    return best;
}

}  // namespace fbchain
