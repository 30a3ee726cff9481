#include "fbchain/incentives.hpp"

#include <algorithm>
#include <cmath>

namespace fbchain {

void CreditConfig::validate() const {
    if (!(reward >= 0.0)) throw Error(ErrorCode::Config, "credit reward must be >= 0");
    if (!(penalty <= 0.0)) throw Error(ErrorCode::Config, "credit penalty must be <= 0");
    if (!(initial >= kCreditMin && initial <= kCreditMax)) {
        throw Error(ErrorCode::Config, "initial credit must lie in [0, 100]");
    }
    if (!std::isfinite(threshold)) throw Error(ErrorCode::Config, "credit threshold must be finite");
}

CreditLedger::CreditLedger(CreditConfig cfg, const std::set<NodeId>& nodes) : cfg_(cfg) {
    cfg_.validate();
    for (NodeId n : nodes) cr_[n] = cfg_.initial;
}

void CreditLedger::update_credit(const std::set<NodeId>& almg, const std::set<NodeId>& ulmg) {
    for (NodeId n : almg) {
        if (ulmg.contains(n)) {
            throw Error(ErrorCode::OverlappingSets, "node " + std::to_string(n) + " is in both ALMG and ULMG");
        }
    }
    auto bump = [this](NodeId n, double delta) {
        auto it = cr_.find(n);
        if (it == cr_.end()) throw Error(ErrorCode::UnknownNode, "no credit entry for node " + std::to_string(n));
        it->second = std::clamp(it->second + delta, kCreditMin, kCreditMax);
    };
    for (NodeId n : almg) bump(n, cfg_.reward);
    for (NodeId n : ulmg) bump(n, cfg_.penalty);
}

double CreditLedger::credit(NodeId node) const {
    auto it = cr_.find(node);
    if (it == cr_.end()) throw Error(ErrorCode::UnknownNode, "no credit entry for node " + std::to_string(node));
    return it->second;
}

std::map<NodeId, double> token_rewards(std::span<const ExScore> scores, double t_acc, double tr_total) {
    if (scores.empty()) throw Error(ErrorCode::InvalidArgument, "token_rewards needs at least one score");
    std::map<NodeId, double> terms;
    double sum = 0.0;
    for (const auto& s : scores) {
        double term = std::max(s.ex + t_acc, 0.0);
        auto [it, inserted] = terms.emplace(s.node, term);
        if (!inserted) throw Error(ErrorCode::InvalidArgument, "duplicate node in token_rewards");
        sum += term;
    }
    std::map<NodeId, double> out;
    if (sum == 0.0) {
        double each = tr_total / static_cast<double>(terms.size());
        for (const auto& [node, term] : terms) out[node] = each;
        return out;
    }
    for (const auto& [node, term] : terms) out[node] = term / sum * tr_total;
    return out;
}

StakeLedger::StakeLedger(const std::set<NodeId>& nodes) {
    for (NodeId n : nodes) stake_[n] = 0.0;
}

void StakeLedger::apply_rewards(const std::map<NodeId, double>& payouts) {
    for (const auto& [node, amount] : payouts) {
        if (!(amount >= 0.0)) throw Error(ErrorCode::InvalidArgument, "payouts must be non-negative");
    }
    for (const auto& [node, amount] : payouts) stake_[node] += amount;
}

double StakeLedger::stake(NodeId node) const {
    auto it = stake_.find(node);
    return it == stake_.end() ? 0.0 : it->second;
}

double StakeLedger::total() const {
    double t = 0.0;
    for (const auto& [node, s] : stake_) t += s;
    return t;
}

}  // namespace fbchain
