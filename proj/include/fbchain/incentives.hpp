// Credit scores with reward/penalty and the per-round token distribution.

#pragma once

#include "fbchain/common.hpp"

#include <map>
#include <set>
#include <span>

namespace fbchain {

inline constexpr double kCreditMin = 0.0;
inline constexpr double kCreditMax = 100.0;

struct CreditConfig {
    double threshold = 50.0;  // CR_TH
    double reward = 5.0;      // CR^r, >= 0
    double penalty = -5.0;    // CR^p, <= 0
    Round kappa = 0;
    double initial = 100.0;

    void validate() const;
};

class CreditLedger {
public:
    CreditLedger(CreditConfig cfg, const std::set<NodeId>& nodes);

    // ALMG members gain `reward`, ULMG members gain `penalty`; results are
    // clamped to [0, 100]. Throws OverlappingSets if a node is in both.
    void update_credit(const std::set<NodeId>& almg, const std::set<NodeId>& ulmg);

    double credit(NodeId node) const;
    const std::map<NodeId, double>& scores() const noexcept { return cr_; }
    const CreditConfig& config() const noexcept { return cfg_; }

private:
    CreditConfig cfg_;
    std::map<NodeId, double> cr_;
};

struct ExScore {
    NodeId node = 0;
    double ex = 0.0;  // local accuracy minus previous global accuracy
};

// TR_i = max(EX_i + t_acc, 0) / sum_j max(EX_j + t_acc, 0) * tr_total, with an
// equal split when every term clamps to zero.
std::map<NodeId, double> token_rewards(std::span<const ExScore> scores, double t_acc, double tr_total);

class StakeLedger {
public:
    StakeLedger() = default;
    explicit StakeLedger(const std::set<NodeId>& nodes);

    void apply_rewards(const std::map<NodeId, double>& payouts);

    double stake(NodeId node) const;
    double total() const;
    const std::map<NodeId, double>& stakes() const noexcept { return stake_; }

private:
    std::map<NodeId, double> stake_;
};

}  // namespace fbchain
