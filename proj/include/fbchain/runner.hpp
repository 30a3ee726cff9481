// Experiment orchestrator: runs the round protocol over virtual time and
// writes the metric files and chain export.

#pragma once

#include "fbchain/config.hpp"
#include "fbchain/consensus.hpp"
#include "fbchain/crypto_pipeline.hpp"
#include "fbchain/fl.hpp"
#include "fbchain/incentives.hpp"
#include "fbchain/ledger.hpp"
#include "fbchain/netsim.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace fbchain {

struct RoleAssignment {
    std::set<NodeId> lt;
    PackageList package_list;
    std::set<NodeId> bp;
};

// LT from config, PA by PoWLS over the rest, BP = remainder.
RoleAssignment assign_roles(const ExperimentConfig& cfg, std::span<const NodeNetProfile> profiles);

enum class LtOutcome { Almg, Ulmg, Rejected, Gated, Dropped };
const char* lt_outcome_name(LtOutcome o) noexcept;

struct LtRoundRecord {
    NodeId node = 0;
    LtOutcome outcome = LtOutcome::Gated;
    bool transmitted = false;
    std::optional<double> measured_accuracy;  // on the PA self-test set
    double credit_after = 0.0;
    double stake_after = 0.0;
    std::string reject_reason;
};

struct RoundReport {
    Round round = 0;
    NodeId producer = 0;
    std::vector<TransferRecord> transfers;
    std::vector<LtRoundRecord> lt_records;
    std::size_t almg_count = 0;
    std::size_t ulmg_count = 0;
    std::size_t rejected_count = 0;
    double global_accuracy = 0.0;  // new global on the global test set
    double round_time_s = 0.0;     // max transfer delay
    Digest block_hash;
};

/// One experiment in progress. Owns the chain, ledgers, keys and trainer.
class Simulation {
public:
    explicit Simulation(ExperimentConfig cfg);
    ~Simulation();
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    // Runs the next round (1-based). Errors name the failing step.
    const RoundReport& run_round();

    const ExperimentConfig& config() const noexcept { return cfg_; }
    const RoleAssignment& roles() const noexcept { return roles_; }
    const std::vector<NodeNetProfile>& profiles() const noexcept { return profiles_; }
    const Ledger& ledger() const noexcept { return *ledger_; }
    const CreditLedger& credit() const noexcept { return credit_; }
    const StakeLedger& stakes() const noexcept { return stakes_; }
    const std::vector<RoundReport>& reports() const noexcept { return reports_; }
    const LayoutRegistry& layouts() const noexcept { return layouts_; }
    const std::optional<Dataset>& dataset() const noexcept { return dataset_; }
    Round rounds_completed() const noexcept { return reports_.size(); }

private:
    NodeId choose_producer(Round round, std::vector<NodeId>& authorized);

    ExperimentConfig cfg_;
    std::vector<NodeNetProfile> profiles_;
    RoleAssignment roles_;
    LayoutRegistry layouts_;
    std::optional<Dataset> dataset_;
    std::unique_ptr<LocalTrainer> trainer_;
    std::unique_ptr<Evaluator> pa_eval_;
    std::unique_ptr<Evaluator> global_eval_;
    std::map<NodeId, KeyPair> keys_;
    std::unique_ptr<Ledger> ledger_;
    CreditLedger credit_;
    StakeLedger stakes_;
    double prev_pa_accuracy_ = 0.0;
    double prev_global_accuracy_ = 0.0;
    std::vector<RoundReport> reports_;
};

std::string delays_csv(const ExperimentConfig& cfg, std::span<const RoundReport> reports);
std::string accuracy_csv(std::span<const RoundReport> reports);
std::string credit_csv(std::span<const RoundReport> reports);

struct ExperimentResult {
    std::vector<RoundReport> reports;
    FirstBadHeight chain_check;
    std::vector<std::filesystem::path> files;

    bool chain_ok() const noexcept { return !chain_check.has_value(); }
};

// Runs cfg.rounds rounds and writes delays.csv, accuracy.csv, credit.csv,
// chain.jsonl, manifest.yaml (and dataset.bin for the tiny classifier) into
// cfg.out_dir.
ExperimentResult run_experiment(const ExperimentConfig& cfg);

}  // namespace fbchain
