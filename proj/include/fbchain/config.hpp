// Experiment configuration: defaults reproduce the 20-node evaluation setup.

#pragma once

#include "fbchain/consensus.hpp"
#include "fbchain/fl.hpp"
#include "fbchain/incentives.hpp"
#include "fbchain/netsim.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace fbchain {

enum class ConsensusKind { Powls, Pos };
enum class PartitionKind { Iid, LabelSkew };
enum class TamperTarget { Ciphertext, Nonce, WrappedKey, Params };

const char* consensus_name(ConsensusKind k) noexcept;
ConsensusKind parse_consensus(std::string_view s);
const char* tamper_target_name(TamperTarget t) noexcept;

struct SyntheticConfig {
    std::size_t param_count = 16;
    SyntheticCurve curve;
};

struct DataConfig {
    std::size_t features = 8;
    std::size_t samples_per_lt = 60;
    std::size_t pa_test = 200;
    std::size_t global_test = 1000;
    double separation = 2.5;
    PartitionKind partition = PartitionKind::Iid;
    double majority_fraction = 0.8;
    // Load this dataset instead of generating one.
    std::filesystem::path file;
};

struct IncentiveConfig {
    double t_acc = 0.01;
    double tr_total = 20.0;
    // PoS baseline: each non-LT node deposits U[0, max] stake per round.
    double pos_deposit_max = 20.0;
};

struct TamperFault {
    NodeId node = 0;
    std::optional<Round> round;  // every round when unset
    TamperTarget target = TamperTarget::Ciphertext;
    std::optional<std::uint64_t> bit;  // seeded random bit when unset
};

struct DropFault {
    NodeId node = 0;
    std::optional<Round> round;
};

struct FaultConfig {
    std::vector<TamperFault> tamper;
    std::vector<DropFault> drop;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    Round rounds = 100;
    ConsensusKind consensus = ConsensusKind::Powls;
    std::filesystem::path out_dir = "out";

    TopologyConfig topology;
    // Pin every transfer to this many bytes instead of the sealed size.
    std::optional<std::uint64_t> payload_override;

    PowlsConfig powls;
    TrainerSpec trainer;
    SyntheticConfig synthetic;
    DataConfig data;
    CreditConfig credit;
    IncentiveConfig incentive;
    FaultConfig faults;

    void validate() const;
};

ExperimentConfig parse_config(const std::string& yaml_text);
ExperimentConfig load_config(const std::filesystem::path& path);
// Resolved configuration as YAML; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const ExperimentConfig& cfg);

}  // namespace fbchain
