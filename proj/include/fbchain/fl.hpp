// Federated-learning side of a round: local trainers, FedAvg, PA-side
// verification and the credit gate on transmission.

#pragma once

#include "fbchain/common.hpp"
#include "fbchain/crypto_pipeline.hpp"

#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace fbchain {

enum class TrainerKind { Synthetic, TinyClassifier };

struct TrainerSpec {
    TrainerKind kind = TrainerKind::Synthetic;
    std::size_t local_epochs = 5;
    double learning_rate = 0.01;
    std::size_t batch_size = 10;

    void validate() const;
};

class LocalTrainer {
public:
    virtual ~LocalTrainer() = default;

    virtual LayoutId layout_id() const = 0;
    virtual std::size_t param_count() const = 0;
    virtual ModelParams initial_model(Rng& rng) const = 0;
    // Deterministic per (node, round, seed). Throws LayoutMismatch.
    virtual ModelParams local_train(const ModelParams& global, NodeId node, Round round,
                                    std::uint64_t seed) const = 0;
};

class Evaluator {
public:
    virtual ~Evaluator() = default;
    virtual std::size_t size() const = 0;
    virtual double accuracy(const ModelParams& p) const = 0;
};

// ---------------------------------------------------------------------------
// Synthetic trainer
//
// Coordinate 0 of the parameter vector is an accuracy probe: the synthetic
// evaluator reads it back (clamped to [0,1]). FedAvg over the probe therefore
// yields the mean of the aggregated members' scripted accuracies.

inline constexpr LayoutId kSyntheticLayout = 1;

struct SyntheticScript {
    // nullopt leaves the probe coordinate untouched.
    std::function<std::optional<double>(NodeId, Round)> accuracy;
    double perturbation = 0.0;
    double initial_accuracy = 0.1;
};

// Smooth rising curve with per-node offsets; `bad_nodes` are pinned low.
struct SyntheticCurve {
    double start = 0.1;
    double target = 0.95;
    double rate = 0.1;
    double node_spread = 0.0;
    std::vector<NodeId> bad_nodes;
    double bad_accuracy = 0.05;
    double perturbation = 0.01;
    std::uint64_t seed = 0;

    SyntheticScript to_script() const;
};

class SyntheticTrainer final : public LocalTrainer {
public:
    SyntheticTrainer(std::size_t param_count, SyntheticScript script);

    LayoutId layout_id() const override { return kSyntheticLayout; }
    std::size_t param_count() const override { return param_count_; }
    ModelParams initial_model(Rng& rng) const override;
    ModelParams local_train(const ModelParams& global, NodeId node, Round round,
                            std::uint64_t seed) const override;

private:
    std::size_t param_count_;
    SyntheticScript script_;
};

class SyntheticEvaluator final : public Evaluator {
public:
    std::size_t size() const override { return 1; }
    double accuracy(const ModelParams& p) const override;
};

// ---------------------------------------------------------------------------
// Tiny classifier: logistic regression [w..., b] on a two-class Gaussian set.

inline constexpr LayoutId kTinyClassifierLayout = 2;

struct Dataset {
    std::size_t features = 0;
    std::vector<double> x;  // row-major, size() * features
    std::vector<std::uint8_t> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::span<const double> row(std::size_t i) const { return {x.data() + i * features, features}; }
    Dataset subset(std::span<const std::size_t> indices) const;
};

struct GaussianDataConfig {
    std::size_t features = 8;
    std::size_t samples = 2000;
    double separation = 2.5;  // distance of each class mean from the origin
    std::uint64_t seed = 1;
};

// Balanced two-class set; class means at +/- separation along a seeded unit direction.
Dataset generate_gaussian_dataset(const GaussianDataConfig& cfg);

// "FBD1" | features u32 LE | count u64 LE | (label u8, features x f64 LE)*
void write_dataset(const std::filesystem::path& path, const Dataset& d);
Dataset read_dataset(const std::filesystem::path& path);

// Index lists, one per part.
std::vector<std::vector<std::size_t>> partition_iid(std::span<const std::size_t> indices, std::size_t parts,
                                                    Rng& rng);
// Each part draws `majority_fraction` of its samples from class (part mod 2).
std::vector<std::vector<std::size_t>> partition_label_skew(const Dataset& d, std::span<const std::size_t> indices,
                                                           std::size_t parts, double majority_fraction, Rng& rng);

class TinyClassifierTrainer final : public LocalTrainer {
public:
    TinyClassifierTrainer(TrainerSpec spec, std::size_t features, std::map<NodeId, Dataset> partitions);

    LayoutId layout_id() const override { return kTinyClassifierLayout; }
    std::size_t param_count() const override { return features_ + 1; }
    ModelParams initial_model(Rng& rng) const override;
    ModelParams local_train(const ModelParams& global, NodeId node, Round round,
                            std::uint64_t seed) const override;

    const Dataset& partition(NodeId node) const;

private:
    TrainerSpec spec_;
    std::size_t features_;
    std::map<NodeId, Dataset> partitions_;
};

double logistic_loss(const ModelParams& p, const Dataset& d);
double classifier_accuracy(const ModelParams& p, const Dataset& d);

class DatasetEvaluator final : public Evaluator {
public:
    explicit DatasetEvaluator(Dataset d) : data_(std::move(d)) {}
    std::size_t size() const override { return data_.size(); }
    double accuracy(const ModelParams& p) const override { return classifier_accuracy(p, data_); }

private:
    Dataset data_;
};

// ---------------------------------------------------------------------------

ModelParams fed_avg(std::span<const ModelParams> updates);

enum class Verdict { ALMG, ULMG };
const char* verdict_name(Verdict v) noexcept;

struct UpdateClassification {
    Verdict verdict = Verdict::ALMG;
    double measured_accuracy = 0.0;
    double reference_accuracy = 0.0;
};

// ALMG iff measured >= prev_global_acc - t_acc.
UpdateClassification classify_accuracy(double measured, double prev_global_acc, double t_acc);
UpdateClassification classify_update(const ModelParams& candidate, double prev_global_acc, double t_acc,
                                     const Evaluator& eval_set);

struct CreditGate {
    double threshold = 50.0;  // CR_TH
    Round kappa = 0;          // 0 disables gating
};

bool may_transmit(Round round, double credit, const CreditGate& gate);

struct ReceivedUpdate {
    NodeId sender = 0;
    ModelParams params;
};

struct ClassifiedUpdate {
    NodeId sender = 0;
    ModelParams params;
    UpdateClassification classification;
};

struct RejectedUpdate {
    NodeId sender = 0;
    std::string reason;
};

struct CollectedUpdates {
    std::vector<ClassifiedUpdate> almg;
    std::vector<ClassifiedUpdate> ulmg;
    std::vector<RejectedUpdate> rejected;
};

using CommitmentLookup = std::function<std::optional<Digest>(NodeId, Round)>;

// Digest-checks each update against its commitment, then classifies the
// survivors. Output lists are in ascending sender order.
CollectedUpdates verify_and_collect(std::span<const ReceivedUpdate> updates, const CommitmentLookup& commitments,
                                    Round round, double prev_global_acc, double t_acc, const Evaluator& eval_set);

}  // namespace fbchain
