#include "fbchain/fl.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>

namespace fbchain {

void TrainerSpec::validate() const {
    if (local_epochs < 1) throw Error(ErrorCode::Config, "local_epochs must be positive");
    if (!(learning_rate >= 0.0)) throw Error(ErrorCode::Config, "learning_rate must be non-negative");
    if (batch_size < 1) throw Error(ErrorCode::Config, "batch_size must be positive");
}

namespace {

void require_layout(const ModelParams& p, LayoutId id, std::size_t length) {
    if (p.layout_id != id || p.values.size() != length) {
        throw Error(ErrorCode::LayoutMismatch, "expected layout " + std::to_string(id) + " with " +
                                                   std::to_string(length) + " weights, got layout " +
                                                   std::to_string(p.layout_id) + " with " +
                                                   std::to_string(p.values.size()));
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// Synthetic

SyntheticScript SyntheticCurve::to_script() const {
    SyntheticScript script;
    script.perturbation = perturbation;
    script.initial_accuracy = start;
    script.accuracy = [curve = *this](NodeId node, Round round) -> std::optional<double> {
        if (std::find(curve.bad_nodes.begin(), curve.bad_nodes.end(), node) != curve.bad_nodes.end()) {
            return curve.bad_accuracy;
        }
        double acc = curve.target - (curve.target - curve.start) * std::exp(-curve.rate * static_cast<double>(round));
        if (curve.node_spread != 0.0) {
            Rng rng = Rng::derive(curve.seed, {stream_tag("synthetic.offset"), node});
            acc += curve.node_spread * rng.uniform(-1.0, 1.0);
        }
        return std::clamp(acc, 0.0, 1.0);
    };
    return script;
}

SyntheticTrainer::SyntheticTrainer(std::size_t param_count, SyntheticScript script)
    : param_count_(param_count), script_(std::move(script)) {
    if (param_count_ < 1) throw Error(ErrorCode::Config, "synthetic layout needs at least the probe weight");
}

ModelParams SyntheticTrainer::initial_model(Rng& rng) const {
    ModelParams p{kSyntheticLayout, std::vector<double>(param_count_)};
    p.values[0] = script_.initial_accuracy;
    for (std::size_t i = 1; i < param_count_; ++i) p.values[i] = 0.1 * rng.normal();
    return p;
}

ModelParams SyntheticTrainer::local_train(const ModelParams& global, NodeId node, Round round,
                                          std::uint64_t seed) const {
    require_layout(global, kSyntheticLayout, param_count_);
    ModelParams out = global;
    if (script_.perturbation != 0.0) {
        Rng rng = Rng::derive(seed, {stream_tag("synthetic.train"), node, round});
        for (std::size_t i = 1; i < out.values.size(); ++i) out.values[i] += script_.perturbation * rng.normal();
    }
    if (script_.accuracy) {
        if (std::optional<double> acc = script_.accuracy(node, round)) out.values[0] = *acc;
    }
    return out;
}

double SyntheticEvaluator::accuracy(const ModelParams& p) const {
    if (p.layout_id != kSyntheticLayout || p.values.empty()) {
        throw Error(ErrorCode::LayoutMismatch, "synthetic evaluator needs the synthetic layout");
    }
    return std::clamp(p.values[0], 0.0, 1.0);
}

// ---------------------------------------------------------------------------
// Datasets

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
    Dataset out;
    out.features = features;
    out.x.reserve(indices.size() * features);
    out.labels.reserve(indices.size());
    for (std::size_t i : indices) {
        auto r = row(i);
        out.x.insert(out.x.end(), r.begin(), r.end());
        out.labels.push_back(labels[i]);
    }
    return out;
}

Dataset generate_gaussian_dataset(const GaussianDataConfig& cfg) {
    if (cfg.features == 0) throw Error(ErrorCode::Config, "dataset needs at least one feature");
    Rng rng = Rng::derive(cfg.seed, {stream_tag("dataset")});

    std::vector<double> direction(cfg.features);
    double norm = 0.0;
    do {
        for (double& v : direction) v = rng.normal();
        norm = std::sqrt(std::inner_product(direction.begin(), direction.end(), direction.begin(), 0.0));
    } while (norm == 0.0);
    for (double& v : direction) v /= norm;

    Dataset d;
    d.features = cfg.features;
    d.x.reserve(cfg.samples * cfg.features);
    d.labels.reserve(cfg.samples);
    for (std::size_t i = 0; i < cfg.samples; ++i) {
        std::uint8_t label = static_cast<std::uint8_t>(i % 2);
        double sign = label == 1 ? 1.0 : -1.0;
        for (std::size_t k = 0; k < cfg.features; ++k) {
            d.x.push_back(sign * cfg.separation * direction[k] + rng.normal());
        }
        d.labels.push_back(label);
    }
    return d;
}

void write_dataset(const std::filesystem::path& path, const Dataset& d) {
    Bytes out{'F', 'B', 'D', '1'};
    put_u32_le(out, static_cast<std::uint32_t>(d.features));
    put_u64_le(out, d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        out.push_back(d.labels[i]);
        for (double v : d.row(i)) put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    }
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

Dataset read_dataset(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
    Bytes in((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    if (in.size() < 16 || in[0] != 'F' || in[1] != 'B' || in[2] != 'D' || in[3] != '1') {
        throw Error(ErrorCode::MalformedInput, path.string() + ": not a dataset file");
    }
    Dataset d;
    d.features = get_u32_le(in, 4);
    std::uint64_t count = get_u64_le(in, 8);
    std::size_t row_bytes = 1 + 8 * d.features;
    if (d.features == 0 || (in.size() - 16) / row_bytes != count || (in.size() - 16) % row_bytes != 0) {
        throw Error(ErrorCode::MalformedInput, path.string() + ": size does not match header");
    }
    std::size_t off = 16;
    for (std::uint64_t i = 0; i < count; ++i) {
        d.labels.push_back(in[off++]);
        for (std::size_t k = 0; k < d.features; ++k, off += 8) {
            d.x.push_back(std::bit_cast<double>(get_u64_le(in, off)));
        }
    }
    return d;
}

std::vector<std::vector<std::size_t>> partition_iid(std::span<const std::size_t> indices, std::size_t parts,
                                                    Rng& rng) {
    if (parts == 0) throw Error(ErrorCode::InvalidArgument, "partition into zero parts");
    std::vector<std::size_t> shuffled(indices.begin(), indices.end());
    rng.shuffle(shuffled);
    std::vector<std::vector<std::size_t>> out(parts);
    std::size_t per = shuffled.size() / parts;
    for (std::size_t p = 0; p < parts; ++p) {
        out[p].assign(shuffled.begin() + static_cast<std::ptrdiff_t>(p * per),
                      shuffled.begin() + static_cast<std::ptrdiff_t>((p + 1) * per));
    }
    return out;
}

std::vector<std::vector<std::size_t>> partition_label_skew(const Dataset& d, std::span<const std::size_t> indices,
                                                           std::size_t parts, double majority_fraction, Rng& rng) {
    if (parts == 0) throw Error(ErrorCode::InvalidArgument, "partition into zero parts");
    if (!(majority_fraction >= 0.0 && majority_fraction <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "majority_fraction must be in [0,1]");
    }
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i : indices) by_class[d.labels[i] & 1].push_back(i);
    rng.shuffle(by_class[0]);
    rng.shuffle(by_class[1]);

    std::size_t per = indices.size() / parts;
    std::size_t major = static_cast<std::size_t>(std::llround(majority_fraction * static_cast<double>(per)));
    std::array<std::size_t, 2> cursor{0, 0};
    std::vector<std::vector<std::size_t>> out(parts);
    for (std::size_t p = 0; p < parts; ++p) {
        std::size_t cls = p % 2;
        std::array<std::size_t, 2> want{};
        want[cls] = major;
        want[1 - cls] = per - major;
        for (std::size_t c = 0; c < 2; ++c) {
            // Fall back to the other class when one runs dry.
            for (std::size_t k = 0; k < want[c]; ++k) {
                std::size_t src = cursor[c] < by_class[c].size() ? c : 1 - c;
                if (cursor[src] >= by_class[src].size()) break;
                out[p].push_back(by_class[src][cursor[src]++]);
            }
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Tiny classifier

namespace {

double dot_logit(const std::vector<double>& w, std::span<const double> x) {
    std::size_t f = x.size();
    double z = w[f];
    for (std::size_t k = 0; k < f; ++k) z += w[k] * x[k];
    return z;
}

double sigmoid(double z) {
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

}  // namespace

TinyClassifierTrainer::TinyClassifierTrainer(TrainerSpec spec, std::size_t features,
                                             std::map<NodeId, Dataset> partitions)
    : spec_(spec), features_(features), partitions_(std::move(partitions)) {
    spec_.validate();
    if (features_ == 0) throw Error(ErrorCode::Config, "classifier needs at least one feature");
    for (const auto& [node, d] : partitions_) {
        if (d.features != features_) {
            throw Error(ErrorCode::Config, "partition for node " + std::to_string(node) + " has wrong width");
        }
    }
}

ModelParams TinyClassifierTrainer::initial_model(Rng& rng) const {
    ModelParams p{kTinyClassifierLayout, std::vector<double>(features_ + 1, 0.0)};
    for (std::size_t k = 0; k < features_; ++k) p.values[k] = 0.01 * rng.normal();
    return p;
}

const Dataset& TinyClassifierTrainer::partition(NodeId node) const {
    auto it = partitions_.find(node);
    if (it == partitions_.end()) throw Error(ErrorCode::UnknownNode, "no data partition for node " + std::to_string(node));
    return it->second;
}

ModelParams TinyClassifierTrainer::local_train(const ModelParams& global, NodeId node, Round round,
                                               std::uint64_t seed) const {
    require_layout(global, kTinyClassifierLayout, features_ + 1);
    const Dataset& data = partition(node);
    ModelParams out = global;
    if (data.size() == 0 || spec_.learning_rate == 0.0) return out;

    std::vector<double>& w = out.values;
    std::vector<double> grad(features_ + 1);
    std::vector<std::size_t> order(data.size());
    for (std::size_t epoch = 0; epoch < spec_.local_epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        Rng rng = Rng::derive(seed, {stream_tag("tiny.shuffle"), node, round, epoch});
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += spec_.batch_size) {
            std::size_t end = std::min(start + spec_.batch_size, order.size());
            std::fill(grad.begin(), grad.end(), 0.0);
            for (std::size_t i = start; i < end; ++i) {
                auto x = data.row(order[i]);
                double err = sigmoid(dot_logit(w, x)) - static_cast<double>(data.labels[order[i]]);
                for (std::size_t k = 0; k < features_; ++k) grad[k] += err * x[k];
                grad[features_] += err;
            }
            double scale = spec_.learning_rate / static_cast<double>(end - start);
            for (std::size_t k = 0; k <= features_; ++k) w[k] -= scale * grad[k];
        }
    }
    return out;
}

double logistic_loss(const ModelParams& p, const Dataset& d) {
    require_layout(p, kTinyClassifierLayout, d.features + 1);
    if (d.size() == 0) throw Error(ErrorCode::EmptyEvalSet, "loss over empty dataset");
    double total = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        double z = dot_logit(p.values, d.row(i));
        double t = d.labels[i] == 1 ? z : -z;
        total += std::log1p(std::exp(-std::abs(t))) + std::max(-t, 0.0);
    }
    return total / static_cast<double>(d.size());
}

double classifier_accuracy(const ModelParams& p, const Dataset& d) {
    require_layout(p, kTinyClassifierLayout, d.features + 1);
    if (d.size() == 0) throw Error(ErrorCode::EmptyEvalSet, "accuracy over empty dataset");
    std::size_t correct = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
        bool predicted = dot_logit(p.values, d.row(i)) > 0.0;
        if (predicted == (d.labels[i] == 1)) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(d.size());
}

// ---------------------------------------------------------------------------

ModelParams fed_avg(std::span<const ModelParams> updates) {
    if (updates.empty()) throw Error(ErrorCode::NoUpdates, "fed_avg over an empty set");
    const ModelParams& first = updates.front();
    for (const auto& u : updates) require_layout(u, first.layout_id, first.values.size());

    // Summing each coordinate in sorted order makes the result independent of
    // the order in which updates arrive.
    ModelParams out{first.layout_id, std::vector<double>(first.values.size())};
    std::vector<double> column(updates.size());
    double n = static_cast<double>(updates.size());
    for (std::size_t j = 0; j < out.values.size(); ++j) {
        for (std::size_t i = 0; i < updates.size(); ++i) column[i] = updates[i].values[j];
        std::sort(column.begin(), column.end());
        double sum = column[0];
        for (std::size_t i = 1; i < column.size(); ++i) sum += column[i];
        out.values[j] = sum / n;
    }
    return out;
}

const char* verdict_name(Verdict v) noexcept {
    return v == Verdict::ALMG ? "ALMG" : "ULMG";
}

UpdateClassification classify_accuracy(double measured, double prev_global_acc, double t_acc) {
    if (!(t_acc >= 0.0)) throw Error(ErrorCode::InvalidArgument, "t_acc must be non-negative");
    UpdateClassification c;
    c.measured_accuracy = measured;
    c.reference_accuracy = prev_global_acc;
    c.verdict = measured >= prev_global_acc - t_acc ? Verdict::ALMG : Verdict::ULMG;
    return c;
}

UpdateClassification classify_update(const ModelParams& candidate, double prev_global_acc, double t_acc,
                                     const Evaluator& eval_set) {
    if (eval_set.size() == 0) throw Error(ErrorCode::EmptyEvalSet, "PA self-test set is empty");
    return classify_accuracy(eval_set.accuracy(candidate), prev_global_acc, t_acc);
}

bool may_transmit(Round round, double credit, const CreditGate& gate) {
    if (credit >= gate.threshold) return true;
    if (gate.kappa == 0) return true;
    return round % gate.kappa == 0;
}

CollectedUpdates verify_and_collect(std::span<const ReceivedUpdate> updates, const CommitmentLookup& commitments,
                                    Round round, double prev_global_acc, double t_acc, const Evaluator& eval_set) {
    std::vector<const ReceivedUpdate*> ordered;
    for (const auto& u : updates) ordered.push_back(&u);
    std::stable_sort(ordered.begin(), ordered.end(),
                     [](const ReceivedUpdate* a, const ReceivedUpdate* b) { return a->sender < b->sender; });

    CollectedUpdates out;
    for (const ReceivedUpdate* u : ordered) {
        std::optional<Digest> committed = commitments(u->sender, round);
        if (!committed) {
            out.rejected.push_back({u->sender, "no commitment on record"});
            continue;
        }
        Digest actual;
        try {
            actual = hash_digest(canonical_serialize(u->params));
        } catch (const Error& e) {
            out.rejected.push_back({u->sender, e.what()});
            continue;
        }
        if (actual != *committed) {
            out.rejected.push_back({u->sender, "digest mismatch"});
            continue;
        }
        UpdateClassification c;
        try {
            c = classify_update(u->params, prev_global_acc, t_acc, eval_set);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::LayoutMismatch) throw;
            out.rejected.push_back({u->sender, e.what()});
            continue;
        }
        auto& group = c.verdict == Verdict::ALMG ? out.almg : out.ulmg;
        group.push_back({u->sender, u->params, c});
    }
    return out;
}

}  // namespace fbchain
