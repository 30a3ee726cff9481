#include "fbchain/runner.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>

namespace fbchain {

namespace {

std::string format_double(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

template <typename F>
auto in_step(Round round, const char* step, F&& body) -> decltype(body()) {
    try {
        return body();
    } catch (const Error& e) {
        throw Error(e.code(), "round " + std::to_string(round) + ", " + step + ": " + e.what());
    }
}

void flip_bit(std::span<std::uint8_t> bytes, std::uint64_t bit) {
    bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
}

std::uint64_t pick_bit(const TamperFault& t, std::uint64_t total_bits, std::uint64_t seed, NodeId node, Round round) {
    if (t.bit) return *t.bit % total_bits;
    Rng rng = Rng::derive(seed, {stream_tag("fault.bit"), node, round, static_cast<std::uint64_t>(t.target)});
    return rng.below(total_bits);
}

bool fault_applies(NodeId fault_node, const std::optional<Round>& fault_round, NodeId node, Round round) {
    return fault_node == node && (!fault_round || *fault_round == round);
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string() + " for writing");
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    f.close();
    if (!f) throw Error(ErrorCode::Io, "write failed: " + path.string());
}

}  // namespace

const char* lt_outcome_name(LtOutcome o) noexcept {
    switch (o) {
        case LtOutcome::Almg: return "ALMG";
        case LtOutcome::Ulmg: return "ULMG";
        case LtOutcome::Rejected: return "REJECTED";
        case LtOutcome::Gated: return "GATED";
        case LtOutcome::Dropped: return "DROPPED";
    }
    return "UNKNOWN";
}

RoleAssignment assign_roles(const ExperimentConfig& cfg, std::span<const NodeNetProfile> profiles) {
    RoleAssignment roles;
    roles.lt.insert(cfg.topology.lt_ids.begin(), cfg.topology.lt_ids.end());
    std::size_t non_lt = profiles.size() - roles.lt.size();
    if (cfg.powls.tau > non_lt) {
        throw Error(ErrorCode::Config, "tau (" + std::to_string(cfg.powls.tau) + ") exceeds the " +
                                           std::to_string(non_lt) + " non-LT nodes");
    }
    roles.package_list = select_package_nodes(profiles, roles.lt, cfg.powls, 1);
    for (const auto& p : profiles) {
        bool is_pa = std::find(roles.package_list.members.begin(), roles.package_list.members.end(), p.node) !=
                     roles.package_list.members.end();
        if (!roles.lt.contains(p.node) && !is_pa) roles.bp.insert(p.node);
    }
    return roles;
}

Simulation::Simulation(ExperimentConfig cfg)
    : cfg_(std::move(cfg)), credit_(cfg_.credit, {}) {
    cfg_.validate();
    TopologyConfig topo = cfg_.topology;
    topo.seed = cfg_.seed;
    profiles_ = build_profiles(topo);
    roles_ = assign_roles(cfg_, profiles_);

    if (cfg_.trainer.kind == TrainerKind::Synthetic) {
        SyntheticCurve curve = cfg_.synthetic.curve;
        curve.seed = cfg_.seed;
        trainer_ = std::make_unique<SyntheticTrainer>(cfg_.synthetic.param_count, curve.to_script());
        pa_eval_ = std::make_unique<SyntheticEvaluator>();
        global_eval_ = std::make_unique<SyntheticEvaluator>();
    } else {
        const DataConfig& dc = cfg_.data;
        std::size_t lt_total = dc.samples_per_lt * roles_.lt.size();
        std::size_t needed = dc.pa_test + dc.global_test + lt_total;
        if (!dc.file.empty()) {
            dataset_ = read_dataset(dc.file);
            if (dataset_->size() < needed) {
                throw Error(ErrorCode::Config, dc.file.string() + " has " + std::to_string(dataset_->size()) +
                                                   " samples, need " + std::to_string(needed));
            }
        } else {
            dataset_ = generate_gaussian_dataset({dc.features, needed, dc.separation, cfg_.seed});
        }
        const Dataset& d = *dataset_;
        std::vector<std::size_t> idx(d.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::span<const std::size_t> all(idx);
        pa_eval_ = std::make_unique<DatasetEvaluator>(d.subset(all.subspan(0, dc.pa_test)));
        global_eval_ = std::make_unique<DatasetEvaluator>(d.subset(all.subspan(dc.pa_test, dc.global_test)));
        auto pool = all.subspan(dc.pa_test + dc.global_test, lt_total);

        Rng rng = Rng::derive(cfg_.seed, {stream_tag("partition")});
        auto parts = dc.partition == PartitionKind::Iid
                         ? partition_iid(pool, roles_.lt.size(), rng)
                         : partition_label_skew(d, pool, roles_.lt.size(), dc.majority_fraction, rng);
        std::map<NodeId, Dataset> partitions;
        std::size_t k = 0;
        for (NodeId lt : roles_.lt) partitions.emplace(lt, d.subset(parts[k++]));
        trainer_ = std::make_unique<TinyClassifierTrainer>(cfg_.trainer, d.features, std::move(partitions));
    }
    layouts_.register_layout(trainer_->layout_id(), trainer_->param_count());

    std::set<NodeId> all_nodes;
    for (const auto& p : profiles_) {
        all_nodes.insert(p.node);
        if (!roles_.lt.contains(p.node)) {
            Rng rng = Rng::derive(cfg_.seed, {stream_tag("node.key"), p.node});
            keys_.emplace(p.node, generate_keypair(rng));
        }
    }

    Rng genesis_rng = Rng::derive(cfg_.seed, {stream_tag("genesis")});
    ModelParams genesis = trainer_->initial_model(genesis_rng);
    prev_pa_accuracy_ = pa_eval_->accuracy(genesis);
    prev_global_accuracy_ = global_eval_->accuracy(genesis);
    ledger_ = std::make_unique<Ledger>(std::move(genesis));

    credit_ = CreditLedger(cfg_.credit, roles_.lt);
    stakes_ = StakeLedger(all_nodes);
    if (cfg_.consensus == ConsensusKind::Pos) {
        std::map<NodeId, double> deposits;
        for (const auto& [node, key] : keys_) {
            Rng rng = Rng::derive(cfg_.seed, {stream_tag("pos.deposit"), 0, node});
            deposits[node] = rng.uniform(0.0, cfg_.incentive.pos_deposit_max);
        }
        stakes_.apply_rewards(deposits);
    }
}

Simulation::~Simulation() = default;

NodeId Simulation::choose_producer(Round round, std::vector<NodeId>& authorized) {
    if (cfg_.consensus == ConsensusKind::Powls) {
        Round every = cfg_.powls.reselect_every;
        if (every > 0 && round > 1 && (round - 1) % every == 0) {
            roles_.package_list = select_package_nodes(profiles_, roles_.lt, cfg_.powls, round);
        }
        authorized = roles_.package_list.members;
        return producer_for_round(roles_.package_list, round);
    }
    std::set<NodeId> eligible;
    for (const auto& [node, key] : keys_) eligible.insert(node);
    NodeId producer = pos_select(stakes_.stakes(), eligible);
    authorized = {producer};
    return producer;
}

const RoundReport& Simulation::run_round() {
    const Round r = reports_.size() + 1;
    const std::uint64_t seed = cfg_.seed;
    RoundReport report;
    report.round = r;

    std::vector<NodeId> authorized;
    report.producer = in_step(r, "producer selection", [&] { return choose_producer(r, authorized); });
    const KeyPair& producer_key = keys_.at(report.producer);
    const ModelParams global = ledger_->latest_global_model();
    const CreditGate gate{cfg_.credit.threshold, cfg_.credit.kappa};

    struct Outgoing {
        NodeId node;
        SealedUpdate sealed;
    };
    std::map<NodeId, LtRoundRecord> records;
    std::vector<Outgoing> outgoing;
    std::map<NodeId, std::uint64_t> payloads;

    for (NodeId lt : roles_.lt) {
        LtRoundRecord rec;
        rec.node = lt;
        bool allowed = may_transmit(r, credit_.credit(lt), gate);
        // Gated nodes still train so their local state tracks the chain.
        ModelParams local = in_step(r, "local training", [&] { return trainer_->local_train(global, lt, r, seed); });
        if (!allowed) {
            rec.outcome = LtOutcome::Gated;
            records[lt] = rec;
            continue;
        }
        rec.transmitted = true;

        SealedUpdate sealed = in_step(r, "commit and seal", [&] {
            Digest d = hash_digest(canonical_serialize(local));
            SubmitResult sr = ledger_->submit_hash_tx(HashTransaction{lt, r, d});
            if (!sr.accepted()) throw Error(ErrorCode::InvalidArgument, sr.reason);
            return seal_update(local, lt, r, producer_key.public_key, seed);
        });

        for (const auto& t : cfg_.faults.tamper) {
            if (!fault_applies(t.node, t.round, lt, r)) continue;
            switch (t.target) {
                case TamperTarget::Ciphertext:
                    flip_bit(sealed.ciphertext, pick_bit(t, sealed.ciphertext.size() * 8, seed, lt, r));
                    break;
                case TamperTarget::Nonce:
                    flip_bit(sealed.nonce, pick_bit(t, sealed.nonce.size() * 8, seed, lt, r));
                    break;
                case TamperTarget::WrappedKey:
                    flip_bit(sealed.wrapped_key, pick_bit(t, sealed.wrapped_key.size() * 8, seed, lt, r));
                    break;
                case TamperTarget::Params:
                    break;  // applied after the producer decrypts
            }
        }
        bool dropped = std::any_of(cfg_.faults.drop.begin(), cfg_.faults.drop.end(),
                                   [&](const DropFault& d) { return fault_applies(d.node, d.round, lt, r); });
        if (dropped) {
            rec.outcome = LtOutcome::Dropped;
            records[lt] = rec;
            continue;
        }
        payloads[lt] = cfg_.payload_override.value_or(sealed.payload_size());
        records[lt] = rec;
        outgoing.push_back({lt, std::move(sealed)});
    }

    report.transfers = in_step(r, "transfer delays", [&] {
        return round_delays(r, roles_.lt, report.producer, profiles_, payloads,
                            cfg_.topology.both_endpoint_delays);
    });
    for (const auto& t : report.transfers) report.round_time_s = std::max(report.round_time_s, t.delay_s);

    // Producer side: open, tamper hook, verify against commitments, classify.
    std::vector<ReceivedUpdate> received;
    for (const auto& o : outgoing) {
        ModelParams params;
        try {
            params = open_update(o.sealed, producer_key, layouts_).params;
        } catch (const Error& e) {
            records[o.node].outcome = LtOutcome::Rejected;
            records[o.node].reject_reason = e.what();
            continue;
        }
        for (const auto& t : cfg_.faults.tamper) {
            if (t.target != TamperTarget::Params || !fault_applies(t.node, t.round, o.node, r)) continue;
            if (params.values.empty()) continue;
            std::uint64_t bit = pick_bit(t, params.values.size() * 64, seed, o.node, r);
            auto bits = std::bit_cast<std::uint64_t>(params.values[bit / 64]) ^ (std::uint64_t{1} << (bit % 64));
            params.values[bit / 64] = std::bit_cast<double>(bits);
        }
        received.push_back({o.node, std::move(params)});
    }

    const Ledger& ledger = *ledger_;
    CommitmentLookup lookup = [&ledger](NodeId n, Round rr) -> std::optional<Digest> {
        if (auto d = ledger.lookup_pending(n, rr)) return d;
        return ledger.lookup_commitment(n, rr);
    };
    CollectedUpdates collected = in_step(r, "verify and classify", [&] {
        return verify_and_collect(received, lookup, r, prev_pa_accuracy_, cfg_.incentive.t_acc, *pa_eval_);
    });

    std::set<NodeId> almg_ids;
    std::set<NodeId> ulmg_ids;
    std::vector<ModelParams> almg_params;
    std::vector<ExScore> scores;
    auto record_verified = [&](const ClassifiedUpdate& u, LtOutcome outcome) {
        records[u.sender].outcome = outcome;
        records[u.sender].measured_accuracy = u.classification.measured_accuracy;
        scores.push_back({u.sender, global_eval_->accuracy(u.params) - prev_global_accuracy_});
    };
    for (const auto& u : collected.almg) {
        record_verified(u, LtOutcome::Almg);
        almg_ids.insert(u.sender);
        almg_params.push_back(u.params);
    }
    for (const auto& u : collected.ulmg) {
        record_verified(u, LtOutcome::Ulmg);
        ulmg_ids.insert(u.sender);
    }
    for (const auto& rej : collected.rejected) {
        records[rej.sender].outcome = LtOutcome::Rejected;
        records[rej.sender].reject_reason = rej.reason;
    }

    ModelParams next_global = almg_params.empty() ? global : in_step(r, "aggregation", [&] {
        return fed_avg(almg_params);
    });

    const Block& block = in_step(r, "block packaging", [&]() -> const Block& {
        return ledger_->package_block(next_global, report.producer, r, authorized);
    });
    report.block_hash = block.block_hash;

    in_step(r, "incentives", [&] {
        credit_.update_credit(almg_ids, ulmg_ids);
        if (!scores.empty()) {
            stakes_.apply_rewards(token_rewards(scores, cfg_.incentive.t_acc, cfg_.incentive.tr_total));
        }
        if (cfg_.consensus == ConsensusKind::Pos) {
            std::map<NodeId, double> deposits;
            for (const auto& [node, key] : keys_) {
                Rng rng = Rng::derive(seed, {stream_tag("pos.deposit"), r, node});
                deposits[node] = rng.uniform(0.0, cfg_.incentive.pos_deposit_max);
            }
            stakes_.apply_rewards(deposits);
        }
    });

    const ModelParams& packaged = ledger_->latest_global_model();
    prev_pa_accuracy_ = pa_eval_->accuracy(packaged);
    report.global_accuracy = global_eval_->accuracy(packaged);
    prev_global_accuracy_ = report.global_accuracy;

    report.almg_count = collected.almg.size();
    report.ulmg_count = collected.ulmg.size();
    for (auto& [node, rec] : records) {
        if (rec.outcome == LtOutcome::Rejected) ++report.rejected_count;
        rec.credit_after = credit_.credit(node);
        rec.stake_after = stakes_.stake(node);
        report.lt_records.push_back(rec);
    }
    reports_.push_back(std::move(report));
    return reports_.back();
}

std::string delays_csv(const ExperimentConfig& cfg, std::span<const RoundReport> reports) {
    std::ostringstream out;
    out << "round,sender,receiver,payload_bytes,delay_s,consensus\n";
    for (const auto& rep : reports) {
        for (const auto& t : rep.transfers) {
            out << t.round << ',' << t.sender << ',' << t.receiver << ',' << t.payload_bytes << ','
                << format_double(t.delay_s) << ',' << consensus_name(cfg.consensus) << '\n';
        }
    }
    return out.str();
}

std::string accuracy_csv(std::span<const RoundReport> reports) {
    std::ostringstream out;
    out << "round,node,role,measured_acc,verdict,global_acc\n";
    for (const auto& rep : reports) {
        std::string global = format_double(rep.global_accuracy);
        for (const auto& rec : rep.lt_records) {
            out << rep.round << ',' << rec.node << ",LT,"
                << (rec.measured_accuracy ? format_double(*rec.measured_accuracy) : std::string()) << ','
                << lt_outcome_name(rec.outcome) << ',' << global << '\n';
        }
        out << rep.round << ',' << rep.producer << ",PA," << global << ",GLOBAL," << global << '\n';
    }
    return out.str();
}

std::string credit_csv(std::span<const RoundReport> reports) {
    std::ostringstream out;
    out << "round,node,cr,stake,transmitted,verdict\n";
    for (const auto& rep : reports) {
        for (const auto& rec : rep.lt_records) {
            out << rep.round << ',' << rec.node << ',' << format_double(rec.credit_after) << ','
                << format_double(rec.stake_after) << ',' << (rec.transmitted ? "true" : "false") << ','
                << lt_outcome_name(rec.outcome) << '\n';
        }
    }
    return out.str();
}

ExperimentResult run_experiment(const ExperimentConfig& cfg) {
    Simulation sim(cfg);
    for (Round i = 0; i < cfg.rounds; ++i) sim.run_round();

    ExperimentResult result;
    result.reports = sim.reports();
    result.chain_check = verify_chain(sim.ledger().blocks());

    std::error_code ec;
    std::filesystem::create_directories(cfg.out_dir, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + cfg.out_dir.string() + ": " + ec.message());

    auto emit = [&](const char* name, std::string_view content) {
        std::filesystem::path p = cfg.out_dir / name;
        write_file(p, content);
        result.files.push_back(p);
    };
    emit("delays.csv", delays_csv(cfg, result.reports));
    emit("accuracy.csv", accuracy_csv(result.reports));
    emit("credit.csv", credit_csv(result.reports));
    emit("chain.jsonl", export_chain_jsonl(sim.ledger().blocks()));

    ExperimentConfig resolved = cfg;
    if (sim.dataset() && cfg.data.file.empty()) {
        std::filesystem::path p = cfg.out_dir / "dataset.bin";
        write_dataset(p, *sim.dataset());
        result.files.push_back(p);
        resolved.data.file = p;
    }
    emit("manifest.yaml", dump_config(resolved));
    return result;
}

}  // namespace fbchain
