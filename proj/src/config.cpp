#include "fbchain/config.hpp"

#include <yaml-cpp/yaml.h>

#include <fstream>
#include <set>
#include <sstream>

namespace fbchain {

const char* consensus_name(ConsensusKind k) noexcept {
    return k == ConsensusKind::Powls ? "powls" : "pos";
}

ConsensusKind parse_consensus(std::string_view s) {
    if (s == "powls") return ConsensusKind::Powls;
    if (s == "pos") return ConsensusKind::Pos;
    throw Error(ErrorCode::Config, "consensus must be powls or pos, got '" + std::string(s) + "'");
}

const char* tamper_target_name(TamperTarget t) noexcept {
    switch (t) {
        case TamperTarget::Ciphertext: return "ciphertext";
        case TamperTarget::Nonce: return "nonce";
        case TamperTarget::WrappedKey: return "wrapped_key";
        case TamperTarget::Params: return "params";
    }
    return "unknown";
}

namespace {

TamperTarget parse_tamper_target(const std::string& s) {
    for (auto t : {TamperTarget::Ciphertext, TamperTarget::Nonce, TamperTarget::WrappedKey, TamperTarget::Params}) {
        if (s == tamper_target_name(t)) return t;
    }
    throw Error(ErrorCode::Config, "unknown tamper target '" + s + "'");
}

const char* trainer_kind_name(TrainerKind k) {
    return k == TrainerKind::Synthetic ? "synthetic" : "tiny_classifier";
}

TrainerKind parse_trainer_kind(const std::string& s) {
    if (s == "synthetic") return TrainerKind::Synthetic;
    if (s == "tiny_classifier") return TrainerKind::TinyClassifier;
    throw Error(ErrorCode::Config, "trainer.kind must be synthetic or tiny_classifier, got '" + s + "'");
}

const char* partition_name(PartitionKind k) {
    return k == PartitionKind::Iid ? "iid" : "label_skew";
}

PartitionKind parse_partition(const std::string& s) {
    if (s == "iid") return PartitionKind::Iid;
    if (s == "label_skew") return PartitionKind::LabelSkew;
    throw Error(ErrorCode::Config, "data.partition must be iid or label_skew, got '" + s + "'");
}

// Reads keys out of one mapping and rejects any it does not recognize.
class Section {
public:
    Section(const YAML::Node& node, std::string path) : node_(node), path_(std::move(path)) {
        if (node_ && !node_.IsMap()) throw Error(ErrorCode::Config, path_ + " must be a mapping");
    }

    // Rejects keys that were never read.
    void finish() const {
        if (!node_) return;
        for (const auto& kv : node_) {
            auto key = kv.first.as<std::string>();
            if (!seen_.contains(key)) throw Error(ErrorCode::Config, "unknown key " + qualified(key));
        }
    }

    template <typename T>
    void read(const char* key, T& out) {
        seen_.insert(key);
        if (!node_ || !node_[key]) return;
        try {
            out = node_[key].template as<T>();
        } catch (const YAML::Exception& e) {
            throw Error(ErrorCode::Config, "bad value for " + qualified(key) + ": " + e.what());
        }
    }

    YAML::Node child(const char* key) {
        seen_.insert(key);
        return node_ ? node_[key] : YAML::Node();
    }

    std::string qualified(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

private:
    YAML::Node node_;
    std::string path_;
    std::set<std::string> seen_;
};

std::optional<Round> read_optional_round(Section& s, const char* key) {
    std::optional<Round> out;
    Round value = 0;
    YAML::Node n = s.child(key);
    if (n) {
        try {
            value = n.as<Round>();
        } catch (const YAML::Exception& e) {
            throw Error(ErrorCode::Config, "bad value for " + s.qualified(key) + ": " + e.what());
        }
        out = value;
    }
    return out;
}

ExperimentConfig from_yaml(const YAML::Node& root) {
    ExperimentConfig c;
    {
        Section s(root, "");
        s.read("seed", c.seed);
        s.read("rounds", c.rounds);
        std::string consensus = consensus_name(c.consensus);
        s.read("consensus", consensus);
        c.consensus = parse_consensus(consensus);
        std::string out_dir = c.out_dir.string();
        s.read("out_dir", out_dir);
        c.out_dir = out_dir;
        if (YAML::Node p = s.child("payload_override"); p && !p.IsNull()) c.payload_override = p.as<std::uint64_t>();

        {
            Section t(s.child("topology"), "topology");
            t.read("total_nodes", c.topology.total_nodes);
            t.read("lt_ids", c.topology.lt_ids);
            std::vector<double> range{c.topology.td_lo, c.topology.td_hi};
            t.read("td_range", range);
            if (range.size() != 2) throw Error(ErrorCode::Config, "topology.td_range must be [lo, hi]");
            c.topology.td_lo = range[0];
            c.topology.td_hi = range[1];
            t.read("base_speed", c.topology.base_speed);
            t.read("speed_step", c.topology.speed_step);
            t.read("both_endpoint_delays", c.topology.both_endpoint_delays);
            t.finish();
        }
        {
            Section p(s.child("powls"), "powls");
            p.read("upsilon", c.powls.upsilon);
            p.read("phi", c.powls.phi);
            p.read("tau", c.powls.tau);
            p.read("reselect_every", c.powls.reselect_every);
            p.finish();
        }
        {
            Section t(s.child("trainer"), "trainer");
            std::string kind = trainer_kind_name(c.trainer.kind);
            t.read("kind", kind);
            c.trainer.kind = parse_trainer_kind(kind);
            t.read("local_epochs", c.trainer.local_epochs);
            t.read("learning_rate", c.trainer.learning_rate);
            t.read("batch_size", c.trainer.batch_size);
            t.finish();
        }
        {
            Section y(s.child("synthetic"), "synthetic");
            y.read("param_count", c.synthetic.param_count);
            y.read("start", c.synthetic.curve.start);
            y.read("target", c.synthetic.curve.target);
            y.read("rate", c.synthetic.curve.rate);
            y.read("node_spread", c.synthetic.curve.node_spread);
            y.read("bad_nodes", c.synthetic.curve.bad_nodes);
            y.read("bad_accuracy", c.synthetic.curve.bad_accuracy);
            y.read("perturbation", c.synthetic.curve.perturbation);
            y.finish();
        }
        {
            Section d(s.child("data"), "data");
            d.read("features", c.data.features);
            d.read("samples_per_lt", c.data.samples_per_lt);
            d.read("pa_test", c.data.pa_test);
            d.read("global_test", c.data.global_test);
            d.read("separation", c.data.separation);
            std::string partition = partition_name(c.data.partition);
            d.read("partition", partition);
            c.data.partition = parse_partition(partition);
            d.read("majority_fraction", c.data.majority_fraction);
            std::string file = c.data.file.string();
            d.read("file", file);
            c.data.file = file;
            d.finish();
        }
        {
            Section r(s.child("credit"), "credit");
            r.read("threshold", c.credit.threshold);
            r.read("reward", c.credit.reward);
            r.read("penalty", c.credit.penalty);
            r.read("kappa", c.credit.kappa);
            r.read("initial", c.credit.initial);
            r.finish();
        }
        {
            Section i(s.child("incentive"), "incentive");
            i.read("t_acc", c.incentive.t_acc);
            i.read("tr_total", c.incentive.tr_total);
            i.read("pos_deposit_max", c.incentive.pos_deposit_max);
            i.finish();
        }
        {
            Section f(s.child("faults"), "faults");
            if (YAML::Node list = f.child("tamper")) {
                for (const auto& item : list) {
                    Section e(item, "faults.tamper[]");
                    TamperFault t;
                    e.read("node", t.node);
                    t.round = read_optional_round(e, "round");
                    std::string target = tamper_target_name(t.target);
                    e.read("target", target);
                    t.target = parse_tamper_target(target);
                    if (YAML::Node b = e.child("bit")) t.bit = b.as<std::uint64_t>();
                    e.finish();
                    c.faults.tamper.push_back(t);
                }
            }
            if (YAML::Node list = f.child("drop")) {
                for (const auto& item : list) {
                    Section e(item, "faults.drop[]");
                    DropFault d;
                    e.read("node", d.node);
                    d.round = read_optional_round(e, "round");
                    e.finish();
                    c.faults.drop.push_back(d);
                }
            }
            f.finish();
        }
        s.finish();
    }
    c.validate();
    return c;
}

}  // namespace

void ExperimentConfig::validate() const {
    if (rounds < 1) throw Error(ErrorCode::Config, "rounds must be positive");
    topology.validate();
    powls.validate();
    trainer.validate();
    credit.validate();
    if (!(incentive.t_acc >= 0.0)) throw Error(ErrorCode::Config, "t_acc must be non-negative");
    if (!(incentive.tr_total >= 0.0)) throw Error(ErrorCode::Config, "tr_total must be non-negative");
    if (!(incentive.pos_deposit_max >= 0.0)) throw Error(ErrorCode::Config, "pos_deposit_max must be non-negative");
    std::size_t non_lt = topology.total_nodes - topology.lt_ids.size();
    if (non_lt == 0) throw Error(ErrorCode::Config, "topology leaves no non-LT node to aggregate");
    if (consensus == ConsensusKind::Powls && powls.tau > non_lt) {
        throw Error(ErrorCode::Config, "tau (" + std::to_string(powls.tau) + ") exceeds the " +
                                           std::to_string(non_lt) + " non-LT nodes");
    }
    if (trainer.kind == TrainerKind::TinyClassifier) {
        if (data.features == 0 || data.samples_per_lt == 0 || data.pa_test == 0 || data.global_test == 0) {
            throw Error(ErrorCode::Config, "data sizes must be positive for the tiny classifier");
        }
    }
}

ExperimentConfig parse_config(const std::string& yaml_text) {
    YAML::Node root;
    try {
        root = YAML::Load(yaml_text);
    } catch (const YAML::Exception& e) {
        throw Error(ErrorCode::Config, std::string("YAML parse error: ") + e.what());
    }
    if (root.IsNull()) root = YAML::Node(YAML::NodeType::Map);
    return from_yaml(root);
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream f(path);
    if (!f) throw Error(ErrorCode::Io, "cannot open config " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const Error& e) {
        throw Error(e.code(), path.string() + ": " + e.what());
    }
}

std::string dump_config(const ExperimentConfig& c) {
    YAML::Emitter out;
    out.SetDoublePrecision(17);
    out << YAML::BeginMap;
    out << YAML::Key << "seed" << YAML::Value << c.seed;
    out << YAML::Key << "rounds" << YAML::Value << c.rounds;
    out << YAML::Key << "consensus" << YAML::Value << consensus_name(c.consensus);
    out << YAML::Key << "out_dir" << YAML::Value << c.out_dir.string();
    if (c.payload_override) out << YAML::Key << "payload_override" << YAML::Value << *c.payload_override;

    out << YAML::Key << "topology" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "total_nodes" << YAML::Value << c.topology.total_nodes;
    out << YAML::Key << "lt_ids" << YAML::Value << YAML::Flow << c.topology.lt_ids;
    out << YAML::Key << "base_speed" << YAML::Value << c.topology.base_speed;
    out << YAML::Key << "speed_step" << YAML::Value << c.topology.speed_step;
    out << YAML::Key << "td_range" << YAML::Value << YAML::Flow
        << std::vector<double>{c.topology.td_lo, c.topology.td_hi};
    out << YAML::Key << "both_endpoint_delays" << YAML::Value << c.topology.both_endpoint_delays;
    out << YAML::EndMap;

    out << YAML::Key << "powls" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "upsilon" << YAML::Value << c.powls.upsilon;
    out << YAML::Key << "phi" << YAML::Value << c.powls.phi;
    out << YAML::Key << "tau" << YAML::Value << c.powls.tau;
    out << YAML::Key << "reselect_every" << YAML::Value << c.powls.reselect_every;
    out << YAML::EndMap;

    out << YAML::Key << "trainer" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "kind" << YAML::Value << trainer_kind_name(c.trainer.kind);
    out << YAML::Key << "local_epochs" << YAML::Value << c.trainer.local_epochs;
    out << YAML::Key << "learning_rate" << YAML::Value << c.trainer.learning_rate;
    out << YAML::Key << "batch_size" << YAML::Value << c.trainer.batch_size;
    out << YAML::EndMap;

    out << YAML::Key << "synthetic" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "param_count" << YAML::Value << c.synthetic.param_count;
    out << YAML::Key << "start" << YAML::Value << c.synthetic.curve.start;
    out << YAML::Key << "target" << YAML::Value << c.synthetic.curve.target;
    out << YAML::Key << "rate" << YAML::Value << c.synthetic.curve.rate;
    out << YAML::Key << "node_spread" << YAML::Value << c.synthetic.curve.node_spread;
    out << YAML::Key << "bad_nodes" << YAML::Value << YAML::Flow << c.synthetic.curve.bad_nodes;
    out << YAML::Key << "bad_accuracy" << YAML::Value << c.synthetic.curve.bad_accuracy;
    out << YAML::Key << "perturbation" << YAML::Value << c.synthetic.curve.perturbation;
    out << YAML::EndMap;

    out << YAML::Key << "data" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "features" << YAML::Value << c.data.features;
    out << YAML::Key << "samples_per_lt" << YAML::Value << c.data.samples_per_lt;
    out << YAML::Key << "pa_test" << YAML::Value << c.data.pa_test;
    out << YAML::Key << "global_test" << YAML::Value << c.data.global_test;
    out << YAML::Key << "separation" << YAML::Value << c.data.separation;
    out << YAML::Key << "partition" << YAML::Value << partition_name(c.data.partition);
    out << YAML::Key << "majority_fraction" << YAML::Value << c.data.majority_fraction;
    out << YAML::Key << "file" << YAML::Value << c.data.file.string();
    out << YAML::EndMap;

    out << YAML::Key << "credit" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "threshold" << YAML::Value << c.credit.threshold;
    out << YAML::Key << "reward" << YAML::Value << c.credit.reward;
    out << YAML::Key << "penalty" << YAML::Value << c.credit.penalty;
    out << YAML::Key << "kappa" << YAML::Value << c.credit.kappa;
    out << YAML::Key << "initial" << YAML::Value << c.credit.initial;
    out << YAML::EndMap;

    out << YAML::Key << "incentive" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "t_acc" << YAML::Value << c.incentive.t_acc;
    out << YAML::Key << "tr_total" << YAML::Value << c.incentive.tr_total;
    out << YAML::Key << "pos_deposit_max" << YAML::Value << c.incentive.pos_deposit_max;
    out << YAML::EndMap;

    out << YAML::Key << "faults" << YAML::Value << YAML::BeginMap;
    out << YAML::Key << "tamper" << YAML::Value << YAML::BeginSeq;
    for (const auto& t : c.faults.tamper) {
        out << YAML::BeginMap;
        out << YAML::Key << "node" << YAML::Value << t.node;
        if (t.round) out << YAML::Key << "round" << YAML::Value << *t.round;
        out << YAML::Key << "target" << YAML::Value << tamper_target_name(t.target);
        if (t.bit) out << YAML::Key << "bit" << YAML::Value << *t.bit;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::Key << "drop" << YAML::Value << YAML::BeginSeq;
    for (const auto& d : c.faults.drop) {
        out << YAML::BeginMap;
        out << YAML::Key << "node" << YAML::Value << d.node;
        if (d.round) out << YAML::Key << "round" << YAML::Value << *d.round;
        out << YAML::EndMap;
    }
    out << YAML::EndSeq;
    out << YAML::EndMap;

    out << YAML::EndMap;
    return std::string(out.c_str()) + "\n";
}

}  // namespace fbchain
