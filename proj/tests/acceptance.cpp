// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
#include "fbchain/runner.hpp"

#include <algorithm>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

using namespace fbchain;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

std::filesystem::path g_out_root = "acceptance_out";

std::string fmt(const char* f, double a) {
    char buf[128];
    std::snprintf(buf, sizeof(buf), f, a);
    return buf;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::stringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

double random_finite(Rng& rng) {
    for (;;) {
        double d = std::bit_cast<double>(rng.next_u64());
        if (std::isfinite(d)) return d;
    }
}

Outcome weighted_value_oracle() {
    Rng rng(101);
    double worst = 0.0;
    auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < 10000; ++i) {
        PowlsConfig cfg{rng.uniform(0.0, 10.0), rng.uniform(0.0, 1000.0), 3, 0};
        double d = rng.uniform(1.0, 1e7);
        double td = rng.uniform(kMinDelaySeconds, 1.0);
        double oracle = cfg.upsilon * d + cfg.phi * (1.0 / td);
        double got = weighted_value({static_cast<NodeId>(i + 1), d, td}, cfg);
        worst = std::max(worst, std::abs(got - oracle) / std::abs(oracle));
    }
    double secs = seconds_since(t0);
    return {worst <= 1e-12 && secs < 1.0,
            fmt("max relative error %.3g", worst) + fmt(", %.3f s", secs)};
}

Outcome token_reward_conservation() {
    Rng rng(102);
    double worst = 0.0;
    int clamped_vectors = 0;
    for (int i = 0; i < 10000; ++i) {
        std::size_t n = 1 + rng.below(12);
        std::vector<ExScore> s;
        bool clamped = false;
        for (std::size_t k = 0; k < n; ++k) {
            double ex = rng.uniform(-0.2, 0.2);
            clamped = clamped || ex + 0.01 < 0.0;
            s.push_back({static_cast<NodeId>(k + 1), ex});
        }
        clamped_vectors += clamped;
        double sum = 0.0;
        for (const auto& [node, v] : token_rewards(s, 0.01, 20.0)) sum += v;
        worst = std::max(worst, std::abs(sum - 20.0));
    }
    bool symmetric_ok = true;
    for (int i = 0; i < 1000; ++i) {
        std::size_t n = 1 + rng.below(12);
        double ex = rng.uniform(-0.2, 0.2);
        std::vector<ExScore> s;
        for (std::size_t k = 0; k < n; ++k) s.push_back({static_cast<NodeId>(k + 1), ex});
        auto tr = token_rewards(s, 0.01, 20.0);
        for (const auto& [node, v] : tr) symmetric_ok = symmetric_ok && v == tr.begin()->second;
    }
    return {worst <= 1e-9 && symmetric_ok && clamped_vectors > 0,
            fmt("max |sum - 20| %.3g", worst) + ", " + std::to_string(clamped_vectors) +
                " vectors hit the clamp, symmetric split " + (symmetric_ok ? "exact" : "NOT exact")};
}

Outcome delay_comparison() {
    constexpr std::uint64_t kPayload = 6137000;
    constexpr int kSeeds = 20;
    auto t0 = std::chrono::steady_clock::now();
    const std::vector<NodeId> lt_ids = TopologyConfig{}.lt_ids;
    std::map<NodeId, double> mean_powls, mean_pos;
    double dev1_min = INFINITY, dev1_max = -INFINITY, worst_transfer_term = 0.0;
    const double dev1_term = static_cast<double>(kPayload) / 77000.0;

    for (ConsensusKind kind : {ConsensusKind::Powls, ConsensusKind::Pos}) {
        auto& mean = kind == ConsensusKind::Powls ? mean_powls : mean_pos;
        for (std::uint64_t seed = 1; seed <= kSeeds; ++seed) {
            ExperimentConfig cfg;
            cfg.seed = seed;
            cfg.rounds = 100;
            cfg.consensus = kind;
            cfg.payload_override = kPayload;
            Simulation sim(cfg);
            std::map<NodeId, double> sum;
            for (Round r = 1; r <= cfg.rounds; ++r) {
                const RoundReport& rep = sim.run_round();
                double rx_delay = find_profile(sim.profiles(), rep.producer).delay;
                for (const auto& t : rep.transfers) {
                    sum[t.sender] += t.delay_s;
                    if (t.sender != 1) continue;
                    dev1_min = std::min(dev1_min, t.delay_s);
                    dev1_max = std::max(dev1_max, t.delay_s);
                    double tx_delay = find_profile(sim.profiles(), 1).delay;
                    worst_transfer_term =
                        std::max(worst_transfer_term, std::abs(t.delay_s - tx_delay - rx_delay - dev1_term));
                }
            }
            for (NodeId n : lt_ids) mean[n] += sum[n] / static_cast<double>(cfg.rounds) / kSeeds;
        }
    }
    double secs = seconds_since(t0);

    int not_worse = 0, strictly_better = 0;
    std::string worse_nodes;
    for (NodeId n : lt_ids) {
        if (mean_powls[n] <= mean_pos[n]) ++not_worse;
        else worse_nodes += " " + std::to_string(n) + fmt("(+%.3f s)", mean_powls[n] - mean_pos[n]);
        if (mean_powls[n] < mean_pos[n]) ++strictly_better;
    }
    bool band_ok = dev1_max - dev1_min <= 2.0 && worst_transfer_term <= 1e-9;
    bool order_ok = not_worse == static_cast<int>(lt_ids.size()) && strictly_better >= 6;
    std::string detail = fmt("device 1 band [%.3f, ", dev1_min) + fmt("%.3f] s", dev1_max) +
                         fmt(", transfer-term deviation %.2g", worst_transfer_term) + "; PoWLS <= PoS for " +
                         std::to_string(not_worse) + "/12, strictly lower for " + std::to_string(strictly_better) +
                         "/12" + (worse_nodes.empty() ? "" : ", worse:" + worse_nodes) + fmt(", %.1f s", secs);
    return {band_ok && order_ok && secs < 30.0, detail};
}

Outcome tamper_detection() {
    auto t0 = std::chrono::steady_clock::now();
    Rng key_rng(104);
    KeyPair pa = generate_keypair(key_rng);
    Rng rng(204);
    SyntheticEvaluator eval;
    Ledger ledger(ModelParams{kSyntheticLayout, {0.0}});
    int tampered_rejected = 0, clean_rejected = 0;
    std::map<TamperTarget, int> by_target;

    auto transfer = [&](int i, bool tamper) {
        NodeId sender = static_cast<NodeId>(i % 12 + 1);
        Round round = static_cast<Round>(i / 12 + 1);
        std::size_t len = 1 + rng.below(512);
        ModelParams p{kSyntheticLayout, {rng.uniform01()}};
        for (std::size_t k = 1; k < len; ++k) p.values.push_back(rng.normal());
        LayoutRegistry layouts;
        layouts.register_layout(kSyntheticLayout, len);
        ledger.submit_hash_tx({sender, round, hash_digest(canonical_serialize(p))});
        SealedUpdate s = seal_update(p, sender, round, pa.public_key, rng.next_u64());

        auto flip = [&](std::span<std::uint8_t> bytes) {
            std::uint64_t bit = rng.below(bytes.size() * 8);
            bytes[bit / 8] ^= static_cast<std::uint8_t>(1u << (bit % 8));
        };
        TamperTarget target = static_cast<TamperTarget>(rng.below(4));
        if (tamper) {
            ++by_target[target];
            if (target == TamperTarget::Ciphertext) flip(s.ciphertext);
            if (target == TamperTarget::Nonce) flip(s.nonce);
            if (target == TamperTarget::WrappedKey) flip(s.wrapped_key);
        }
        ModelParams opened;
        try {
            opened = open_update(s, pa, layouts).params;
        } catch (const Error&) {
            return true;
        }
        if (tamper && target == TamperTarget::Params) {
            std::size_t k = rng.below(opened.values.size());
            std::uint64_t bits = std::bit_cast<std::uint64_t>(opened.values[k]) ^ (1ull << rng.below(64));
            opened.values[k] = std::bit_cast<double>(bits);
        }
        CommitmentLookup lookup = [&](NodeId n, Round r) { return ledger.lookup_pending(n, r); };
        std::vector<ReceivedUpdate> received{{sender, opened}};
        return !verify_and_collect(received, lookup, round, 0.0, 0.01, eval).rejected.empty();
    };

    for (int i = 0; i < 1000; ++i) tampered_rejected += transfer(i, true);
    for (int i = 1000; i < 2000; ++i) clean_rejected += transfer(i, false);
    double secs = seconds_since(t0);
    std::string mix;
    for (const auto& [t, c] : by_target) mix += std::string(" ") + tamper_target_name(t) + "=" + std::to_string(c);
    return {tampered_rejected == 1000 && clean_rejected == 0 && secs < 30.0,
            std::to_string(tampered_rejected) + "/1000 tampered rejected (" + mix.substr(1) + "), " +
                std::to_string(clean_rejected) + "/1000 clean rejected" + fmt(", %.1f s", secs)};
}

Outcome pipeline_round_trip() {
    Rng key_rng(105);
    KeyPair pa = generate_keypair(key_rng);
    Rng rng(205);
    int identical = 0, deterministic = 0;
    std::size_t max_len = 0;
    for (int i = 0; i < 1000; ++i) {
        std::size_t len = i == 0 ? 0 : i == 1 ? 10000 : rng.below(10001);
        max_len = std::max(max_len, len);
        LayoutId layout = static_cast<LayoutId>(len + 1);
        ModelParams p{layout, {}};
        for (std::size_t k = 0; k < len; ++k) p.values.push_back(random_finite(rng));
        LayoutRegistry layouts;
        layouts.register_layout(layout, len);
        std::uint64_t seed = rng.next_u64();
        SealedUpdate a = seal_update(p, static_cast<NodeId>(i), static_cast<Round>(i), pa.public_key, seed);
        SealedUpdate b = seal_update(p, static_cast<NodeId>(i), static_cast<Round>(i), pa.public_key, seed);
        identical += bitwise_equal(open_update(a, pa, layouts).params, p);
        deterministic += encode_sealed(a) == encode_sealed(b);
    }
    return {identical == 1000 && deterministic == 1000,
            std::to_string(identical) + "/1000 bitwise round-trips, " + std::to_string(deterministic) +
                "/1000 byte-identical reseals, lengths up to " + std::to_string(max_len)};
}

Outcome fed_avg_oracle() {
    Rng rng(106);
    double worst = 0.0;
    int permutation_failures = 0;
    for (int t = 0; t < 1000; ++t) {
        std::size_t n = 1 + rng.below(50);
        std::size_t len = 1 + rng.below(100);
        std::vector<ModelParams> u(n, ModelParams{kSyntheticLayout, {}});
        for (auto& p : u) {
            for (std::size_t j = 0; j < len; ++j) p.values.push_back(rng.uniform(-1.0, 1.0));
        }
        ModelParams got = fed_avg(u);
        for (std::size_t j = 0; j < len; ++j) {
            double s = 0.0;
            for (const auto& p : u) s += p.values[j];
            worst = std::max(worst, std::abs(got.values[j] - s / static_cast<double>(n)));
        }
        rng.shuffle(u);
        permutation_failures += !bitwise_equal(fed_avg(u), got);
    }
    return {worst <= 1e-12 && permutation_failures == 0,
            fmt("max |avg - oracle| %.3g", worst) + ", " + std::to_string(permutation_failures) +
                " permutation mismatches over 1000 trials"};
}

struct CreditTrace {
    std::vector<double> cr;  // cr[r] after round r; cr[0] = initial
    std::vector<bool> penalized;
};

CreditTrace scripted_credit_run(Round kappa, Round rounds, NodeId bad) {
    ExperimentConfig cfg;
    cfg.seed = 7;
    cfg.rounds = rounds;
    cfg.credit.initial = 100.0;
    cfg.credit.penalty = -5.0;
    cfg.credit.threshold = 50.0;
    cfg.credit.kappa = kappa;
    cfg.synthetic.curve.bad_nodes = {bad};
    cfg.synthetic.curve.bad_accuracy = 0.0;
    Simulation sim(cfg);
    CreditTrace trace{{cfg.credit.initial}, {false}};
    for (Round r = 1; r <= rounds; ++r) {
        const RoundReport& rep = sim.run_round();
        for (const auto& rec : rep.lt_records) {
            if (rec.node != bad) continue;
            trace.cr.push_back(rec.credit_after);
            trace.penalized.push_back(rec.outcome == LtOutcome::Ulmg);
        }
    }
    return trace;
}

// Checks the crossing round and the post-crossing step period; returns a
// description of the first violation, or an empty string.
std::string check_credit_trace(const CreditTrace& t, Round kappa) {
    Round crossing = 0;
    int penalties = 0;
    for (Round r = 1; r < t.cr.size(); ++r) {
        penalties += t.penalized[r];
        if (t.cr[r] < 50.0) {
            crossing = r;
            break;
        }
    }
    if (crossing == 0) return "never crossed below 50";
    if (penalties != 11) return "crossed after " + std::to_string(penalties) + " penalized rounds";
    for (Round r = crossing + 1; r < t.cr.size(); ++r) {
        bool changed = t.cr[r] != t.cr[r - 1];
        bool should_change = r % kappa == 0 && t.cr[r - 1] > 0.0;
        if (changed != should_change) {
            return "kappa " + std::to_string(kappa) + ": round " + std::to_string(r) +
                   (changed ? " changed" : " did not change");
        }
    }
    return {};
}

Outcome credit_trajectory() {
    CreditTrace k5 = scripted_credit_run(5, 80, 11);
    CreditTrace k10 = scripted_credit_run(10, 150, 11);
    std::string e5 = check_credit_trace(k5, 5);
    std::string e10 = check_credit_trace(k10, 10);
    auto steps = [](const CreditTrace& t) {
        std::string s;
        for (Round r = 1; r < t.cr.size(); ++r) {
            if (t.cr[r] != t.cr[r - 1] && t.cr[r] < 50.0) s += " " + std::to_string(r);
        }
        return s;
    };
    std::string detail = e5.empty() && e10.empty()
                             ? "crossed below 50 after 11 penalties; kappa 5 steps at" + steps(k5) +
                                   "; kappa 10 steps at" + steps(k10)
                             : e5 + (e5.empty() || e10.empty() ? "" : "; ") + e10;
    return {e5.empty() && e10.empty(), detail};
}

Outcome chain_integrity() {
    ExperimentConfig cfg;
    cfg.seed = 8;
    cfg.rounds = 100;
    cfg.out_dir = g_out_root / "chain";
    ExperimentResult res = run_experiment(cfg);
    const std::string text = slurp(cfg.out_dir / "chain.jsonl");
    ChainFileCheck clean = verify_chain_jsonl(text);
    if (!res.chain_ok() || !clean.ok() || clean.block_count != 101) {
        return {false, "clean chain did not verify: " + clean.detail};
    }

    std::vector<std::size_t> line_of(text.size());
    std::vector<std::size_t> line_start{0};
    for (std::size_t i = 0, line = 0; i < text.size(); ++i) {
        line_of[i] = line;
        if (text[i] == '\n') {
            ++line;
            line_start.push_back(i + 1);
        }
    }
    std::vector<std::size_t> positions;
    for (std::size_t h = 0; h + 1 < line_start.size(); ++h) {
        positions.push_back(line_start[h]);
        positions.push_back(line_start[h + 1] - 2);
        positions.push_back(line_start[h + 1] - 1);
    }
    Rng rng(108);
    for (int i = 0; i < 2000; ++i) positions.push_back(rng.below(text.size()));

    std::size_t misnamed = 0;
    std::string first_problem;
    for (std::size_t pos : positions) {
        std::string m = text;
        char c;
        do {
            c = static_cast<char>(rng.below(256));
        } while (c == m[pos]);
        m[pos] = c;
        ChainFileCheck check = verify_chain_jsonl(m);
        if (check.first_bad_height != FirstBadHeight{line_of[pos]}) {
            if (misnamed++ == 0) first_problem = ", first at byte " + std::to_string(pos);
        }
    }
    return {misnamed == 0, "101 blocks verified clean; " + std::to_string(positions.size() - misnamed) + "/" +
                               std::to_string(positions.size()) + " single-byte mutations named their block" +
                               first_problem};
}

Outcome fl_convergence() {
    auto t0 = std::chrono::steady_clock::now();
    auto run = [](Round kappa, double threshold, double reward, double penalty, const char* dir) {
        ExperimentConfig cfg;
        cfg.seed = 9;
        cfg.rounds = 50;
        cfg.trainer = {TrainerKind::TinyClassifier, 5, 0.01, 10};
        cfg.credit.kappa = kappa;
        cfg.credit.threshold = threshold;
        cfg.credit.reward = reward;
        cfg.credit.penalty = penalty;
        cfg.out_dir = g_out_root / dir;
        return run_experiment(cfg).reports;
    };
    auto open = run(0, 50, 5, -5, "fl_kappa0");
    auto gated = run(10, 60, 10, -10, "fl_kappa10");
    double secs = seconds_since(t0);
    Round reached = 0;
    double best = 0.0;
    for (const auto& rep : open) {
        best = std::max(best, rep.global_accuracy);
        if (reached == 0 && rep.global_accuracy >= 0.9) reached = rep.round;
    }
    double final_open = open.back().global_accuracy;
    double final_gated = gated.back().global_accuracy;
    bool ok = reached != 0 && final_open >= final_gated - 0.05 && secs < 120.0;
    std::string detail = (reached ? "reached 0.9 at round " + std::to_string(reached)
                                  : fmt("never reached 0.9 (best %.4f)", best)) +
                         fmt("; final accuracy kappa 0 %.4f", final_open) + fmt(" vs kappa 10 %.4f", final_gated) +
                         fmt(", %.1f s", secs);
    return {ok, detail};
}

Outcome determinism() {
    const char* files[] = {"delays.csv", "accuracy.csv", "credit.csv", "chain.jsonl"};
    std::string mismatches;
    int compared = 0;
    for (int variant = 0; variant < 2; ++variant) {
        ExperimentConfig a;
        a.seed = 10;
        a.rounds = variant == 0 ? 100 : 20;
        a.consensus = variant == 0 ? ConsensusKind::Pos : ConsensusKind::Powls;
        if (variant == 1) a.trainer.kind = TrainerKind::TinyClassifier;
        ExperimentConfig b = a;
        a.out_dir = g_out_root / ("det_" + std::to_string(variant) + "_a");
        b.out_dir = g_out_root / ("det_" + std::to_string(variant) + "_b");
        run_experiment(a);
        run_experiment(b);
        for (const char* f : files) {
            ++compared;
            if (slurp(a.out_dir / f) != slurp(b.out_dir / f)) mismatches += std::string(" ") + f;
        }
    }
    return {mismatches.empty(), mismatches.empty() ? std::to_string(compared) + " file pairs byte-identical"
                                                   : "differing:" + mismatches};
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) g_out_root = argv[1];
    std::filesystem::create_directories(g_out_root);

    const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
        {"weighted-value oracle", weighted_value_oracle},
        {"token reward conservation", token_reward_conservation},
        {"PoWLS vs PoS transmission delay", delay_comparison},
        {"tamper detection", tamper_detection},
        {"pipeline round-trip", pipeline_round_trip},
        {"FedAvg oracle", fed_avg_oracle},
        {"credit trajectory", credit_trajectory},
        {"chain integrity", chain_integrity},
        {"FL convergence", fl_convergence},
        {"determinism", determinism},
    };
    int failed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Outcome o;
        try {
            o = criteria[i].second();
        } catch (const std::exception& e) {
            o = {false, std::string("exception: ") + e.what()};
        }
        failed += !o.pass;
        std::printf("[%s] %zu. %s: %s\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str());
        std::fflush(stdout);
    }
    std::printf("%zu/%zu criteria passed\n", criteria.size() - failed, criteria.size());
    return failed == 0 ? 0 : 1;
}
