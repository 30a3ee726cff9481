// fbchain: run experiments, verify exported chains, inspect PoWLS rankings.

#include "fbchain/config.hpp"
#include "fbchain/consensus.hpp"
#include "fbchain/ledger.hpp"
#include "fbchain/netsim.hpp"
#include "fbchain/runner.hpp"

#include "CLI11.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

namespace {

fbchain::ExperimentConfig load_or_default(const std::string& path) {
    if (path.empty()) return fbchain::ExperimentConfig{};
    return fbchain::load_config(path);
}

int cmd_run(const std::string& config_path, const std::optional<std::uint64_t>& seed,
            const std::optional<fbchain::Round>& rounds, const std::string& consensus, const std::string& out_dir) {
    fbchain::ExperimentConfig cfg = load_or_default(config_path);
    if (seed) cfg.seed = *seed;
    if (rounds) cfg.rounds = *rounds;
    if (!consensus.empty()) cfg.consensus = fbchain::parse_consensus(consensus);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    cfg.validate();

    fbchain::ExperimentResult result = fbchain::run_experiment(cfg);
    const auto& last = result.reports.back();
    std::printf("rounds=%zu consensus=%s final_global_acc=%.4f\n", result.reports.size(),
                fbchain::consensus_name(cfg.consensus), last.global_accuracy);
    for (const auto& f : result.files) std::printf("wrote %s\n", f.string().c_str());
    if (!result.chain_ok()) {
        std::fprintf(stderr, "chain verification failed at height %llu\n",
                     static_cast<unsigned long long>(*result.chain_check));
        return 2;
    }
    return 0;
}

int cmd_verify(const std::string& chain_path) {
    std::ifstream f(chain_path, std::ios::binary);
    if (!f) {
        std::fprintf(stderr, "cannot open %s\n", chain_path.c_str());
        return 1;
    }
    std::stringstream ss;
    ss << f.rdbuf();
    fbchain::ChainFileCheck check = fbchain::verify_chain_jsonl(ss.str());
    if (check.ok()) {
        std::printf("ok: %zu blocks\n", check.block_count);
        return 0;
    }
    std::printf("bad block at height %llu: %s\n", static_cast<unsigned long long>(*check.first_bad_height),
                check.detail.c_str());
    return 2;
}

int cmd_profiles(const std::string& config_path, const std::optional<std::uint64_t>& seed) {
    fbchain::ExperimentConfig cfg = load_or_default(config_path);
    if (seed) cfg.seed = *seed;
    fbchain::TopologyConfig topo = cfg.topology;
    topo.seed = cfg.seed;
    auto profiles = fbchain::build_profiles(topo);
    fbchain::RoleAssignment roles = fbchain::assign_roles(cfg, profiles);

    std::printf("%-6s %-4s %12s %10s %14s\n", "node", "role", "D_bytes_s", "TD_s", "WV");
    for (const auto& p : profiles) {
        const char* role = "BP";
        if (roles.lt.contains(p.node)) {
            role = "LT";
        } else if (std::find(roles.package_list.members.begin(), roles.package_list.members.end(), p.node) !=
                   roles.package_list.members.end()) {
            role = "PA";
        }
        std::printf("%-6u %-4s %12.0f %10.6f %14.3f\n", p.node, role, p.link_speed, p.delay,
                    fbchain::weighted_value(p, cfg.powls));
    }
    std::printf("package list:");
    for (auto n : roles.package_list.members) std::printf(" %u", n);
    std::printf("\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"FBChain simulator: federated learning rounds anchored on a PoWLS chain"};
    app.require_subcommand(1);

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<fbchain::Round> rounds;
    std::string consensus;
    std::string out_dir;
    std::string chain_path;

    auto* run = app.add_subcommand("run", "Run an experiment and write metrics plus the chain export");
    run->add_option("--config", config_path, "YAML experiment config")->check(CLI::ExistingFile);
    run->add_option("--seed", seed, "Experiment seed");
    run->add_option("--rounds", rounds, "Number of global rounds");
    run->add_option("--consensus", consensus, "powls or pos")->check(CLI::IsMember({"powls", "pos"}));
    run->add_option("--out-dir", out_dir, "Output directory");

    auto* verify = app.add_subcommand("verify-chain", "Verify an exported chain.jsonl");
    verify->add_option("--chain", chain_path, "Chain export")->required()->check(CLI::ExistingFile);

    auto* profiles = app.add_subcommand("profiles", "Print link profiles and the PoWLS ranking");
    profiles->add_option("--config", config_path, "YAML experiment config")->check(CLI::ExistingFile);
    profiles->add_option("--seed", seed, "Experiment seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(config_path, seed, rounds, consensus, out_dir);
        if (*verify) return cmd_verify(chain_path);
        if (*profiles) return cmd_profiles(config_path, seed);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
