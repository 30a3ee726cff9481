#include "fbchain/config.hpp"

#include <gtest/gtest.h>

namespace fbchain {
namespace {

TEST(Config, EmptyGivesDefaults) {
    ExperimentConfig c = parse_config("");
    EXPECT_EQ(c.seed, 1u);
    EXPECT_EQ(c.rounds, 100u);
    EXPECT_EQ(c.consensus, ConsensusKind::Powls);
    EXPECT_EQ(c.topology.total_nodes, 20u);
    EXPECT_EQ(c.topology.lt_ids.size(), 12u);
    EXPECT_EQ(c.powls.upsilon, 1.0);
    EXPECT_EQ(c.powls.phi, 100.0);
    EXPECT_EQ(c.powls.tau, 3u);
    EXPECT_EQ(c.incentive.tr_total, 20.0);
    EXPECT_EQ(c.trainer.learning_rate, 0.01);
    EXPECT_EQ(c.trainer.batch_size, 10u);
    EXPECT_EQ(c.trainer.local_epochs, 5u);
    EXPECT_FALSE(c.payload_override.has_value());
}

TEST(Config, ParsesSections) {
    ExperimentConfig c = parse_config(R"(
seed: 9
rounds: 12
consensus: pos
payload_override: 6137000
topology:
  lt_ids: [1, 2]
  td_range: [0.1, 0.2]
powls:
  tau: 2
trainer:
  kind: tiny_classifier
  learning_rate: 0.05
credit:
  kappa: 5
  threshold: 60
synthetic:
  bad_nodes: [3]
faults:
  tamper:
    - node: 1
      round: 3
      target: nonce
  drop:
    - node: 2
)");
    EXPECT_EQ(c.seed, 9u);
    EXPECT_EQ(c.rounds, 12u);
    EXPECT_EQ(c.consensus, ConsensusKind::Pos);
    EXPECT_EQ(c.payload_override, std::optional<std::uint64_t>{6137000});
    EXPECT_EQ(c.topology.lt_ids, (std::vector<NodeId>{1, 2}));
    EXPECT_EQ(c.topology.td_lo, 0.1);
    EXPECT_EQ(c.topology.td_hi, 0.2);
    EXPECT_EQ(c.powls.tau, 2u);
    EXPECT_EQ(c.trainer.kind, TrainerKind::TinyClassifier);
    EXPECT_EQ(c.trainer.learning_rate, 0.05);
    EXPECT_EQ(c.credit.kappa, 5u);
    EXPECT_EQ(c.credit.threshold, 60.0);
    EXPECT_EQ(c.synthetic.curve.bad_nodes, std::vector<NodeId>{3});
    ASSERT_EQ(c.faults.tamper.size(), 1u);
    EXPECT_EQ(c.faults.tamper[0].target, TamperTarget::Nonce);
    EXPECT_EQ(c.faults.tamper[0].round, std::optional<Round>{3});
    ASSERT_EQ(c.faults.drop.size(), 1u);
    EXPECT_FALSE(c.faults.drop[0].round.has_value());
}

TEST(Config, UnknownKeysRejected) {
    EXPECT_THROW(parse_config("sed: 1\n"), Error);
    EXPECT_THROW(parse_config("topology:\n  nodes: 3\n"), Error);
    EXPECT_THROW(parse_config("consensus: pow\n"), Error);
    EXPECT_THROW(parse_config("rounds: [1\n"), Error);
}

TEST(Config, InvalidValuesRejected) {
    EXPECT_THROW(parse_config("topology:\n  lt_ids: [25]\n"), Error);
    EXPECT_THROW(parse_config("credit:\n  penalty: 3\n"), Error);
    EXPECT_THROW(parse_config("rounds: -1\n"), Error);
}

TEST(Config, DumpRoundTrips) {
    ExperimentConfig c = parse_config(R"(
seed: 4
payload_override: 1000
topology:
  td_range: [0.1, 0.30000000000000004]
credit:
  kappa: 10
faults:
  tamper:
    - node: 5
      target: params
      bit: 17
)");
    std::string once = dump_config(c);
    ExperimentConfig back = parse_config(once);
    EXPECT_EQ(dump_config(back), once);
    EXPECT_EQ(back.topology.td_hi, 0.30000000000000004);
    EXPECT_EQ(back.faults.tamper[0].bit, std::optional<std::uint64_t>{17});
}

TEST(Config, MissingFileIsIoError) {
    try {
        load_config("/nonexistent/cfg.yaml");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
    }
}

TEST(Config, ShippedConfigsLoad) {
    std::size_t loaded = 0;
    for (const auto& entry : std::filesystem::directory_iterator(FBCHAIN_CONFIG_DIR)) {
        if (entry.path().extension() != ".yaml") continue;
        EXPECT_NO_THROW(load_config(entry.path())) << entry.path();
        ++loaded;
    }
    EXPECT_GE(loaded, 1u);
}

}  // namespace
}  // namespace fbchain
