#include "fbchain/ledger.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <bit>
#include <vector>

namespace fbchain {
namespace {

const std::vector<NodeId> kPackageList{16, 14, 12};

Digest digest_of(std::uint8_t fill) {
    Digest d;
    d.bytes.fill(fill);
    return d;
}

ModelParams model_of(double v) { return {1, {v, -v, 0.5}}; }

Ledger build_chain(std::size_t blocks_after_genesis) {
    Ledger l(model_of(0.0));
    for (Round r = 1; r <= blocks_after_genesis; ++r) {
        for (NodeId s : {1u, 3u, 5u}) l.submit_hash_tx({s, r, digest_of(static_cast<std::uint8_t>(r * 10 + s))});
        l.package_block(model_of(static_cast<double>(r)), kPackageList[r % 3], r, kPackageList);
    }
    return l;
}

TEST(Submit, DuplicateRejected) {
    Ledger l(model_of(0.0));
    EXPECT_TRUE(l.submit_hash_tx({3, 2, digest_of(1)}).accepted());
    SubmitResult again = l.submit_hash_tx({3, 2, digest_of(2)});
    EXPECT_EQ(again.status, SubmitStatus::Duplicate);
    EXPECT_EQ(l.pending_count(), 1u);
}

TEST(Submit, DuplicateOfCommittedRejected) {
    Ledger l(model_of(0.0));
    l.submit_hash_tx({3, 2, digest_of(1)});
    l.package_block(model_of(1.0), 16, 2, kPackageList);
    EXPECT_EQ(l.submit_hash_tx({3, 2, digest_of(1)}).status, SubmitStatus::Duplicate);
}

TEST(Submit, ShortDigestMalformed) {
    Ledger l(model_of(0.0));
    Bytes d(31, 0xaa);
    EXPECT_EQ(l.submit_hash_tx(3, 2, d).status, SubmitStatus::Malformed);
    EXPECT_EQ(l.pending_count(), 0u);
    Bytes ok(32, 0xaa);
    EXPECT_TRUE(l.submit_hash_tx(3, 2, ok).accepted());
}

TEST(Package, EmptyMempool) {
    Ledger l(model_of(0.0));
    const Block& b = l.package_block(model_of(2.0), 14, 1, kPackageList);
    EXPECT_TRUE(b.transactions.empty());
    EXPECT_EQ(b.global_model, model_of(2.0));
    EXPECT_EQ(b.height, 1u);
    EXPECT_EQ(b.prev_hash, l.blocks()[0].block_hash);
}

TEST(Package, TransactionsInSenderOrder) {
    Ledger l(model_of(0.0));
    for (NodeId s : {5u, 2u, 9u}) l.submit_hash_tx({s, 1, digest_of(static_cast<std::uint8_t>(s))});
    const Block& b = l.package_block(model_of(1.0), 16, 1, kPackageList);
    std::vector<NodeId> senders;
    for (const auto& tx : b.transactions) senders.push_back(tx.sender);
    EXPECT_EQ(senders, (std::vector<NodeId>{2, 5, 9}));
    EXPECT_EQ(l.pending_count(), 0u);
}

TEST(Package, OnlyPacksItsRound) {
    Ledger l(model_of(0.0));
    l.submit_hash_tx({1, 1, digest_of(1)});
    l.submit_hash_tx({1, 2, digest_of(2)});
    const Block& b = l.package_block(model_of(1.0), 16, 1, kPackageList);
    EXPECT_EQ(b.transactions.size(), 1u);
    EXPECT_EQ(l.pending_count(), 1u);
}

TEST(Package, UnauthorizedProducer) {
    Ledger l(model_of(0.0));
    try {
        l.package_block(model_of(1.0), 2, 1, kPackageList);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnauthorizedProducer);
    }
    EXPECT_EQ(l.blocks().size(), 1u);
}

TEST(Genesis, ZeroPrevHash) {
    Ledger l(model_of(0.0));
    EXPECT_EQ(l.tip().height, 0u);
    EXPECT_EQ(l.tip().prev_hash, Digest{});
    EXPECT_EQ(l.latest_global_model(), model_of(0.0));
}

TEST(VerifyChain, FreshChainOk) {
    Ledger l = build_chain(10);
    EXPECT_EQ(l.blocks().size(), 11u);
    EXPECT_FALSE(verify_chain(l.blocks()).has_value());
}

TEST(VerifyChain, FlippedModelBitInBlockFour) {
    Ledger l = build_chain(10);
    std::vector<Block> blocks = l.blocks();
    auto bits = std::bit_cast<std::uint64_t>(blocks[4].global_model.values[0]) ^ 1ull;
    blocks[4].global_model.values[0] = std::bit_cast<double>(bits);
    EXPECT_EQ(verify_chain(blocks), FirstBadHeight{4});
}

TEST(VerifyChain, ReorderedTransactions) {
    Ledger l = build_chain(10);
    std::vector<Block> blocks = l.blocks();
    std::swap(blocks[6].transactions[0], blocks[6].transactions[2]);
    EXPECT_EQ(verify_chain(blocks), FirstBadHeight{6});
}

TEST(VerifyChain, ReportsEarliestOfSeveralFaults) {
    Ledger l = build_chain(10);
    std::vector<Block> blocks = l.blocks();
    blocks[8].producer = 1;
    blocks[3].round = 99;
    EXPECT_EQ(verify_chain(blocks), FirstBadHeight{3});
}

TEST(VerifyChain, RehashedBlockBreaksNextLink) {
    Ledger l = build_chain(5);
    std::vector<Block> blocks = l.blocks();
    blocks[2].producer = 1;
    blocks[2].block_hash = compute_block_hash(blocks[2]);
    EXPECT_EQ(verify_chain(blocks), FirstBadHeight{3});
}

TEST(Lookup, CommittedVersusPending) {
    Ledger l(model_of(0.0));
    l.submit_hash_tx({1, 3, digest_of(7)});
    EXPECT_FALSE(l.lookup_commitment(1, 3).has_value());
    EXPECT_EQ(l.lookup_pending(1, 3), digest_of(7));
    l.package_block(model_of(1.0), 16, 3, kPackageList);
    EXPECT_EQ(l.lookup_commitment(1, 3), digest_of(7));
    EXPECT_FALSE(l.lookup_pending(1, 3).has_value());
    EXPECT_FALSE(l.lookup_commitment(2, 3).has_value());
}

TEST(Jsonl, CleanExportVerifies) {
    Ledger l = build_chain(10);
    std::string text = export_chain_jsonl(l.blocks());
    EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 11);
    ChainFileCheck c = verify_chain_jsonl(text);
    EXPECT_TRUE(c.ok()) << c.detail;
    EXPECT_EQ(c.block_count, 11u);
}

TEST(Jsonl, EveryRandomByteMutationNamesItsLine) {
    Ledger l = build_chain(10);
    const std::string text = export_chain_jsonl(l.blocks());
    std::vector<std::size_t> line_of(text.size());
    std::size_t line = 0;
    for (std::size_t i = 0; i < text.size(); ++i) {
        line_of[i] = line;
        if (text[i] == '\n') ++line;
    }
    Rng rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        std::string m = text;
        std::size_t pos = rng.below(m.size());
        char replacement;
        do {
            replacement = static_cast<char>(rng.below(256));
        } while (replacement == m[pos]);
        m[pos] = replacement;
        ChainFileCheck c = verify_chain_jsonl(m);
        ASSERT_EQ(c.first_bad_height, FirstBadHeight{line_of[pos]})
            << "pos " << pos << " byte " << static_cast<int>(static_cast<unsigned char>(replacement));
    }
}

TEST(Jsonl, EmptyTextIsBadAtZero) {
    EXPECT_EQ(verify_chain_jsonl("").first_bad_height, FirstBadHeight{0});
}

}  // namespace
}  // namespace fbchain
