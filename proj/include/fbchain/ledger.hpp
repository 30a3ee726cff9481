// Append-only chain of blocks holding local-model digest commitments and the
// aggregated global model, plus the shared mempool of pending commitments.

#pragma once

#include "fbchain/common.hpp"
#include "fbchain/crypto_pipeline.hpp"

#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace fbchain {

struct HashTransaction {
    NodeId sender = 0;
    Round round = 0;
    Digest model_digest;

    friend bool operator==(const HashTransaction&, const HashTransaction&) = default;
};

struct Block {
    std::uint64_t height = 0;
    Round round = 0;
    Digest prev_hash;
    NodeId producer = 0;
    std::vector<HashTransaction> transactions;
    ModelParams global_model;
    Digest block_hash;
};

// "FBB1" | height u64 | round u64 | prev_hash | producer u32 | tx count u64 |
// (sender u32, round u64, digest)* | model length u64 | canonical model bytes
Bytes encode_block_header_and_body(const Block& b);
Digest compute_block_hash(const Block& b);

enum class SubmitStatus { Accepted, Duplicate, Malformed };

struct SubmitResult {
    SubmitStatus status = SubmitStatus::Accepted;
    std::string reason;

    bool accepted() const noexcept { return status == SubmitStatus::Accepted; }
};

/// Verification outcome: nullopt means the whole chain is valid.
using FirstBadHeight = std::optional<std::uint64_t>;

FirstBadHeight verify_chain(std::span<const Block> blocks);

class Ledger {
public:
    // Block 0 carries the initial global model; its prev_hash is all zeros.
    Ledger(ModelParams genesis_model, NodeId genesis_producer = 0);

    SubmitResult submit_hash_tx(const HashTransaction& tx);
    // Raw form used at the network boundary, where the digest length is not
    // yet known to be valid.
    SubmitResult submit_hash_tx(NodeId sender, Round round, ByteView digest_bytes);

    // Packs every pending transaction of `round` in ascending sender order and
    // appends the block. Throws UnauthorizedProducer if producer is not listed.
    const Block& package_block(ModelParams global_model, NodeId producer, Round round,
                               std::span<const NodeId> authorized_producers);

    std::optional<Digest> lookup_commitment(NodeId sender, Round round) const;
    std::optional<Digest> lookup_pending(NodeId sender, Round round) const;

    const std::vector<Block>& blocks() const noexcept { return blocks_; }
    const Block& tip() const { return blocks_.back(); }
    const ModelParams& latest_global_model() const { return blocks_.back().global_model; }
    std::size_t pending_count() const noexcept { return mempool_.size(); }

private:
    using Key = std::pair<Round, NodeId>;

    std::vector<Block> blocks_;
    std::map<Key, HashTransaction> mempool_;
    std::map<Key, Digest> committed_;
};

// One compact JSON object per line, one line per block.
std::string export_chain_jsonl(std::span<const Block> blocks);

/// Result of checking an exported chain. A line that does not parse is
/// reported as the block at that line's position.
struct ChainFileCheck {
    FirstBadHeight first_bad_height;
    std::size_t block_count = 0;
    std::string detail;

    bool ok() const noexcept { return !first_bad_height.has_value(); }
};

ChainFileCheck verify_chain_jsonl(std::string_view text);

}  // namespace fbchain
