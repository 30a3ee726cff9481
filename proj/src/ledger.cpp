#include "fbchain/ledger.hpp"

#include "json.hpp"

#include <algorithm>
#include <set>

namespace fbchain {

namespace {

constexpr std::array<std::uint8_t, 4> kBlockMagic{'F', 'B', 'B', '1'};

}  // namespace

Bytes encode_block_header_and_body(const Block& b) {
    Bytes model = canonical_serialize(b.global_model);
    Bytes out;
    out.reserve(64 + 44 * b.transactions.size() + model.size());
    out.insert(out.end(), kBlockMagic.begin(), kBlockMagic.end());
    put_u64_le(out, b.height);
    put_u64_le(out, b.round);
    out.insert(out.end(), b.prev_hash.bytes.begin(), b.prev_hash.bytes.end());
    put_u32_le(out, b.producer);
    put_u64_le(out, b.transactions.size());
    for (const auto& tx : b.transactions) {
        put_u32_le(out, tx.sender);
        put_u64_le(out, tx.round);
        out.insert(out.end(), tx.model_digest.bytes.begin(), tx.model_digest.bytes.end());
    }
    put_u64_le(out, model.size());
    out.insert(out.end(), model.begin(), model.end());
    return out;
}

Digest compute_block_hash(const Block& b) {
    return hash_digest(encode_block_header_and_body(b));
}

FirstBadHeight verify_chain(std::span<const Block> blocks) {
    std::set<std::pair<Round, NodeId>> seen;
    for (std::size_t i = 0; i < blocks.size(); ++i) {
        const Block& b = blocks[i];
        if (b.height != i) return i;
        Digest expected_prev = i == 0 ? Digest{} : blocks[i - 1].block_hash;
        if (b.prev_hash != expected_prev) return i;
        try {
            if (compute_block_hash(b) != b.block_hash) return i;
        } catch (const Error&) {
            return i;
        }
        for (std::size_t t = 0; t < b.transactions.size(); ++t) {
            const auto& tx = b.transactions[t];
            if (t > 0 && b.transactions[t - 1].sender >= tx.sender) return i;
            if (!seen.emplace(tx.round, tx.sender).second) return i;
        }
    }
    return std::nullopt;
}

Ledger::Ledger(ModelParams genesis_model, NodeId genesis_producer) {
    Block genesis;
    genesis.height = 0;
    genesis.round = 0;
    genesis.producer = genesis_producer;
    genesis.global_model = std::move(genesis_model);
    genesis.block_hash = compute_block_hash(genesis);
    blocks_.push_back(std::move(genesis));
}

SubmitResult Ledger::submit_hash_tx(const HashTransaction& tx) {
    Key key{tx.round, tx.sender};
    if (committed_.contains(key) || mempool_.contains(key)) {
        return {SubmitStatus::Duplicate, "duplicate transaction for sender " + std::to_string(tx.sender) +
                                             " round " + std::to_string(tx.round)};
    }
    mempool_.emplace(key, tx);
    return {};
}

SubmitResult Ledger::submit_hash_tx(NodeId sender, Round round, ByteView digest_bytes) {
    if (digest_bytes.size() != 32) {
        return {SubmitStatus::Malformed,
                "digest must be 32 bytes, got " + std::to_string(digest_bytes.size())};
    }
    return submit_hash_tx(HashTransaction{sender, round, Digest::from_bytes(digest_bytes)});
}

const Block& Ledger::package_block(ModelParams global_model, NodeId producer, Round round,
                                   std::span<const NodeId> authorized_producers) {
    if (std::find(authorized_producers.begin(), authorized_producers.end(), producer) ==
        authorized_producers.end()) {
        throw Error(ErrorCode::UnauthorizedProducer,
                    "node " + std::to_string(producer) + " is not in the package list");
    }
    Block b;
    b.height = blocks_.size();
    b.round = round;
    b.prev_hash = blocks_.back().block_hash;
    b.producer = producer;
    b.global_model = std::move(global_model);

    // The mempool is keyed (round, sender), so this range is already in sender order.
    auto first = mempool_.lower_bound(Key{round, 0});
    auto last = mempool_.lower_bound(Key{round + 1, 0});
    for (auto it = first; it != last; ++it) b.transactions.push_back(it->second);

    b.block_hash = compute_block_hash(b);
    for (const auto& tx : b.transactions) committed_.emplace(Key{tx.round, tx.sender}, tx.model_digest);
    mempool_.erase(first, last);
    blocks_.push_back(std::move(b));
    return blocks_.back();
}

std::optional<Digest> Ledger::lookup_commitment(NodeId sender, Round round) const {
    auto it = committed_.find(Key{round, sender});
    if (it == committed_.end()) return std::nullopt;
    return it->second;
}

std::optional<Digest> Ledger::lookup_pending(NodeId sender, Round round) const {
    auto it = mempool_.find(Key{round, sender});
    if (it == mempool_.end()) return std::nullopt;
    return it->second.model_digest;
}

std::string export_chain_jsonl(std::span<const Block> blocks) {
    std::string out;
    for (const Block& b : blocks) {
        nlohmann::ordered_json j;
        j["height"] = b.height;
        j["round"] = b.round;
        j["producer"] = b.producer;
        j["prev_hash"] = b.prev_hash.hex();
        j["block_hash"] = b.block_hash.hex();
        auto txs = nlohmann::ordered_json::array();
        for (const auto& tx : b.transactions) {
            nlohmann::ordered_json t;
            t["sender"] = tx.sender;
            t["round"] = tx.round;
            t["digest"] = tx.model_digest.hex();
            txs.push_back(std::move(t));
        }
        j["transactions"] = std::move(txs);
        j["global_model"] = to_hex(canonical_serialize(b.global_model));
        out += j.dump();
        out += '\n';
    }
    return out;
}

namespace {

using Json = nlohmann::json;

std::uint64_t require_uint(const Json& j, const char* key) {
    const Json& v = j.at(key);
    if (!v.is_number_unsigned()) throw Error(ErrorCode::MalformedInput, std::string(key) + " is not unsigned");
    return v.get<std::uint64_t>();
}

Digest require_digest(const Json& j, const char* key) {
    const Json& v = j.at(key);
    if (!v.is_string()) throw Error(ErrorCode::MalformedInput, std::string(key) + " is not a string");
    return Digest::from_bytes(from_hex(v.get<std::string>()));
}

void require_keys(const Json& j, std::initializer_list<const char*> keys) {
    if (!j.is_object() || j.size() != keys.size()) {
        throw Error(ErrorCode::MalformedInput, "unexpected field set");
    }
    for (const char* k : keys) {
        if (!j.contains(k)) throw Error(ErrorCode::MalformedInput, std::string("missing field ") + k);
    }
}

Block parse_block_line(std::string_view line) {
    Json j = Json::parse(line);
    require_keys(j, {"height", "round", "producer", "prev_hash", "block_hash", "transactions", "global_model"});
    Block b;
    b.height = require_uint(j, "height");
    b.round = require_uint(j, "round");
    std::uint64_t producer = require_uint(j, "producer");
    if (producer > UINT32_MAX) throw Error(ErrorCode::MalformedInput, "producer out of range");
    b.producer = static_cast<NodeId>(producer);
    b.prev_hash = require_digest(j, "prev_hash");
    b.block_hash = require_digest(j, "block_hash");
    const Json& txs = j.at("transactions");
    if (!txs.is_array()) throw Error(ErrorCode::MalformedInput, "transactions is not an array");
    for (const Json& t : txs) {
        require_keys(t, {"sender", "round", "digest"});
        std::uint64_t sender = require_uint(t, "sender");
        if (sender > UINT32_MAX) throw Error(ErrorCode::MalformedInput, "sender out of range");
        b.transactions.push_back(
            HashTransaction{static_cast<NodeId>(sender), require_uint(t, "round"), require_digest(t, "digest")});
    }
    const Json& model = j.at("global_model");
    if (!model.is_string()) throw Error(ErrorCode::MalformedInput, "global_model is not a string");
    b.global_model = canonical_deserialize(from_hex(model.get<std::string>()), LayoutRegistry::permissive());
    return b;
}

}  // namespace

ChainFileCheck verify_chain_jsonl(std::string_view text) {
    ChainFileCheck result;
    std::vector<Block> blocks;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t eol = text.find('\n', pos);
        std::size_t index = blocks.size();
        if (eol == std::string_view::npos) {
            result.first_bad_height = index;
            result.detail = "line " + std::to_string(index + 1) + " is not newline-terminated";
            result.block_count = index;
            return result;
        }
        try {
            blocks.push_back(parse_block_line(text.substr(pos, eol - pos)));
        } catch (const std::exception& e) {
            result.first_bad_height = index;
            result.detail = "line " + std::to_string(index + 1) + ": " + e.what();
            result.block_count = index;
            return result;
        }
        pos = eol + 1;
    }
    result.block_count = blocks.size();
    if (blocks.empty()) {
        result.first_bad_height = 0;
        result.detail = "chain has no genesis block";
        return result;
    }
    result.first_bad_height = verify_chain(blocks);
    if (result.first_bad_height) {
        result.detail = "block " + std::to_string(*result.first_bad_height) + " fails hash or link check";
    }
    return result;
}

}  // namespace fbchain
