// Serialization, compression, hashing and sealing of local model updates.
//
// Wire pipeline for one update:
//   canonical_serialize -> compress -> AES-256-GCM under a fresh key/nonce
//   -> key wrapped to the recipient's X25519 public key.
// The digest committed on-chain is SHA-256 over the canonical serialization,
// so verification does not depend on the codec or cipher.

#pragma once

#include "fbchain/common.hpp"

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace fbchain {

using LayoutId = std::uint32_t;

struct ModelParams {
    LayoutId layout_id = 0;
    std::vector<double> values;

    friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

// Bitwise equality on the weights (distinguishes -0.0 from 0.0).
bool bitwise_equal(const ModelParams& a, const ModelParams& b);

/// Agreed parameter layouts: layout id -> element count.
class LayoutRegistry {
public:
    void register_layout(LayoutId id, std::size_t length);
    std::optional<std::size_t> length(LayoutId id) const;

    // Accepts any layout id, taking the length from the header. Used by tools
    // that inspect exported data without knowing the experiment's layouts.
    static LayoutRegistry permissive();
    bool is_permissive() const noexcept { return permissive_; }

private:
    std::map<LayoutId, std::size_t> lengths_;
    bool permissive_ = false;
};

struct Digest {
    std::array<std::uint8_t, 32> bytes{};

    static Digest from_bytes(ByteView b);  // MalformedInput unless exactly 32 bytes
    std::string hex() const { return to_hex(bytes); }

    friend auto operator<=>(const Digest&, const Digest&) = default;
};

inline constexpr std::size_t kKeyBytes = 32;
inline constexpr std::size_t kNonceBytes = 12;
inline constexpr std::size_t kTagBytes = 16;

struct SymmetricKey {
    std::array<std::uint8_t, kKeyBytes> bytes{};
    NodeId owner = 0;
    Round round = 0;
};

struct KeyPair {
    Bytes public_key;
    Bytes secret_key;
};

struct SealedUpdate {
    NodeId sender = 0;
    Round round = 0;
    Bytes wrapped_key;
    std::array<std::uint8_t, kNonceBytes> nonce{};
    Bytes ciphertext;
    Digest declared_plain_digest;

    // Bytes on the wire for the delay model.
    std::size_t payload_size() const noexcept {
        return wrapped_key.size() + nonce.size() + ciphertext.size();
    }

    friend bool operator==(const SealedUpdate&, const SealedUpdate&) = default;
};

struct OpenedUpdate {
    ModelParams params;
    Digest recomputed_digest;
};

// "FBC1" | layout_id u32 LE | count u64 LE | count x f64 LE
inline constexpr std::array<std::uint8_t, 4> kSerializationMagic{'F', 'B', 'C', '1'};
inline constexpr std::size_t kSerializationHeaderBytes = 16;

Bytes canonical_serialize(const ModelParams& p);
ModelParams canonical_deserialize(ByteView b, const LayoutRegistry& layouts);

// zlib stream prefixed with the uncompressed length (u64 LE).
Bytes compress(ByteView b);
Bytes decompress(ByteView b);

Digest hash_digest(ByteView b);

// X25519 key pair derived deterministically from the generator.
KeyPair generate_keypair(Rng& rng);

// wrapped = ephemeral_pub(32) | AES-GCM(KEK, key)(32) | tag(16)
// KEK = HKDF-SHA256(X25519(eph, recipient), salt = eph_pub | recipient_pub)
Bytes wrap_key(const SymmetricKey& key, ByteView recipient_public_key, Rng& rng);
std::array<std::uint8_t, kKeyBytes> unwrap_key(ByteView wrapped, const KeyPair& recipient);

SealedUpdate seal_update(const ModelParams& p, NodeId sender, Round round,
                         ByteView recipient_public_key, std::uint64_t rng_seed);

// Throws Error with UnwrapFailed, AuthenticationFailed, DecompressionFailed or
// MalformedInput/UnknownLayout depending on the failing stage.
OpenedUpdate open_update(const SealedUpdate& s, const KeyPair& recipient,
                         const LayoutRegistry& layouts);

// Length-prefixed (u32 LE) fields: sender, round, wrapped_key, nonce,
// ciphertext, digest.
Bytes encode_sealed(const SealedUpdate& s);
SealedUpdate decode_sealed(ByteView b);

}  // namespace fbchain
