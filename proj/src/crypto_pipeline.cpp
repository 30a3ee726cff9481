#include "fbchain/crypto_pipeline.hpp"

#include <openssl/evp.h>
#include <openssl/kdf.h>
#include <openssl/sha.h>
#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <memory>

namespace fbchain {

bool bitwise_equal(const ModelParams& a, const ModelParams& b) {
    if (a.layout_id != b.layout_id || a.values.size() != b.values.size()) return false;
    for (std::size_t i = 0; i < a.values.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(a.values[i]) != std::bit_cast<std::uint64_t>(b.values[i])) {
            return false;
        }
    }
    return true;
}

void LayoutRegistry::register_layout(LayoutId id, std::size_t length) {
    auto [it, inserted] = lengths_.emplace(id, length);
    if (!inserted && it->second != length) {
        throw Error(ErrorCode::InvalidArgument,
                    "layout " + std::to_string(id) + " already registered with a different length");
    }
}

std::optional<std::size_t> LayoutRegistry::length(LayoutId id) const {
    auto it = lengths_.find(id);
    if (it == lengths_.end()) return std::nullopt;
    return it->second;
}

LayoutRegistry LayoutRegistry::permissive() {
    LayoutRegistry r;
    r.permissive_ = true;
    return r;
}

Digest Digest::from_bytes(ByteView b) {
    if (b.size() != 32) {
        throw Error(ErrorCode::MalformedInput, "digest must be 32 bytes, got " + std::to_string(b.size()));
    }
    Digest d;
    std::copy(b.begin(), b.end(), d.bytes.begin());
    return d;
}

Bytes canonical_serialize(const ModelParams& p) {
    Bytes out(kSerializationMagic.begin(), kSerializationMagic.end());
    out.reserve(kSerializationHeaderBytes + 8 * p.values.size());
    put_u32_le(out, p.layout_id);
    put_u64_le(out, p.values.size());
    for (std::size_t i = 0; i < p.values.size(); ++i) {
        double v = p.values[i];
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::SerializationRejected,
                        "non-finite weight at index " + std::to_string(i));
        }
        put_u64_le(out, std::bit_cast<std::uint64_t>(v));
    }
    return out;
}

ModelParams canonical_deserialize(ByteView b, const LayoutRegistry& layouts) {
    if (b.size() < kSerializationHeaderBytes) {
        throw Error(ErrorCode::MalformedInput, "truncated header");
    }
    if (!std::equal(kSerializationMagic.begin(), kSerializationMagic.end(), b.begin())) {
        throw Error(ErrorCode::MalformedInput, "bad magic");
    }
    ModelParams p;
    p.layout_id = get_u32_le(b, 4);
    std::uint64_t count = get_u64_le(b, 8);

    std::optional<std::size_t> expected = layouts.length(p.layout_id);
    if (!expected && !layouts.is_permissive()) {
        throw Error(ErrorCode::UnknownLayout, "layout " + std::to_string(p.layout_id));
    }
    if (expected && count != *expected) {
        throw Error(ErrorCode::MalformedInput, "count does not match layout length");
    }
    std::size_t payload = b.size() - kSerializationHeaderBytes;
    if (count > payload / 8 || payload != count * 8) {
        throw Error(ErrorCode::MalformedInput,
                    payload < count * 8 ? "truncated payload" : "trailing bytes");
    }
    p.values.resize(count);
    for (std::size_t i = 0; i < count; ++i) {
        double v = std::bit_cast<double>(get_u64_le(b, kSerializationHeaderBytes + 8 * i));
        if (!std::isfinite(v)) {
            throw Error(ErrorCode::MalformedInput, "non-finite weight at index " + std::to_string(i));
        }
        p.values[i] = v;
    }
    return p;
}

Bytes compress(ByteView b) {
    uLongf bound = compressBound(static_cast<uLong>(b.size()));
    Bytes out(8 + bound);
    for (int i = 0; i < 8; ++i) out[i] = static_cast<std::uint8_t>(std::uint64_t{b.size()} >> (8 * i));
    int rc = compress2(out.data() + 8, &bound, b.data(), static_cast<uLong>(b.size()), Z_BEST_COMPRESSION);
    if (rc != Z_OK) {
        throw Error(ErrorCode::InvalidArgument, "zlib compress failed");
    }
    out.resize(8 + bound);
    return out;
}

Bytes decompress(ByteView b) {
    if (b.size() < 8) {
        throw Error(ErrorCode::DecompressionFailed, "missing length prefix");
    }
    std::uint64_t n = get_u64_le(b, 0);
    // deflate cannot expand beyond ~1032:1
    if (n > (b.size() - 8) * 1100 + 64) {
        throw Error(ErrorCode::DecompressionFailed, "implausible length prefix");
    }
    Bytes out(n);
    uLongf dest_len = static_cast<uLongf>(n);
    uLong src_len = static_cast<uLong>(b.size() - 8);
    int rc = uncompress2(out.data(), &dest_len, b.data() + 8, &src_len);
    if (rc != Z_OK || dest_len != n || src_len != b.size() - 8) {
        throw Error(ErrorCode::DecompressionFailed, "corrupt zlib stream");
    }
    return out;
}

Digest hash_digest(ByteView b) {
    Digest d;
    SHA256(b.data(), b.size(), d.bytes.data());
    return d;
}

namespace {

struct PkeyDeleter {
    void operator()(EVP_PKEY* p) const { EVP_PKEY_free(p); }
};
struct PkeyCtxDeleter {
    void operator()(EVP_PKEY_CTX* p) const { EVP_PKEY_CTX_free(p); }
};
struct CipherCtxDeleter {
    void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); }
};
using PkeyPtr = std::unique_ptr<EVP_PKEY, PkeyDeleter>;
using PkeyCtxPtr = std::unique_ptr<EVP_PKEY_CTX, PkeyCtxDeleter>;
using CipherCtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CipherCtxDeleter>;

constexpr std::size_t kX25519Bytes = 32;
constexpr std::string_view kWrapInfo = "fbchain key wrap v1";

PkeyPtr x25519_private(ByteView secret) {
    PkeyPtr key(EVP_PKEY_new_raw_private_key(EVP_PKEY_X25519, nullptr, secret.data(), secret.size()));
    if (!key) throw Error(ErrorCode::CryptoBackend, "invalid X25519 secret key");
    return key;
}

Bytes x25519_public_of(EVP_PKEY* key) {
    Bytes pub(kX25519Bytes);
    std::size_t len = pub.size();
    if (EVP_PKEY_get_raw_public_key(key, pub.data(), &len) != 1 || len != kX25519Bytes) {
        throw Error(ErrorCode::CryptoBackend, "cannot export X25519 public key");
    }
    return pub;
}

// Returns nullopt when the peer key is rejected (e.g. a low-order point).
std::optional<Bytes> x25519_shared(EVP_PKEY* own, ByteView peer_public) {
    PkeyPtr peer(EVP_PKEY_new_raw_public_key(EVP_PKEY_X25519, nullptr, peer_public.data(),
                                             peer_public.size()));
    if (!peer) return std::nullopt;
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new(own, nullptr));
    if (!ctx || EVP_PKEY_derive_init(ctx.get()) != 1 ||
        EVP_PKEY_derive_set_peer(ctx.get(), peer.get()) != 1) {
        return std::nullopt;
    }
    Bytes shared(kX25519Bytes);
    std::size_t len = shared.size();
    if (EVP_PKEY_derive(ctx.get(), shared.data(), &len) != 1 || len != kX25519Bytes) {
        return std::nullopt;
    }
    return shared;
}

std::array<std::uint8_t, kKeyBytes> hkdf_sha256(ByteView ikm, ByteView salt, std::string_view info) {
    std::array<std::uint8_t, kKeyBytes> out{};
    PkeyCtxPtr ctx(EVP_PKEY_CTX_new_id(EVP_PKEY_HKDF, nullptr));
    std::size_t len = out.size();
    if (!ctx || EVP_PKEY_derive_init(ctx.get()) != 1 ||
        EVP_PKEY_CTX_set_hkdf_md(ctx.get(), EVP_sha256()) != 1 ||
        EVP_PKEY_CTX_set1_hkdf_salt(ctx.get(), salt.data(), static_cast<int>(salt.size())) != 1 ||
        EVP_PKEY_CTX_set1_hkdf_key(ctx.get(), ikm.data(), static_cast<int>(ikm.size())) != 1 ||
        EVP_PKEY_CTX_add1_hkdf_info(ctx.get(), reinterpret_cast<const unsigned char*>(info.data()),
                                    static_cast<int>(info.size())) != 1 ||
        EVP_PKEY_derive(ctx.get(), out.data(), &len) != 1) {
        throw Error(ErrorCode::CryptoBackend, "HKDF failed");
    }
    return out;
}

// ciphertext | tag
Bytes gcm_encrypt(ByteView key, ByteView nonce, ByteView aad, ByteView plain) {
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    Bytes out(plain.size() + kTagBytes);
    int len = 0;
    int total = 0;
    bool ok = ctx && EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
              EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()),
                                  nullptr) == 1 &&
              EVP_EncryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) == 1 &&
              EVP_EncryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) == 1;
    if (ok && !plain.empty()) {
        ok = EVP_EncryptUpdate(ctx.get(), out.data(), &len, plain.data(), static_cast<int>(plain.size())) == 1;
        total = len;
    }
    ok = ok && EVP_EncryptFinal_ex(ctx.get(), out.data() + total, &len) == 1 &&
         EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, static_cast<int>(kTagBytes),
                             out.data() + plain.size()) == 1;
    if (!ok) throw Error(ErrorCode::CryptoBackend, "AES-GCM encryption failed");
    return out;
}

std::optional<Bytes> gcm_decrypt(ByteView key, ByteView nonce, ByteView aad, ByteView sealed) {
    if (sealed.size() < kTagBytes) return std::nullopt;
    std::size_t n = sealed.size() - kTagBytes;
    CipherCtxPtr ctx(EVP_CIPHER_CTX_new());
    Bytes out(n);
    Bytes tag(sealed.begin() + static_cast<std::ptrdiff_t>(n), sealed.end());
    int len = 0;
    int total = 0;
    bool ok = ctx && EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, nullptr, nullptr) == 1 &&
              EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_IVLEN, static_cast<int>(nonce.size()),
                                  nullptr) == 1 &&
              EVP_DecryptInit_ex(ctx.get(), nullptr, nullptr, key.data(), nonce.data()) == 1 &&
              EVP_DecryptUpdate(ctx.get(), nullptr, &len, aad.data(), static_cast<int>(aad.size())) == 1;
    if (ok && n > 0) {
        ok = EVP_DecryptUpdate(ctx.get(), out.data(), &len, sealed.data(), static_cast<int>(n)) == 1;
        total = len;
    }
    ok = ok && EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, static_cast<int>(kTagBytes),
                                   tag.data()) == 1 &&
         EVP_DecryptFinal_ex(ctx.get(), out.data() + total, &len) == 1;
    if (!ok) return std::nullopt;
    return out;
}

Bytes update_aad(NodeId sender, Round round) {
    Bytes aad;
    put_u32_le(aad, sender);
    put_u64_le(aad, round);
    return aad;
}

Bytes wrap_salt(ByteView ephemeral_public, ByteView recipient_public) {
    Bytes salt(ephemeral_public.begin(), ephemeral_public.end());
    salt.insert(salt.end(), recipient_public.begin(), recipient_public.end());
    return salt;
}

constexpr std::array<std::uint8_t, kNonceBytes> kWrapNonce{};

}  // namespace

KeyPair generate_keypair(Rng& rng) {
    Bytes secret(kX25519Bytes);
    rng.fill(secret);
    PkeyPtr key = x25519_private(secret);
    return KeyPair{x25519_public_of(key.get()), std::move(secret)};
}

Bytes wrap_key(const SymmetricKey& key, ByteView recipient_public_key, Rng& rng) {
    if (recipient_public_key.size() != kX25519Bytes) {
        throw Error(ErrorCode::InvalidArgument, "recipient public key must be 32 bytes");
    }
    KeyPair ephemeral = generate_keypair(rng);
    PkeyPtr eph = x25519_private(ephemeral.secret_key);
    std::optional<Bytes> shared = x25519_shared(eph.get(), recipient_public_key);
    if (!shared) throw Error(ErrorCode::InvalidArgument, "recipient public key rejected");
    auto kek = hkdf_sha256(*shared, wrap_salt(ephemeral.public_key, recipient_public_key), kWrapInfo);
    // The KEK is unique per ephemeral key, so a fixed nonce is safe here.
    Bytes sealed = gcm_encrypt(kek, kWrapNonce, {}, key.bytes);
    Bytes out = std::move(ephemeral.public_key);
    out.insert(out.end(), sealed.begin(), sealed.end());
    return out;
}

std::array<std::uint8_t, kKeyBytes> unwrap_key(ByteView wrapped, const KeyPair& recipient) {
    if (wrapped.size() != kX25519Bytes + kKeyBytes + kTagBytes) {
        throw Error(ErrorCode::UnwrapFailed, "wrapped key has wrong length");
    }
    ByteView eph_pub = wrapped.first(kX25519Bytes);
    PkeyPtr own = x25519_private(recipient.secret_key);
    std::optional<Bytes> shared = x25519_shared(own.get(), eph_pub);
    if (!shared) throw Error(ErrorCode::UnwrapFailed, "ephemeral key rejected");
    auto kek = hkdf_sha256(*shared, wrap_salt(eph_pub, recipient.public_key), kWrapInfo);
    std::optional<Bytes> key = gcm_decrypt(kek, kWrapNonce, {}, wrapped.subspan(kX25519Bytes));
    if (!key) throw Error(ErrorCode::UnwrapFailed, "key unwrap authentication failed");
    std::array<std::uint8_t, kKeyBytes> out{};
    std::copy(key->begin(), key->end(), out.begin());
    return out;
}

SealedUpdate seal_update(const ModelParams& p, NodeId sender, Round round,
                         ByteView recipient_public_key, std::uint64_t rng_seed) {
    Bytes plain = canonical_serialize(p);
    Rng rng = Rng::derive(rng_seed, {stream_tag("seal"), sender, round});

    SealedUpdate s;
    s.sender = sender;
    s.round = round;
    s.declared_plain_digest = hash_digest(plain);

    SymmetricKey key;
    key.owner = sender;
    key.round = round;
    rng.fill(key.bytes);
    rng.fill(s.nonce);

    s.ciphertext = gcm_encrypt(key.bytes, s.nonce, update_aad(sender, round), compress(plain));
    s.wrapped_key = wrap_key(key, recipient_public_key, rng);
    return s;
}

OpenedUpdate open_update(const SealedUpdate& s, const KeyPair& recipient,
                         const LayoutRegistry& layouts) {
    auto key = unwrap_key(s.wrapped_key, recipient);
    std::optional<Bytes> compressed = gcm_decrypt(key, s.nonce, update_aad(s.sender, s.round), s.ciphertext);
    if (!compressed) {
        throw Error(ErrorCode::AuthenticationFailed, "ciphertext failed authentication");
    }
    Bytes plain = decompress(*compressed);
    OpenedUpdate out;
    out.recomputed_digest = hash_digest(plain);
    out.params = canonical_deserialize(plain, layouts);
    return out;
}

namespace {

void put_field(Bytes& out, ByteView field) {
    put_u32_le(out, static_cast<std::uint32_t>(field.size()));
    out.insert(out.end(), field.begin(), field.end());
}

ByteView take_field(ByteView in, std::size_t& offset) {
    if (in.size() - offset < 4) throw Error(ErrorCode::MalformedInput, "truncated field length");
    std::uint32_t n = get_u32_le(in, offset);
    offset += 4;
    if (in.size() - offset < n) throw Error(ErrorCode::MalformedInput, "truncated field");
    ByteView field = in.subspan(offset, n);
    offset += n;
    return field;
}

}  // namespace

Bytes encode_sealed(const SealedUpdate& s) {
    Bytes sender;
    put_u32_le(sender, s.sender);
    Bytes round;
    put_u64_le(round, s.round);

    Bytes out;
    put_field(out, sender);
    put_field(out, round);
    put_field(out, s.wrapped_key);
    put_field(out, s.nonce);
    put_field(out, s.ciphertext);
    put_field(out, s.declared_plain_digest.bytes);
    return out;
}

SealedUpdate decode_sealed(ByteView b) {
    std::size_t offset = 0;
    SealedUpdate s;
    ByteView sender = take_field(b, offset);
    ByteView round = take_field(b, offset);
    ByteView wrapped = take_field(b, offset);
    ByteView nonce = take_field(b, offset);
    ByteView ciphertext = take_field(b, offset);
    ByteView digest = take_field(b, offset);
    if (offset != b.size()) throw Error(ErrorCode::MalformedInput, "trailing bytes");
    if (sender.size() != 4 || round.size() != 8 || nonce.size() != kNonceBytes) {
        throw Error(ErrorCode::MalformedInput, "bad fixed-width field");
    }
    s.sender = get_u32_le(sender, 0);
    s.round = get_u64_le(round, 0);
    s.wrapped_key.assign(wrapped.begin(), wrapped.end());
    std::copy(nonce.begin(), nonce.end(), s.nonce.begin());
    s.ciphertext.assign(ciphertext.begin(), ciphertext.end());
    s.declared_plain_digest = Digest::from_bytes(digest);
    return s;
}

}  // namespace fbchain
