// Shared vocabulary types, the error type, hex helpers and the seeded RNG.

#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace fbchain {

using NodeId = std::uint32_t;
using Round = std::uint64_t;
using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class ErrorCode {
    SerializationRejected,
    MalformedInput,
    UnknownLayout,
    DecompressionFailed,
    UnwrapFailed,
    AuthenticationFailed,
    CryptoBackend,
    InvalidProfile,
    EmptyCandidates,
    EmptyPackageList,
    UnauthorizedProducer,
    LayoutMismatch,
    NoUpdates,
    EmptyEvalSet,
    OverlappingSets,
    UnknownNode,
    InvalidArgument,
    Config,
    Io,
};

const char* error_code_name(ErrorCode code) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(error_code_name(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

std::string to_hex(ByteView bytes);
// Strict lowercase hex; anything else is MalformedInput.
Bytes from_hex(std::string_view hex);

void put_u32_le(Bytes& out, std::uint32_t v);
void put_u64_le(Bytes& out, std::uint64_t v);
std::uint32_t get_u32_le(ByteView in, std::size_t offset);
std::uint64_t get_u64_le(ByteView in, std::size_t offset);

// Compile-time label hash for naming RNG sub-streams.
constexpr std::uint64_t stream_tag(std::string_view label) {
    std::uint64_t h = 1469598103934665603ULL;
    for (char c : label) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ULL;
    }
    return h;
}

/// Seeded generator with platform-stable derived draws.
///
/// The engine is mt19937_64, whose output sequence is fixed by the standard.
/// Distributions are implemented here instead of using <random>'s, whose
/// algorithms are implementation-defined.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Independent stream keyed by (seed, tags...).
    static Rng derive(std::uint64_t seed, std::initializer_list<std::uint64_t> tags);

    std::uint64_t next_u64() { return engine_(); }
    double uniform01();
    double uniform(double lo, double hi);
    double normal();
    std::uint64_t below(std::uint64_t bound);
    void fill(std::span<std::uint8_t> out);

    template <typename T>
    void shuffle(std::vector<T>& items) {
        for (std::size_t i = items.size(); i > 1; --i) {
            std::size_t j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace fbchain
