#pragma once

#include <cstdint>
#include <memory>
#include <vector>

#include "spoq/bytes.hpp"
#include "spoq/errors.hpp"
#include "spoq/ids.hpp"

namespace spoq::crypto {

// Hash-to-challenge domain separation tags.
inline constexpr std::string_view kSigTag = "spoq/sig";
inline constexpr std::string_view kRingTag = "spoq/ring";
inline constexpr std::string_view kRingSetTag = "spoq/ringset";
inline constexpr std::string_view kAddrTag = "spoq/addr";
inline constexpr std::string_view kNonceTag = "spoq/nonce";
inline constexpr std::string_view kPufTag = "spoq/puf";

Hash32 sha256(ByteView data);

class Rng {
public:
    virtual ~Rng() = default;
    virtual void fill(std::uint8_t* out, std::size_t n) = 0;

    template <std::size_t N>
    ByteArray<N> array() {
        ByteArray<N> out;
        fill(out.data(), out.size());
        return out;
    }
};

// OS-backed CSPRNG. Stateless; safe to share.
class SystemRng final : public Rng {
public:
    void fill(std::uint8_t* out, std::size_t n) override;
};

SystemRng& system_rng();

// Group scalar reduced modulo the curve order, big-endian fixed width.
struct Scalar {
    ByteArray<32> bytes{};
    auto operator<=>(const Scalar&) const = default;
};

struct KeyPair {
    Scalar secret;
    UserAddress pub;
};

KeyPair keygen(Rng& rng);
KeyPair keypair_from_secret(const Scalar& secret);
bool valid_user_address(const UserAddress& addr);

// Schnorr signature: 33-byte commitment point followed by a 32-byte
// response scalar. Nonces are derived deterministically from the secret
// and the message, so signing needs no RNG.
struct Signature {
    ByteArray<33> commitment{};
    ByteArray<32> response{};

    auto operator<=>(const Signature&) const = default;
    ByteArray<65> serialize() const;
    static Signature parse(ByteView bytes);
};

Signature sign(ByteView message, const Scalar& secret);
bool verify(const Signature& sig, ByteView message, const UserAddress& pub);

// AOS-style ring signature: a Fiat-Shamir challenge cycle over the ring.
// ring_commitment pins the exact (sorted, deduplicated) member set, so a
// verifier can reject signatures over stale rings.
struct RingSignature {
    Hash32 ring_commitment{};
    ByteArray<32> challenge_seed{};
    std::vector<ByteArray<32>> responses;

    bool operator==(const RingSignature&) const = default;
};

// Sorts and deduplicates the ring; the canonical form used for signing,
// verification, and the commitment hash.
std::vector<UserAddress> canonical_ring(std::vector<UserAddress> ring);
Hash32 ring_commitment(const std::vector<UserAddress>& ring);

RingSignature ring_sign(ByteView message, const std::vector<UserAddress>& ring,
                        const Scalar& secret, std::size_t signer_index, Rng& rng);
bool ring_verify(const RingSignature& sig, ByteView message,
                 const std::vector<UserAddress>& ring);

// Schnorr identification: proof of knowledge of the scalar behind a
// published commitment, bound to a verifier-chosen 32-byte challenge. The
// scalar itself never leaves the prover.
Bytes id_prove(const Scalar& secret, const ByteArray<32>& challenge);
bool id_verify(const UserAddress& commitment, const ByteArray<32>& challenge, ByteView proof);

// 32-byte secret granting read access to a storage entry.
struct AccessKey {
    ByteArray<32> bytes{};
    auto operator<=>(const AccessKey&) const = default;
};

inline constexpr std::size_t kAeadNonceLen = 12;

// AES-256-GCM with the random nonce prepended to the ciphertext.
Bytes aead_encrypt(ByteView plaintext, const AccessKey& key, ByteView associated_data,
                   Rng& rng);
// Deterministic core used by aead_encrypt and by fixed-nonce tests.
Bytes aead_seal(ByteView plaintext, const AccessKey& key, ByteView associated_data,
                ByteView nonce);
// Throws AuthFailed on any authentication failure; never returns partial
// plaintext.
Bytes aead_decrypt(ByteView ciphertext, const AccessKey& key, ByteView associated_data);

} // namespace spoq::crypto
