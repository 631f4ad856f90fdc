#pragma once

#include <chrono>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <set>

#include "spoq/model.hpp"

namespace spoq::storage {

// Message tags for the storage protocols.
inline constexpr std::string_view kWriteTag = "spoq/write";
inline constexpr std::string_view kOwnTag = "spoq/own";

inline constexpr std::size_t kChallengeLen = 16;
using Challenge = ByteArray<kChallengeLen>;

struct AccessPolicy {
    enum class Mode : std::uint8_t { Public = 0, KeyProtected = 1, OwnershipProtected = 2 };

    Mode mode = Mode::Public;
    std::optional<crypto::AccessKey> key; // KeyProtected
    std::optional<LedgerAddress> asset;   // OwnershipProtected

    static AccessPolicy public_read() { return {}; }
    static AccessPolicy key_protected(const crypto::AccessKey& k) {
        return {Mode::KeyProtected, k, std::nullopt};
    }
    static AccessPolicy ownership_protected(const LedgerAddress& asset) {
        return {Mode::OwnershipProtected, std::nullopt, asset};
    }

    bool operator==(const AccessPolicy&) const = default;
};

cbor::Value policy_to_cbor(const AccessPolicy& policy);
AccessPolicy policy_from_cbor(const cbor::Value& v);

// Single-use challenge nonces with a TTL. check_and_consume is atomic: for
// concurrent replays of one nonce at most one caller wins.
class NonceTable {
public:
    using Clock = std::function<std::chrono::steady_clock::time_point()>;

    explicit NonceTable(std::chrono::milliseconds ttl = std::chrono::seconds(60),
                        Clock clock = nullptr, crypto::Rng* rng = nullptr);

    Challenge issue();

    enum class Consume { Ok, Unknown, AlreadyConsumed, Expired };
    Consume check_and_consume(const Challenge& nonce);

private:
    struct Record {
        std::chrono::steady_clock::time_point issued_at;
        bool consumed = false;
    };

    std::chrono::milliseconds ttl_;
    Clock clock_;
    crypto::Rng* rng_;
    std::mutex mutex_;
    std::map<Challenge, Record> records_;
};

// ---------------------------------------------------------------------------
// Local content-addressed backend
// ---------------------------------------------------------------------------
//
// Stores opaque blobs under addresses derived from their bytes, IPFS-style.
// Confidential blobs are encrypted by the client before put(), so the
// address commits to the ciphertext.
class ContentStore {
public:
    ContentStore() = default;
    explicit ContentStore(std::filesystem::path file);

    StorageAddress put(ByteView blob);
    // Raw stored bytes; decrypted when a key is supplied and required.
    Bytes read(const StorageAddress& address,
               const std::optional<crypto::AccessKey>& decryption_key = std::nullopt) const;
    bool contains(const StorageAddress& address) const;
    std::size_t size() const;

private:
    void persist() const;
    void load();

    std::filesystem::path file_;
    mutable std::mutex mutex_;
    std::map<StorageAddress, Bytes> blobs_;
};

// ---------------------------------------------------------------------------
// Access-controlled storage server (protocol core)
// ---------------------------------------------------------------------------

enum class WriteMode {
    // Writers must appear on a fixed allowlist (producer/intermediary hosted).
    Allowlist,
    // Consortium-hosted public action store: anyone may write an action
    // entry for an asset they currently own.
    PublicActionStore,
};

struct ServerConfig {
    WriteMode write_mode = WriteMode::Allowlist;
    std::set<UserAddress> allowlist;
    std::chrono::milliseconds nonce_ttl = std::chrono::seconds(60);
    NonceTable::Clock clock; // injectable for expiry tests
};

// Resolves asset entries for ownership checks; same read-only query surface
// clients use.
using LedgerQuery = std::function<std::optional<AssetEntry>(const LedgerAddress&)>;

class StorageServer {
public:
    StorageServer(ServerConfig config, LedgerQuery ledger);

    Challenge request_nonce();

    StorageAddress put_entry(ByteView entry_bytes, const AccessPolicy& policy,
                             const UserAddress& writer_pub, const crypto::Signature& writer_sig);

    // Key-based protocol: proof is the AEAD ciphertext of a fresh nonce under
    // the entry's access key, with the requested address as associated data.
    Bytes read_key_protected(const StorageAddress& address, ByteView ciphertext);

    // Ownership-based protocol: proof is a signature over a fresh nonce by
    // the current owner of the entry's governing asset.
    Bytes read_ownership_protected(const StorageAddress& address, const Challenge& nonce,
                                   const crypto::Signature& nonce_signature);

    std::size_t entry_count() const;

private:
    struct Stored {
        Bytes bytes;
        AccessPolicy policy;
    };

    const Stored& find_entry(const StorageAddress& address) const;
    void consume_or_fail(const Challenge& nonce);

    ServerConfig config_;
    LedgerQuery ledger_;
    NonceTable nonces_;
    mutable std::mutex mutex_;
    std::map<StorageAddress, Stored> entries_;
};

Bytes write_signing_message(ByteView entry_bytes);
Bytes owner_proof_message(const Challenge& nonce);

// Client-side proof constructors.
Bytes make_key_proof(const Challenge& nonce, const crypto::AccessKey& key,
                     const StorageAddress& address, crypto::Rng& rng);
crypto::Signature make_owner_proof(const Challenge& nonce, const crypto::KeyPair& owner);
crypto::Signature make_write_proof(ByteView entry_bytes, const crypto::KeyPair& writer);

// Uniform read interface the verification pipeline works against.
class EntrySource {
public:
    virtual ~EntrySource() = default;
    // Returns the entry bytes stored at `address`, decrypted if needed.
    // Throws (NotFound, KeyMismatch, ...) when the entry is unreadable with
    // the caller's credentials. Implementations verify that the address
    // recomputes from the fetched bytes.
    virtual Bytes fetch(const StorageAddress& address) = 0;
};

// EntrySource over an in-memory/in-process ContentStore with optional
// decryption keys.
class ContentSource final : public EntrySource {
public:
    ContentSource(const ContentStore& store, std::vector<crypto::AccessKey> decryption_keys = {})
        : store_(store), keys_(std::move(decryption_keys)) {}

    Bytes fetch(const StorageAddress& address) override;

private:
    const ContentStore& store_;
    std::vector<crypto::AccessKey> keys_;
};

} // namespace spoq::storage
