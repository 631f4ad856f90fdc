#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spoq/model.hpp"

namespace spoq::ledger {

// ---------------------------------------------------------------------------
// Function calls (Table-driven contract surface)
// ---------------------------------------------------------------------------

struct CreateAssetArgs {
    AssetKind kind = AssetKind::Product;
    StorageRef storage;
    UserAddress initial_owner;
    // Recorded in the call so replay derives the same address.
    ByteArray<16> salt{};

    bool operator==(const CreateAssetArgs&) const = default;
};

struct PublishComponentArgs {
    LedgerAddress parent;
    AssetKind kind = AssetKind::Product;
    StorageRef storage;
    UserAddress initial_owner;
    ByteArray<16> salt{};

    bool operator==(const PublishComponentArgs&) const = default;
};

struct SubBatch {
    StorageRef storage;
    UserAddress initial_owner;
    ByteArray<16> salt{};

    bool operator==(const SubBatch&) const = default;
};

struct SplitBatchArgs {
    LedgerAddress parent;
    std::vector<SubBatch> sub_batches;

    bool operator==(const SplitBatchArgs&) const = default;
};

struct LogActionArgs {
    LedgerAddress asset;
    StorageRef action;

    bool operator==(const LogActionArgs&) const = default;
};

struct TransferOwnershipArgs {
    LedgerAddress asset;
    UserAddress recipient;

    bool operator==(const TransferOwnershipArgs&) const = default;
};

struct RegisterUserArgs {
    std::string name;
    std::vector<Role> roles;
    UserAddress public_key;

    bool operator==(const RegisterUserArgs&) const = default;
};

struct RevokeUserArgs {
    LedgerAddress user;

    bool operator==(const RevokeUserArgs&) const = default;
};

using FunctionCall =
    std::variant<CreateAssetArgs, PublishComponentArgs, SplitBatchArgs, LogActionArgs,
                 TransferOwnershipArgs, RegisterUserArgs, RevokeUserArgs>;

// ---------------------------------------------------------------------------
// Transactions and blocks
// ---------------------------------------------------------------------------

struct OwnerAuth {
    UserAddress pub;
    crypto::Signature sig;

    bool operator==(const OwnerAuth&) const = default;
};

struct RoleAuth {
    Role role = Role::Producer;
    crypto::RingSignature ring;

    bool operator==(const RoleAuth&) const = default;
};

struct ConsortiumAuth {
    crypto::Signature sig;

    bool operator==(const ConsortiumAuth&) const = default;
};

using Authenticator = std::variant<OwnerAuth, RoleAuth, ConsortiumAuth>;

// Atomic list of function calls. Calls that need several credentials at
// once (publish/split require both a role proof and an ownership proof)
// carry one authenticator per credential; each covers payload_hash.
struct Transaction {
    std::vector<FunctionCall> calls;
    std::vector<Authenticator> auth;
    Hash32 payload_hash{};

    bool operator==(const Transaction&) const = default;
};

struct Block {
    std::uint64_t height = 0;
    Hash32 previous_hash{};
    std::vector<Transaction> transactions;
    // Present on the genesis block only.
    std::optional<UserAddress> consortium;
    Hash32 block_hash{};

    bool operator==(const Block&) const = default;
};

Hash32 payload_hash(const std::vector<FunctionCall>& calls);
Hash32 compute_block_hash(const Block& block);

Bytes encode_transaction(const Transaction& tx);
Transaction decode_transaction(ByteView bytes);
Bytes encode_block(const Block& block);
Block decode_block(ByteView bytes);

// Client-side helpers: message an authenticator signs, and builders.
Bytes tx_auth_message(const Hash32& payload);
OwnerAuth make_owner_auth(const Hash32& payload, const crypto::KeyPair& key);
ConsortiumAuth make_consortium_auth(const Hash32& payload, const crypto::KeyPair& key);
RoleAuth make_role_auth(const Hash32& payload, Role role, const std::vector<UserAddress>& ring,
                        const crypto::KeyPair& key, crypto::Rng& rng);

struct CallResult {
    // Addresses created by the call, if any.
    std::vector<LedgerAddress> created;
};

struct Receipt {
    std::uint64_t block_height = 0;
    std::vector<CallResult> results;
};

struct Metrics {
    std::uint64_t transaction_count = 0;
    // Sum of canonical_serialize lengths over the asset map.
    std::uint64_t asset_bytes = 0;

    bool operator==(const Metrics&) const = default;
};

// ---------------------------------------------------------------------------
// Ledger state machine
// ---------------------------------------------------------------------------
//
// Single-writer: submits apply strictly serially and each successful submit
// appends exactly one block. Queries read the committed state; concurrent
// readers are safe as long as no submit runs at the same time.
class Ledger {
public:
    explicit Ledger(const UserAddress& consortium_key);

    // Applies all calls atomically, or none. Throws with the first failing
    // call's error; the chain and state are untouched on failure.
    Receipt submit(const Transaction& tx);

    const AssetEntry& query_asset(const LedgerAddress& addr) const;
    const UserEntry& query_user(const LedgerAddress& addr) const;
    // Sorted non-revoked keys holding the role: the canonical ring.
    std::vector<UserAddress> role_keys(Role role) const;
    std::vector<std::pair<LedgerAddress, UserEntry>> users_named(const std::string& name) const;

    const std::map<LedgerAddress, AssetEntry>& assets() const { return assets_; }
    const std::map<LedgerAddress, UserEntry>& users() const { return users_; }
    const std::vector<Block>& chain() const { return chain_; }
    const Metrics& metrics() const { return metrics_; }
    const UserAddress& consortium_key() const { return consortium_; }

    // Derived address for a creating call; exposed so clients can reference
    // an address before the transaction commits.
    static LedgerAddress asset_address(const StorageRef& storage, const ByteArray<16>& salt);
    static LedgerAddress user_address(const UserAddress& public_key);

    void save(const std::filesystem::path& path) const;
    static Ledger load(const std::filesystem::path& path);
    static Ledger replay(const std::vector<Block>& blocks);

private:
    Receipt apply_transaction(const Transaction& tx, bool append_block);

    UserAddress consortium_;
    std::map<LedgerAddress, AssetEntry> assets_;
    std::map<LedgerAddress, UserEntry> users_;
    std::vector<Block> chain_;
    Metrics metrics_;
};

// True iff every block hash recomputes, the previous-hash links hold, and
// replaying the chain reproduces `ledger`'s state byte for byte. On failure
// `diagnostic` (when given) names the first violation.
bool validate_chain(const Ledger& ledger, std::string* diagnostic = nullptr);

} // namespace spoq::ledger
