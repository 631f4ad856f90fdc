#pragma once

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "spoq/bytes.hpp"
#include "spoq/cbor.hpp"
#include "spoq/crypto.hpp"
#include "spoq/errors.hpp"
#include "spoq/ids.hpp"

namespace spoq {

// 3-byte platform namespace: the leading bytes of SHA-256("spoqchain").
const ByteArray<3>& ledger_namespace();

enum class AddressKind : std::uint8_t { Asset = 0, User = 1 };

LedgerAddress derive_ledger_address(AddressKind kind, ByteView seed);

// Registered storage backend descriptors.
namespace backend {
inline constexpr ByteArray<2> kHttpServer = {0x68, 0x73}; // "hs"
inline constexpr ByteArray<2> kContentStore = {0x63, 0x73}; // "cs"
bool is_registered(const ByteArray<2>& code);
} // namespace backend

StorageAddress derive_storage_address(const ByteArray<2>& system, ByteView entry_bytes);

Hash32 entry_hash(ByteView entry_bytes);

// ---------------------------------------------------------------------------
// Domain entries
// ---------------------------------------------------------------------------

enum class AssetKind : std::uint8_t { Product = 0, Batch = 1 };
enum class Role : std::uint8_t { Producer = 0, Intermediary = 1 };

struct AssetEntry {
    AssetKind kind = AssetKind::Product;
    StorageRef storage;
    // First owner is the creator-designated initial owner; last is current.
    std::vector<UserAddress> owners;
    std::vector<StorageRef> actions;
    std::optional<LedgerAddress> parent;

    bool operator==(const AssetEntry&) const = default;
    const UserAddress& current_owner() const { return owners.back(); }
};

struct UserEntry {
    std::string name;
    std::vector<Role> roles; // sorted, unique
    UserAddress public_key;
    bool revoked = false;

    bool operator==(const UserEntry&) const = default;
    bool has_role(Role r) const;
};

// 4-byte verification-type code plus method-specific payload.
struct Fingerprint {
    ByteArray<4> header{};
    Bytes payload;

    bool operator==(const Fingerprint&) const = default;
};

namespace fingerprint {
inline constexpr ByteArray<4> kZkPuf = {'Z', 'K', 'P', '1'};
inline constexpr ByteArray<4> kBarcode = {'B', 'A', 'R', '1'};
bool is_registered(const ByteArray<4>& header);
} // namespace fingerprint

struct ProductBody {
    Fingerprint fingerprint;
    std::vector<LedgerAddress> components; // on-ledger component links, may be empty

    bool operator==(const ProductBody&) const = default;
};

struct BatchBody {
    std::vector<StorageRef> components; // non-empty

    bool operator==(const BatchBody&) const = default;
};

struct ActionBody {
    LedgerAddress asset;

    bool operator==(const ActionBody&) const = default;
};

// Off-chain payload of a product, batch, or action. The random nonce blinds
// the published hash against content guessing.
struct StorageEntry {
    std::string name;
    std::string author_name;
    Bytes data;
    ByteArray<32> nonce{};
    std::optional<crypto::Signature> signature;
    std::variant<ProductBody, BatchBody, ActionBody> body;

    bool operator==(const StorageEntry&) const = default;

    bool is_product() const { return std::holds_alternative<ProductBody>(body); }
    bool is_batch() const { return std::holds_alternative<BatchBody>(body); }
    bool is_action() const { return std::holds_alternative<ActionBody>(body); }
};

// ---------------------------------------------------------------------------
// Canonical serialization (deterministic CBOR, the bit-exact interchange
// format for all entries on disk and on the wire)
// ---------------------------------------------------------------------------

Bytes canonical_serialize(const AssetEntry& entry);
Bytes canonical_serialize(const UserEntry& entry);
Bytes canonical_serialize(const StorageEntry& entry);

AssetEntry decode_asset_entry(ByteView bytes);
UserEntry decode_user_entry(ByteView bytes);
StorageEntry decode_storage_entry(ByteView bytes);

// Canonical bytes of every field except the signature; the message an
// author signs.
Bytes storage_entry_signing_bytes(const StorageEntry& entry);

void sign_storage_entry(StorageEntry& entry, const crypto::Scalar& author_secret);
bool verify_storage_entry_signature(const StorageEntry& entry, const UserAddress& author);

// cbor sub-encoders shared with the ledger's transaction formats
cbor::Value ref_to_cbor(const StorageRef& ref);
StorageRef ref_from_cbor(const cbor::Value& v);
cbor::Value signature_to_cbor(const crypto::Signature& sig);
crypto::Signature signature_from_cbor(const cbor::Value& v);

UserAddress user_address_from_bytes(ByteView bytes);
LedgerAddress ledger_address_from_bytes(ByteView bytes);
StorageAddress storage_address_from_bytes(ByteView bytes);

} // namespace spoq
