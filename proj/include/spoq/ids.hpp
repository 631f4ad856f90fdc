#pragma once

#include <compare>
#include <cstdint>

#include "spoq/bytes.hpp"

namespace spoq {

// 33-byte compressed public key of a group element; doubles as the user's
// anonymous on-chain identity.
struct UserAddress {
    ByteArray<33> bytes{};

    auto operator<=>(const UserAddress&) const = default;
    ByteView view() const { return ByteView(bytes.data(), bytes.size()); }
};

// 3-byte platform namespace followed by a 32-byte digest.
struct LedgerAddress {
    ByteArray<35> bytes{};

    auto operator<=>(const LedgerAddress&) const = default;
    ByteView view() const { return ByteView(bytes.data(), bytes.size()); }
};

// 2-byte storage system descriptor followed by a 30-byte truncated digest
// of the stored bytes.
struct StorageAddress {
    ByteArray<32> bytes{};

    auto operator<=>(const StorageAddress&) const = default;
    ByteView view() const { return ByteView(bytes.data(), bytes.size()); }
    ByteArray<2> descriptor() const { return {bytes[0], bytes[1]}; }
};

// Locator plus content hash; the on-ledger handle for an off-chain entry.
struct StorageRef {
    StorageAddress address;
    Hash32 hash{};

    auto operator<=>(const StorageRef&) const = default;
};

} // namespace spoq
