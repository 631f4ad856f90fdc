#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "spoq/crypto.hpp"
#include "spoq/model.hpp"

namespace spoq::storage {

// Client-side record of everything needed to read an asset's off-chain data
// later: access keys for the key-based protocol, decryption keys for
// content-addressed blobs, the storage server locator (domain-hidden mode
// keeps it out of the storage address), and the enrolled demo-device secret.
struct KeystoreRecord {
    LedgerAddress asset;
    std::vector<crypto::AccessKey> access_keys;
    std::vector<ByteArray<32>> encryption_keys;
    std::optional<std::string> domain_hint;
    std::optional<crypto::Scalar> fingerprint_secret;

    bool operator==(const KeystoreRecord&) const = default;
};

cbor::Value keystore_record_to_cbor(const KeystoreRecord& record);
KeystoreRecord keystore_record_from_cbor(const cbor::Value& v);

// Single-file persistent map keyed by asset address; every put rewrites the
// file, so records survive process restarts.
class Keystore {
public:
    explicit Keystore(std::filesystem::path file);

    void put(const KeystoreRecord& record);
    KeystoreRecord get(const LedgerAddress& asset) const; // throws NotFound
    std::optional<KeystoreRecord> find(const LedgerAddress& asset) const;
    std::vector<KeystoreRecord> list() const;

private:
    void persist() const;
    void load();

    std::filesystem::path file_;
    mutable std::mutex mutex_;
    std::map<LedgerAddress, KeystoreRecord> records_;
};

} // namespace spoq::storage
