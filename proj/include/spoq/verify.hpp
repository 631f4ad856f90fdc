#pragma once

#include <optional>
#include <string>
#include <vector>

#include "spoq/ledger.hpp"
#include "spoq/storage.hpp"

namespace spoq::verify {

enum class Check : std::uint8_t { Pass = 0, Fail = 1, Skipped = 2 };
std::string_view check_name(Check c);

struct TrailNode {
    std::optional<LedgerAddress> ledger;
    StorageRef ref;

    bool operator==(const TrailNode&) const = default;
};

struct VerificationReport {
    Check hash_ok = Check::Skipped;
    Check signature_ok = Check::Skipped;
    Check role_ok = Check::Skipped;
    Check origin_ok = Check::Skipped;
    Check fingerprint_ok = Check::Skipped;
    std::vector<TrailNode> origin_trail; // root first
    std::vector<std::string> diagnostics;

    // Overall verdict: passes iff no step failed.
    bool pass() const;

    cbor::Value to_cbor() const;
    std::string to_text() const;
};

// Physical-interface contract: answer a fresh 32-byte challenge with proof
// bytes. Pluggable per fingerprint header.
class DeviceInterface {
public:
    virtual ~DeviceInterface() = default;
    virtual Bytes request(const ByteArray<32>& challenge) = 0;
};

// In-process stand-in for the NFC ZK-PUF demonstrator: publishes a group
// commitment as fingerprint and answers challenges with Schnorr
// identification proofs, never revealing the committed scalar.
class MockPufDevice final : public DeviceInterface {
public:
    static MockPufDevice create(crypto::Rng& rng);
    static MockPufDevice from_secret(const crypto::Scalar& secret);

    const UserAddress& commitment() const { return commitment_; }
    const crypto::Scalar& secret() const { return secret_; }

    Bytes request(const ByteArray<32>& challenge) override;

private:
    crypto::Scalar secret_;
    UserAddress commitment_;
};

// Scanner stand-in for printed codes: returns the same bytes regardless of
// challenge.
class BarcodeDevice final : public DeviceInterface {
public:
    explicit BarcodeDevice(Bytes code) : code_(std::move(code)) {}
    Bytes request(const ByteArray<32>&) override { return code_; }

private:
    Bytes code_;
};

Fingerprint fingerprint_enroll(const MockPufDevice& device);
Fingerprint barcode_fingerprint(ByteView code);

// Dispatches on the fingerprint header; throws UnknownFingerprintType for
// unregistered headers.
bool fingerprint_verify(const Fingerprint& fp, DeviceInterface& device, crypto::Rng& rng);

// The asset under verification: its storage bytes plus the reference they
// are published under; ledger_addr when the asset has its own entry.
struct OriginSubject {
    StorageRef ref;
    Bytes bytes;
    std::optional<LedgerAddress> ledger_addr;
};

struct OriginResult {
    bool ok = false;
    std::vector<TrailNode> trail; // root first; empty on failure
    std::vector<std::string> diagnostics;
};

// Origin-trail verification: walks parent batches up to a producer-created
// root, checking at every level that some trail member's storage address
// and hash appear in the parent's component list, that each parent's
// storage entry is intact and author-signed, and that the root's author
// matches the leaf's.
OriginResult origin(const OriginSubject& subject, const ledger::Ledger& ledger,
                    storage::EntrySource& source);

// Client-side asset verification pipeline: entry fetch, hash comparison,
// author signature and role checks, origin trail, and the optional
// physical fingerprint step.
VerificationReport verify_asset(const LedgerAddress& addr, const ledger::Ledger& ledger,
                                storage::EntrySource& source,
                                DeviceInterface* device = nullptr,
                                crypto::Rng* rng = nullptr);

} // namespace spoq::verify
