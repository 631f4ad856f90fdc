#include "spoq/verify.hpp"

#include <algorithm>
#include <deque>
#include <set>
#include <sstream>

namespace spoq::verify {

std::string_view check_name(Check c) {
    switch (c) {
    case Check::Pass: return "PASS";
    case Check::Fail: return "FAIL";
    case Check::Skipped: return "SKIPPED";
    }
    return "?";
}

bool VerificationReport::pass() const {
    for (Check c : {hash_ok, signature_ok, role_ok, origin_ok, fingerprint_ok})
        if (c == Check::Fail)
            return false;
    return true;
}

cbor::Value VerificationReport::to_cbor() const {
    cbor::Array trail;
    for (const TrailNode& node : origin_trail)
        trail.push_back(cbor::MapBuilder{}
                            .put("ref", ref_to_cbor(node.ref))
                            .put_if(node.ledger.has_value(), "ledger",
                                    node.ledger ? cbor::Value::bytes(node.ledger->view())
                                                : cbor::Value::null())
                            .build());
    cbor::Array diags;
    for (const std::string& d : diagnostics)
        diags.push_back(cbor::Value::text(d));
    return cbor::MapBuilder{}
        .put("hash", cbor::Value::uns(static_cast<std::uint64_t>(hash_ok)))
        .put("signature", cbor::Value::uns(static_cast<std::uint64_t>(signature_ok)))
        .put("role", cbor::Value::uns(static_cast<std::uint64_t>(role_ok)))
        .put("origin", cbor::Value::uns(static_cast<std::uint64_t>(origin_ok)))
        .put("fingerprint", cbor::Value::uns(static_cast<std::uint64_t>(fingerprint_ok)))
        .put("trail", cbor::Value::array(std::move(trail)))
        .put("diagnostics", cbor::Value::array(std::move(diags)))
        .put("verdict", cbor::Value::boolean(pass()))
        .build();
}

std::string VerificationReport::to_text() const {
    std::ostringstream out;
    out << "hash:        " << check_name(hash_ok) << "\n"
        << "signature:   " << check_name(signature_ok) << "\n"
        << "role:        " << check_name(role_ok) << "\n"
        << "origin:      " << check_name(origin_ok) << "\n"
        << "fingerprint: " << check_name(fingerprint_ok) << "\n"
        << "verdict:     " << (pass() ? "PASS" : "FAIL") << "\n";
    if (!origin_trail.empty()) {
        out << "origin trail (root first):\n";
        std::size_t i = 1;
        for (const TrailNode& node : origin_trail) {
            out << "  " << i++ << ". storage=" << hex_encode(node.ref.address.view());
            if (node.ledger)
                out << " ledger=" << hex_encode(node.ledger->view());
            out << "\n";
        }
    }
    for (const std::string& d : diagnostics)
        out << "note: " << d << "\n";
    return out.str();
}

// ---------------------------------------------------------------------------
// Fingerprints
// ---------------------------------------------------------------------------

MockPufDevice MockPufDevice::create(crypto::Rng& rng) {
    const crypto::KeyPair kp = crypto::keygen(rng);
    MockPufDevice device;
    device.secret_ = kp.secret;
    device.commitment_ = kp.pub;
    return device;
}

MockPufDevice MockPufDevice::from_secret(const crypto::Scalar& secret) {
    const crypto::KeyPair kp = crypto::keypair_from_secret(secret);
    MockPufDevice device;
    device.secret_ = kp.secret;
    device.commitment_ = kp.pub;
    return device;
}

Bytes MockPufDevice::request(const ByteArray<32>& challenge) {
    return crypto::id_prove(secret_, challenge);
}

Fingerprint fingerprint_enroll(const MockPufDevice& device) {
    Fingerprint fp;
    fp.header = fingerprint::kZkPuf;
    fp.payload = to_bytes(device.commitment().view());
    return fp;
}

Fingerprint barcode_fingerprint(ByteView code) {
    Fingerprint fp;
    fp.header = fingerprint::kBarcode;
    fp.payload = to_bytes(code);
    return fp;
}

bool fingerprint_verify(const Fingerprint& fp, DeviceInterface& device, crypto::Rng& rng) {
    if (fp.header == fingerprint::kZkPuf) {
        if (fp.payload.size() != 33)
            return false;
        const UserAddress commitment = user_address_from_bytes(fp.payload);
        if (!crypto::valid_user_address(commitment))
            return false;
        const ByteArray<32> challenge = rng.array<32>();
        const Bytes proof = device.request(challenge);
        return crypto::id_verify(commitment, challenge, proof);
    }
    if (fp.header == fingerprint::kBarcode) {
        const ByteArray<32> challenge = rng.array<32>();
        return device.request(challenge) == fp.payload;
    }
    fail(Errc::UnknownFingerprintType, hex_encode(fp.header));
}

// ---------------------------------------------------------------------------
// Origin trail
// ---------------------------------------------------------------------------

namespace {

struct Node {
    StorageRef ref;
    Bytes bytes;
    StorageEntry entry;
    std::optional<LedgerAddress> ledger_addr;
    std::optional<LedgerAddress> parent_link;
    std::optional<Hash32> ledger_hash;
    // Signature-verified author key and its registered roles.
    std::optional<UserAddress> author;
};

struct Pool {
    std::map<StorageAddress, Node> nodes;
    std::vector<std::string> diagnostics;
};

std::optional<UserAddress> resolve_author(const StorageEntry& entry,
                                          const ledger::Ledger& ledger) {
    if (!entry.signature)
        return std::nullopt;
    for (const auto& [addr, user] : ledger.users_named(entry.author_name))
        if (verify_storage_entry_signature(entry, user.public_key))
            return user.public_key;
    return std::nullopt;
}

void attach_ledger_context(Node& node, const LedgerAddress& addr, const AssetEntry& asset) {
    node.ledger_addr = addr;
    node.parent_link = asset.parent;
    node.ledger_hash = asset.storage.hash;
}

// Fetches every storage entry reachable with the caller's credentials:
// all on-ledger assets' entries plus, transitively, everything their batch
// component lists reference. Access-restricted siblings are skipped, so
// resolution is best-effort over readable entries.
Pool build_pool(const ledger::Ledger& ledger, storage::EntrySource& source) {
    Pool pool;
    std::deque<StorageRef> frontier;

    auto add_node = [&](const StorageRef& ref, Bytes bytes) -> Node* {
        StorageEntry entry;
        try {
            entry = decode_storage_entry(bytes);
        } catch (const Error&) {
            pool.diagnostics.push_back("undecodable entry at " + hex_encode(ref.address.view()));
            return nullptr;
        }
        Node node;
        node.ref = ref;
        node.bytes = std::move(bytes);
        node.author = resolve_author(entry, ledger);
        node.entry = std::move(entry);
        return &pool.nodes.emplace(ref.address, std::move(node)).first->second;
    };

    auto fetch_into_pool = [&](const StorageRef& ref) -> Node* {
        if (const auto it = pool.nodes.find(ref.address); it != pool.nodes.end())
            return &it->second;
        Bytes bytes;
        try {
            bytes = source.fetch(ref.address);
        } catch (const Error& e) {
            pool.diagnostics.push_back("unreadable entry at " + hex_encode(ref.address.view()) +
                                       " (" + std::string(e.code_name()) + ")");
            return nullptr;
        }
        return add_node(ref, std::move(bytes));
    };

    for (const auto& [addr, asset] : ledger.assets()) {
        Node* node = fetch_into_pool(asset.storage);
        // First ledger entry referencing a storage address wins the context.
        if (node && !node->ledger_addr)
            attach_ledger_context(*node, addr, asset);
        if (node && node->entry.is_batch())
            for (const StorageRef& c : std::get<BatchBody>(node->entry.body).components)
                frontier.push_back(c);
    }

    while (!frontier.empty()) {
        const StorageRef ref = frontier.front();
        frontier.pop_front();
        if (pool.nodes.contains(ref.address))
            continue;
        Node* node = fetch_into_pool(ref);
        if (node && node->entry.is_batch())
            for (const StorageRef& c : std::get<BatchBody>(node->entry.body).components)
                frontier.push_back(c);
    }
    return pool;
}

std::optional<Hash32> find_component(const StorageEntry& batch, const StorageAddress& address) {
    const auto* body = std::get_if<BatchBody>(&batch.body);
    if (!body)
        return std::nullopt;
    for (const StorageRef& c : body->components)
        if (c.address == address)
            return c.hash;
    return std::nullopt;
}

bool integrity_check(const Node& node, std::vector<std::string>& diagnostics) {
    if (node.ledger_hash && entry_hash(node.bytes) != *node.ledger_hash) {
        diagnostics.push_back("storage hash mismatch for on-ledger entry at " +
                              hex_encode(node.ref.address.view()));
        return false;
    }
    if (!node.author) {
        diagnostics.push_back("author signature unverifiable at " +
                              hex_encode(node.ref.address.view()));
        return false;
    }
    return true;
}

struct ParentResolution {
    enum class Kind { Root, Found, Unresolvable } kind = Kind::Unresolvable;
    const Node* node = nullptr;
    std::string reason;
};

ParentResolution resolve_parent(const Node& node, const Pool& pool,
                                const ledger::Ledger& ledger) {
    // An asset with its own ledger entry follows the recorded lineage: the
    // split/publish parent link when present, otherwise it is a
    // producer-created root.
    if (node.ledger_addr) {
        if (!node.parent_link)
            return {ParentResolution::Kind::Root, nullptr, {}};
        const auto assets = ledger.assets();
        const auto it = assets.find(*node.parent_link);
        if (it == assets.end())
            return {ParentResolution::Kind::Unresolvable, nullptr, "parent link dangles"};
        const auto parent_node = pool.nodes.find(it->second.storage.address);
        if (parent_node == pool.nodes.end())
            return {ParentResolution::Kind::Unresolvable, nullptr,
                    "parent batch entry is unreadable"};
        return {ParentResolution::Kind::Found, &parent_node->second, {}};
    }
    // Off-ledger components must be covered by some readable batch.
    for (const auto& [addr, candidate] : pool.nodes)
        if (find_component(candidate.entry, node.ref.address))
            return {ParentResolution::Kind::Found, &candidate, {}};
    return {ParentResolution::Kind::Unresolvable, nullptr,
            "no readable batch lists this entry and it has no ledger entry"};
}

} // namespace

OriginResult origin(const OriginSubject& subject, const ledger::Ledger& ledger,
                    storage::EntrySource& source) {
    OriginResult result;

    StorageEntry subject_entry;
    try {
        subject_entry = decode_storage_entry(subject.bytes);
    } catch (const Error&) {
        result.diagnostics.push_back("subject entry bytes are undecodable");
        return result;
    }

    Pool pool = build_pool(ledger, source);
    result.diagnostics = pool.diagnostics;

    // Register the subject under its own reference if nothing on the ledger
    // brought it in already.
    Node subject_node;
    subject_node.ref = subject.ref;
    subject_node.bytes = subject.bytes;
    subject_node.entry = std::move(subject_entry);
    subject_node.author = resolve_author(subject_node.entry, ledger);
    if (subject.ledger_addr) {
        const auto it = ledger.assets().find(*subject.ledger_addr);
        if (it != ledger.assets().end())
            attach_ledger_context(subject_node, *subject.ledger_addr, it->second);
    }
    const auto existing = pool.nodes.find(subject.ref.address);
    const Node* current = nullptr;
    if (existing != pool.nodes.end() && existing->second.bytes == subject.bytes) {
        current = &existing->second;
    } else {
        pool.nodes[subject.ref.address] = std::move(subject_node);
        current = &pool.nodes[subject.ref.address];
    }

    std::vector<const Node*> trail; // [0] = nearest parent side, back() = leaf
    std::set<StorageAddress> visited{current->ref.address};

    for (;;) {
        const ParentResolution parent = resolve_parent(*current, pool, ledger);
        if (parent.kind == ParentResolution::Kind::Unresolvable) {
            result.diagnostics.push_back(parent.reason);
            return result;
        }
        if (parent.kind == ParentResolution::Kind::Root) {
            if (!trail.empty()) {
                const Node* leaf = trail.back();
                if (!current->author || !leaf->author || *current->author != *leaf->author) {
                    result.diagnostics.push_back(
                        "leaf asset is not created by the root batch's producer");
                    return result;
                }
            }
            result.ok = true;
            result.trail.push_back(TrailNode{current->ledger_addr, current->ref});
            for (const Node* n : trail)
                result.trail.push_back(TrailNode{n->ledger_addr, n->ref});
            return result;
        }

        const Node& p = *parent.node;
        if (visited.contains(p.ref.address)) {
            result.diagnostics.push_back("cycle in parent resolution");
            return result;
        }
        if (!integrity_check(p, result.diagnostics))
            return result;

        // The parent's component list must cover the asset or some member
        // of the trail, with a matching hash.
        std::vector<const Node*> members{current};
        members.insert(members.end(), trail.begin(), trail.end());
        std::optional<bool> covered;
        for (const Node* member : members) {
            const std::optional<Hash32> listed = find_component(p.entry, member->ref.address);
            if (!listed)
                continue;
            covered = entry_hash(member->bytes) == *listed;
            if (!*covered)
                result.diagnostics.push_back("integrity violation in origin trail at " +
                                             hex_encode(member->ref.address.view()));
            break;
        }
        if (!covered) {
            result.diagnostics.push_back("parent batch covers neither the asset nor the trail");
            return result;
        }
        if (!*covered)
            return result;

        visited.insert(p.ref.address);
        trail.insert(trail.begin(), current);
        current = &p;
    }
}

// ---------------------------------------------------------------------------
// Asset verification pipeline
// ---------------------------------------------------------------------------

VerificationReport verify_asset(const LedgerAddress& addr, const ledger::Ledger& ledger,
                                storage::EntrySource& source, DeviceInterface* device,
                                crypto::Rng* rng) {
    VerificationReport report;

    const AssetEntry* asset = nullptr;
    try {
        asset = &ledger.query_asset(addr);
    } catch (const Error& e) {
        report.hash_ok = Check::Fail;
        report.diagnostics.push_back("ledger lookup failed: " + std::string(e.what()));
        return report;
    }

    Bytes bytes;
    try {
        bytes = source.fetch(asset->storage.address);
    } catch (const Error& e) {
        report.hash_ok = Check::Fail;
        report.diagnostics.push_back("storage entry unreadable: " + std::string(e.what()));
        return report;
    }

    report.hash_ok = entry_hash(bytes) == asset->storage.hash ? Check::Pass : Check::Fail;
    if (report.hash_ok == Check::Fail)
        report.diagnostics.push_back("storage entry hash differs from the on-ledger hash");

    StorageEntry entry;
    try {
        entry = decode_storage_entry(bytes);
    } catch (const Error&) {
        report.signature_ok = Check::Fail;
        if (asset->parent)
            report.origin_ok = Check::Fail;
        report.diagnostics.push_back("storage entry bytes are undecodable");
        return report;
    }

    const UserEntry* author_entry = nullptr;
    if (!entry.signature) {
        report.signature_ok = Check::Fail;
        report.diagnostics.push_back("storage entry is unsigned");
    } else {
        for (const auto& [user_addr, user] : ledger.users_named(entry.author_name)) {
            if (verify_storage_entry_signature(entry, user.public_key)) {
                author_entry = &ledger.query_user(user_addr);
                break;
            }
        }
        report.signature_ok = author_entry ? Check::Pass : Check::Fail;
        if (!author_entry)
            report.diagnostics.push_back(
                "no registered key for author '" + entry.author_name + "' verifies the signature");
    }

    if (author_entry) {
        const bool ok = asset->parent
                            ? (author_entry->has_role(Role::Producer) ||
                               author_entry->has_role(Role::Intermediary))
                            : author_entry->has_role(Role::Producer);
        report.role_ok = ok ? Check::Pass : Check::Fail;
        if (!ok)
            report.diagnostics.push_back("author lacks the role required for this asset");
    } else {
        report.role_ok = Check::Skipped;
        report.diagnostics.push_back("author unresolved; role not checkable");
    }

    if (asset->parent) {
        const OriginResult res = origin({asset->storage, bytes, addr}, ledger, source);
        report.origin_ok = res.ok ? Check::Pass : Check::Fail;
        report.origin_trail = res.trail;
        for (const std::string& d : res.diagnostics)
            report.diagnostics.push_back("origin: " + d);
    } else {
        report.origin_ok = Check::Pass;
        report.origin_trail = {TrailNode{addr, asset->storage}};
    }

    if (device && entry.is_product()) {
        const Fingerprint& fp = std::get<ProductBody>(entry.body).fingerprint;
        try {
            const bool ok =
                fingerprint_verify(fp, *device, rng ? *rng : crypto::system_rng());
            report.fingerprint_ok = ok ? Check::Pass : Check::Fail;
            if (!ok)
                report.diagnostics.push_back("physical fingerprint verification failed");
        } catch (const Error& e) {
            report.fingerprint_ok = Check::Fail;
            report.diagnostics.push_back(std::string(e.what()));
        }
    }

    return report;
}

} // namespace spoq::verify
