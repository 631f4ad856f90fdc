#include "spoq/model.hpp"

#include <algorithm>

namespace spoq {

namespace {

cbor::Value roles_to_cbor(const std::vector<Role>& roles) {
    cbor::Array out;
    for (Role r : roles)
        out.push_back(cbor::Value::uns(static_cast<std::uint64_t>(r)));
    return cbor::Value::array(std::move(out));
}

std::vector<Role> roles_from_cbor(const cbor::Value& v) {
    std::vector<Role> roles;
    for (const auto& item : v.as_array()) {
        const std::uint64_t raw = item.as_unsigned();
        if (raw > 1)
            fail(Errc::DecodeError, "unknown role value");
        roles.push_back(static_cast<Role>(raw));
    }
    for (std::size_t i = 1; i < roles.size(); ++i)
        if (roles[i - 1] >= roles[i])
            fail(Errc::DecodeError, "roles not sorted/unique");
    return roles;
}

AssetKind kind_from_uns(std::uint64_t raw) {
    if (raw > 1)
        fail(Errc::DecodeError, "unknown asset kind");
    return static_cast<AssetKind>(raw);
}

void check_field_count(const cbor::Value& v, std::size_t expected, const char* what) {
    if (v.map_size() != expected)
        fail(Errc::DecodeError, std::string("unexpected fields in ") + what);
}

} // namespace

const ByteArray<3>& ledger_namespace() {
    static const ByteArray<3> ns = [] {
        const Hash32 h = crypto::sha256(to_bytes(std::string_view("spoqchain")));
        return ByteArray<3>{h[0], h[1], h[2]};
    }();
    return ns;
}

LedgerAddress derive_ledger_address(AddressKind kind, ByteView seed) {
    if (seed.empty())
        fail(Errc::EmptySeed, "address seed must be non-empty");
    Bytes input = to_bytes(crypto::kAddrTag);
    input.push_back(static_cast<std::uint8_t>(kind));
    append(input, seed);
    const Hash32 digest = crypto::sha256(input);
    LedgerAddress out;
    const ByteArray<3>& ns = ledger_namespace();
    std::memcpy(out.bytes.data(), ns.data(), 3);
    std::memcpy(out.bytes.data() + 3, digest.data(), 32);
    return out;
}

namespace backend {
bool is_registered(const ByteArray<2>& code) {
    return code == kHttpServer || code == kContentStore;
}
} // namespace backend

StorageAddress derive_storage_address(const ByteArray<2>& system, ByteView entry_bytes) {
    if (!backend::is_registered(system))
        fail(Errc::UnknownBackend, "storage system descriptor " + hex_encode(system));
    const Hash32 digest = crypto::sha256(entry_bytes);
    StorageAddress out;
    std::memcpy(out.bytes.data(), system.data(), 2);
    std::memcpy(out.bytes.data() + 2, digest.data(), 30);
    return out;
}

Hash32 entry_hash(ByteView entry_bytes) {
    return crypto::sha256(entry_bytes);
}

bool UserEntry::has_role(Role r) const {
    return std::find(roles.begin(), roles.end(), r) != roles.end();
}

namespace fingerprint {
bool is_registered(const ByteArray<4>& header) {
    return header == kZkPuf || header == kBarcode;
}
} // namespace fingerprint

// ---------------------------------------------------------------------------
// CBOR schemas
// ---------------------------------------------------------------------------

cbor::Value ref_to_cbor(const StorageRef& ref) {
    return cbor::MapBuilder{}
        .put("address", cbor::Value::bytes(ref.address.view()))
        .put("hash", cbor::Value::bytes(ByteView(ref.hash)))
        .build();
}

StorageRef ref_from_cbor(const cbor::Value& v) {
    check_field_count(v, 2, "storage ref");
    StorageRef ref;
    ref.address = storage_address_from_bytes(v.at("address").as_bytes());
    ref.hash = to_array<32>(v.at("hash").as_bytes());
    return ref;
}

cbor::Value signature_to_cbor(const crypto::Signature& sig) {
    return cbor::Value::bytes(ByteView(sig.serialize()));
}

crypto::Signature signature_from_cbor(const cbor::Value& v) {
    return crypto::Signature::parse(v.as_bytes());
}

UserAddress user_address_from_bytes(ByteView bytes) {
    if (bytes.size() != 33)
        fail(Errc::DecodeError, "user address must be 33 bytes");
    return UserAddress{to_array<33>(bytes)};
}

LedgerAddress ledger_address_from_bytes(ByteView bytes) {
    if (bytes.size() != 35)
        fail(Errc::DecodeError, "ledger address must be 35 bytes");
    return LedgerAddress{to_array<35>(bytes)};
}

StorageAddress storage_address_from_bytes(ByteView bytes) {
    if (bytes.size() != 32)
        fail(Errc::DecodeError, "storage address must be 32 bytes");
    return StorageAddress{to_array<32>(bytes)};
}

Bytes canonical_serialize(const AssetEntry& entry) {
    if (entry.owners.empty())
        throw std::invalid_argument("asset entry must have at least one owner");
    cbor::Array owners;
    for (const UserAddress& o : entry.owners)
        owners.push_back(cbor::Value::bytes(o.view()));
    cbor::Array actions;
    for (const StorageRef& a : entry.actions)
        actions.push_back(ref_to_cbor(a));
    return cbor::encode(
        cbor::MapBuilder{}
            .put("kind", cbor::Value::uns(static_cast<std::uint64_t>(entry.kind)))
            .put("storage", ref_to_cbor(entry.storage))
            .put("owners", cbor::Value::array(std::move(owners)))
            .put("actions", cbor::Value::array(std::move(actions)))
            .put_if(entry.parent.has_value(), "parent",
                    entry.parent ? cbor::Value::bytes(entry.parent->view()) : cbor::Value::null())
            .build());
}

AssetEntry decode_asset_entry(ByteView bytes) {
    const cbor::Value v = cbor::decode(bytes);
    AssetEntry entry;
    entry.kind = kind_from_uns(v.at("kind").as_unsigned());
    entry.storage = ref_from_cbor(v.at("storage"));
    for (const auto& o : v.at("owners").as_array())
        entry.owners.push_back(user_address_from_bytes(o.as_bytes()));
    if (entry.owners.empty())
        fail(Errc::DecodeError, "asset entry has no owners");
    for (const auto& a : v.at("actions").as_array())
        entry.actions.push_back(ref_from_cbor(a));
    if (const cbor::Value* p = v.find("parent"))
        entry.parent = ledger_address_from_bytes(p->as_bytes());
    check_field_count(v, entry.parent ? 5 : 4, "asset entry");
    return entry;
}

Bytes canonical_serialize(const UserEntry& entry) {
    return cbor::encode(cbor::MapBuilder{}
                            .put("name", cbor::Value::text(entry.name))
                            .put("roles", roles_to_cbor(entry.roles))
                            .put("pub", cbor::Value::bytes(entry.public_key.view()))
                            .put("revoked", cbor::Value::boolean(entry.revoked))
                            .build());
}

UserEntry decode_user_entry(ByteView bytes) {
    const cbor::Value v = cbor::decode(bytes);
    check_field_count(v, 4, "user entry");
    UserEntry entry;
    entry.name = v.at("name").as_text();
    entry.roles = roles_from_cbor(v.at("roles"));
    entry.public_key = user_address_from_bytes(v.at("pub").as_bytes());
    entry.revoked = v.at("revoked").as_bool();
    return entry;
}

namespace {

cbor::Value storage_entry_to_cbor(const StorageEntry& entry, bool include_signature) {
    cbor::MapBuilder b;
    b.put("name", cbor::Value::text(entry.name))
        .put("author", cbor::Value::text(entry.author_name))
        .put("data", cbor::Value::bytes(ByteView(entry.data)))
        .put("nonce", cbor::Value::bytes(ByteView(entry.nonce)));
    if (include_signature && entry.signature)
        b.put("sig", signature_to_cbor(*entry.signature));

    if (const auto* p = std::get_if<ProductBody>(&entry.body)) {
        b.put("type", cbor::Value::uns(0));
        b.put("fp", cbor::MapBuilder{}
                        .put("header", cbor::Value::bytes(ByteView(p->fingerprint.header)))
                        .put("payload", cbor::Value::bytes(ByteView(p->fingerprint.payload)))
                        .build());
        if (!p->components.empty()) {
            cbor::Array comps;
            for (const LedgerAddress& c : p->components)
                comps.push_back(cbor::Value::bytes(c.view()));
            b.put("components", cbor::Value::array(std::move(comps)));
        }
    } else if (const auto* bb = std::get_if<BatchBody>(&entry.body)) {
        if (bb->components.empty())
            throw std::invalid_argument("batch entry must list at least one component");
        b.put("type", cbor::Value::uns(1));
        cbor::Array comps;
        for (const StorageRef& c : bb->components)
            comps.push_back(ref_to_cbor(c));
        b.put("components", cbor::Value::array(std::move(comps)));
    } else {
        const auto& a = std::get<ActionBody>(entry.body);
        b.put("type", cbor::Value::uns(2));
        b.put("asset", cbor::Value::bytes(a.asset.view()));
    }
    return b.build();
}

} // namespace

Bytes canonical_serialize(const StorageEntry& entry) {
    return cbor::encode(storage_entry_to_cbor(entry, true));
}

Bytes storage_entry_signing_bytes(const StorageEntry& entry) {
    return cbor::encode(storage_entry_to_cbor(entry, false));
}

StorageEntry decode_storage_entry(ByteView bytes) {
    const cbor::Value v = cbor::decode(bytes);
    StorageEntry entry;
    entry.name = v.at("name").as_text();
    entry.author_name = v.at("author").as_text();
    entry.data = v.at("data").as_bytes();
    entry.nonce = to_array<32>(v.at("nonce").as_bytes());
    std::size_t fields = 5; // name, author, data, nonce, type
    if (const cbor::Value* sig = v.find("sig")) {
        entry.signature = signature_from_cbor(*sig);
        ++fields;
    }
    switch (v.at("type").as_unsigned()) {
    case 0: {
        ProductBody body;
        const cbor::Value& fp = v.at("fp");
        check_field_count(fp, 2, "fingerprint");
        body.fingerprint.header = to_array<4>(fp.at("header").as_bytes());
        body.fingerprint.payload = fp.at("payload").as_bytes();
        ++fields;
        if (const cbor::Value* comps = v.find("components")) {
            for (const auto& c : comps->as_array())
                body.components.push_back(ledger_address_from_bytes(c.as_bytes()));
            if (body.components.empty())
                fail(Errc::DecodeError, "empty component list must be omitted");
            ++fields;
        }
        entry.body = std::move(body);
        break;
    }
    case 1: {
        BatchBody body;
        for (const auto& c : v.at("components").as_array())
            body.components.push_back(ref_from_cbor(c));
        if (body.components.empty())
            fail(Errc::DecodeError, "batch entry has no components");
        ++fields;
        entry.body = std::move(body);
        break;
    }
    case 2: {
        ActionBody body;
        body.asset = ledger_address_from_bytes(v.at("asset").as_bytes());
        ++fields;
        entry.body = std::move(body);
        break;
    }
    default:
        fail(Errc::DecodeError, "unknown storage entry type");
    }
    check_field_count(v, fields, "storage entry");
    return entry;
}

void sign_storage_entry(StorageEntry& entry, const crypto::Scalar& author_secret) {
    entry.signature = crypto::sign(storage_entry_signing_bytes(entry), author_secret);
}

bool verify_storage_entry_signature(const StorageEntry& entry, const UserAddress& author) {
    if (!entry.signature)
        return false;
    return crypto::verify(*entry.signature, storage_entry_signing_bytes(entry), author);
}

} // namespace spoq
