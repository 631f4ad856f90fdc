#include "spoq/storage.hpp"

#include <fstream>

namespace spoq::storage {

cbor::Value policy_to_cbor(const AccessPolicy& policy) {
    cbor::MapBuilder b;
    b.put("mode", cbor::Value::uns(static_cast<std::uint64_t>(policy.mode)));
    if (policy.mode == AccessPolicy::Mode::KeyProtected) {
        if (!policy.key)
            fail(Errc::PolicyInvalid, "key-protected policy without a key");
        b.put("key", cbor::Value::bytes(ByteView(policy.key->bytes)));
    }
    if (policy.mode == AccessPolicy::Mode::OwnershipProtected) {
        if (!policy.asset)
            fail(Errc::PolicyInvalid, "ownership policy without an asset link");
        b.put("asset", cbor::Value::bytes(policy.asset->view()));
    }
    return b.build();
}

AccessPolicy policy_from_cbor(const cbor::Value& v) {
    AccessPolicy policy;
    const std::uint64_t mode = v.at("mode").as_unsigned();
    if (mode > 2)
        fail(Errc::PolicyInvalid, "unknown policy mode");
    policy.mode = static_cast<AccessPolicy::Mode>(mode);
    if (policy.mode == AccessPolicy::Mode::KeyProtected)
        policy.key = crypto::AccessKey{to_array<32>(v.at("key").as_bytes())};
    if (policy.mode == AccessPolicy::Mode::OwnershipProtected)
        policy.asset = ledger_address_from_bytes(v.at("asset").as_bytes());
    return policy;
}

// ---------------------------------------------------------------------------
// NonceTable
// ---------------------------------------------------------------------------

NonceTable::NonceTable(std::chrono::milliseconds ttl, Clock clock, crypto::Rng* rng)
    : ttl_(ttl), clock_(std::move(clock)), rng_(rng) {
    if (!clock_)
        clock_ = [] { return std::chrono::steady_clock::now(); };
}

Challenge NonceTable::issue() {
    crypto::Rng& rng = rng_ ? *rng_ : crypto::system_rng();
    Challenge nonce;
    std::lock_guard lock(mutex_);
    do {
        rng.fill(nonce.data(), nonce.size());
    } while (records_.contains(nonce));
    records_.emplace(nonce, Record{clock_(), false});
    return nonce;
}

NonceTable::Consume NonceTable::check_and_consume(const Challenge& nonce) {
    std::lock_guard lock(mutex_);
    const auto it = records_.find(nonce);
    if (it == records_.end())
        return Consume::Unknown;
    if (it->second.consumed)
        return Consume::AlreadyConsumed;
    if (clock_() - it->second.issued_at > ttl_)
        return Consume::Expired;
    it->second.consumed = true;
    return Consume::Ok;
}

// ---------------------------------------------------------------------------
// ContentStore
// ---------------------------------------------------------------------------

ContentStore::ContentStore(std::filesystem::path file) : file_(std::move(file)) {
    if (std::filesystem::exists(file_))
        load();
}

StorageAddress ContentStore::put(ByteView blob) {
    const StorageAddress address = derive_storage_address(backend::kContentStore, blob);
    std::lock_guard lock(mutex_);
    blobs_[address] = to_bytes(blob);
    if (!file_.empty())
        persist();
    return address;
}

Bytes ContentStore::read(const StorageAddress& address,
                         const std::optional<crypto::AccessKey>& decryption_key) const {
    Bytes blob;
    {
        std::lock_guard lock(mutex_);
        const auto it = blobs_.find(address);
        if (it == blobs_.end())
            fail(Errc::NotFound, "no blob at " + hex_encode(address.view()));
        blob = it->second;
    }
    if (decryption_key)
        return crypto::aead_decrypt(blob, *decryption_key, {});
    return blob;
}

bool ContentStore::contains(const StorageAddress& address) const {
    std::lock_guard lock(mutex_);
    return blobs_.contains(address);
}

std::size_t ContentStore::size() const {
    std::lock_guard lock(mutex_);
    return blobs_.size();
}

void ContentStore::persist() const {
    cbor::MapBuilder entries;
    for (const auto& [addr, blob] : blobs_)
        entries.put(hex_encode(addr.view()), cbor::Value::bytes(ByteView(blob)));
    const Bytes bytes =
        cbor::encode(cbor::MapBuilder{}.put("blobs", entries.build()).build());
    std::ofstream out(file_, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::IoError, "cannot write " + file_.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

void ContentStore::load() {
    std::ifstream in(file_, std::ios::binary);
    if (!in)
        fail(Errc::IoError, "cannot read " + file_.string());
    const Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    const cbor::Value v = cbor::decode(bytes);
    for (const auto& [key, blob] : v.at("blobs").map_entries())
        blobs_[storage_address_from_bytes(hex_decode(key))] = blob.as_bytes();
}

// ---------------------------------------------------------------------------
// StorageServer
// ---------------------------------------------------------------------------

Bytes write_signing_message(ByteView entry_bytes) {
    return concat({to_bytes(kWriteTag), entry_bytes});
}

Bytes owner_proof_message(const Challenge& nonce) {
    return concat({to_bytes(kOwnTag), nonce});
}

Bytes make_key_proof(const Challenge& nonce, const crypto::AccessKey& key,
                     const StorageAddress& address, crypto::Rng& rng) {
    return crypto::aead_encrypt(nonce, key, address.view(), rng);
}

crypto::Signature make_owner_proof(const Challenge& nonce, const crypto::KeyPair& owner) {
    return crypto::sign(owner_proof_message(nonce), owner.secret);
}

crypto::Signature make_write_proof(ByteView entry_bytes, const crypto::KeyPair& writer) {
    return crypto::sign(write_signing_message(entry_bytes), writer.secret);
}

StorageServer::StorageServer(ServerConfig config, LedgerQuery ledger)
    : config_(std::move(config)), ledger_(std::move(ledger)),
      nonces_(config_.nonce_ttl, config_.clock) {}

Challenge StorageServer::request_nonce() {
    return nonces_.issue();
}

StorageAddress StorageServer::put_entry(ByteView entry_bytes, const AccessPolicy& policy,
                                        const UserAddress& writer_pub,
                                        const crypto::Signature& writer_sig) {
    if (policy.mode == AccessPolicy::Mode::KeyProtected && !policy.key)
        fail(Errc::PolicyInvalid, "key-protected policy without a key");
    if (policy.mode == AccessPolicy::Mode::OwnershipProtected && !policy.asset)
        fail(Errc::PolicyInvalid, "ownership policy without an asset link");

    if (!crypto::verify(writer_sig, write_signing_message(entry_bytes), writer_pub))
        fail(Errc::WriteDenied, "writer signature invalid");

    if (config_.write_mode == WriteMode::Allowlist) {
        if (!config_.allowlist.contains(writer_pub))
            fail(Errc::WriteDenied, "writer is not on the allowlist");
    } else {
        // Public action store: writers prove current ownership of the
        // action's bound asset.
        StorageEntry entry;
        try {
            entry = decode_storage_entry(entry_bytes);
        } catch (const Error&) {
            fail(Errc::WriteDenied, "public store accepts well-formed entries only");
        }
        const auto* action = std::get_if<ActionBody>(&entry.body);
        if (!action)
            fail(Errc::WriteDenied, "public store accepts action entries only");
        const auto asset = ledger_ ? ledger_(action->asset) : std::nullopt;
        if (!asset)
            fail(Errc::WriteDenied, "action is bound to an unknown asset");
        if (asset->current_owner() != writer_pub)
            fail(Errc::WriteDenied, "writer does not own the bound asset");
    }

    const StorageAddress address = derive_storage_address(backend::kHttpServer, entry_bytes);
    std::lock_guard lock(mutex_);
    entries_.try_emplace(address, Stored{to_bytes(entry_bytes), policy});
    return address;
}

const StorageServer::Stored& StorageServer::find_entry(const StorageAddress& address) const {
    const auto it = entries_.find(address);
    if (it == entries_.end())
        fail(Errc::NotFound, "no entry at " + hex_encode(address.view()));
    return it->second;
}

void StorageServer::consume_or_fail(const Challenge& nonce) {
    switch (nonces_.check_and_consume(nonce)) {
    case NonceTable::Consume::Ok:
        return;
    case NonceTable::Consume::Unknown:
        fail(Errc::NonceInvalid, "nonce was never issued");
    case NonceTable::Consume::AlreadyConsumed:
        fail(Errc::NonceInvalid, "nonce already consumed");
    case NonceTable::Consume::Expired:
        fail(Errc::NonceInvalid, "nonce expired");
    }
}

Bytes StorageServer::read_key_protected(const StorageAddress& address, ByteView ciphertext) {
    Bytes bytes;
    crypto::AccessKey key;
    {
        std::lock_guard lock(mutex_);
        const Stored& stored = find_entry(address);
        if (stored.policy.mode == AccessPolicy::Mode::Public)
            return stored.bytes;
        if (stored.policy.mode != AccessPolicy::Mode::KeyProtected)
            fail(Errc::KeyMismatch, "entry is not key-protected");
        bytes = stored.bytes;
        key = *stored.policy.key;
    }
    Bytes plaintext;
    try {
        plaintext = crypto::aead_decrypt(ciphertext, key, address.view());
    } catch (const Error&) {
        fail(Errc::KeyMismatch, "challenge ciphertext does not authenticate");
    }
    if (plaintext.size() != kChallengeLen)
        fail(Errc::KeyMismatch, "challenge plaintext malformed");
    consume_or_fail(to_array<kChallengeLen>(plaintext));
    return bytes;
}

Bytes StorageServer::read_ownership_protected(const StorageAddress& address,
                                              const Challenge& nonce,
                                              const crypto::Signature& nonce_signature) {
    Bytes bytes;
    LedgerAddress asset_addr;
    {
        std::lock_guard lock(mutex_);
        const Stored& stored = find_entry(address);
        if (stored.policy.mode == AccessPolicy::Mode::Public)
            return stored.bytes;
        if (stored.policy.mode != AccessPolicy::Mode::OwnershipProtected)
            fail(Errc::NotOwner, "entry is not ownership-protected");
        bytes = stored.bytes;
        asset_addr = *stored.policy.asset;
    }
    const auto asset = ledger_ ? ledger_(asset_addr) : std::nullopt;
    if (!asset)
        fail(Errc::AssetLinkMissing, "governing asset is not on the ledger");
    if (!crypto::verify(nonce_signature, owner_proof_message(nonce), asset->current_owner()))
        fail(Errc::NotOwner, "signature does not match the current owner");
    consume_or_fail(nonce);
    return bytes;
}

std::size_t StorageServer::entry_count() const {
    std::lock_guard lock(mutex_);
    return entries_.size();
}

// ---------------------------------------------------------------------------
// ContentSource
// ---------------------------------------------------------------------------

Bytes ContentSource::fetch(const StorageAddress& address) {
    Bytes blob = store_.read(address);
    // Clients re-verify content addressing before trusting the bytes.
    if (derive_storage_address(backend::kContentStore, blob) != address)
        fail(Errc::KeyMismatch, "stored blob does not match its address");
    for (const crypto::AccessKey& key : keys_) {
        try {
            return crypto::aead_decrypt(blob, key, {});
        } catch (const Error&) {
            // try next key; fall through to plaintext
        }
    }
    return blob;
}

} // namespace spoq::storage
