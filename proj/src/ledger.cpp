#include "spoq/ledger.hpp"

#include <fstream>
#include <sstream>

namespace spoq::ledger {

namespace {

constexpr std::string_view kTxTag = "spoq/tx";

cbor::Value salt_to_cbor(const ByteArray<16>& salt) {
    return cbor::Value::bytes(ByteView(salt));
}

ByteArray<16> salt_from_cbor(const cbor::Value& v) {
    return to_array<16>(v.as_bytes());
}

cbor::Value roles_to_cbor(const std::vector<Role>& roles) {
    cbor::Array out;
    for (Role r : roles)
        out.push_back(cbor::Value::uns(static_cast<std::uint64_t>(r)));
    return cbor::Value::array(std::move(out));
}

std::vector<Role> roles_from_cbor(const cbor::Value& v) {
    std::vector<Role> roles;
    for (const auto& item : v.as_array()) {
        if (item.as_unsigned() > 1)
            fail(Errc::DecodeError, "unknown role value");
        roles.push_back(static_cast<Role>(item.as_unsigned()));
    }
    return roles;
}

cbor::Value call_to_cbor(const FunctionCall& call) {
    cbor::MapBuilder args;
    std::uint64_t fn = 0;
    if (const auto* c = std::get_if<CreateAssetArgs>(&call)) {
        fn = 0;
        args.put("kind", cbor::Value::uns(static_cast<std::uint64_t>(c->kind)))
            .put("storage", ref_to_cbor(c->storage))
            .put("owner", cbor::Value::bytes(c->initial_owner.view()))
            .put("salt", salt_to_cbor(c->salt));
    } else if (const auto* c = std::get_if<PublishComponentArgs>(&call)) {
        fn = 1;
        args.put("parent", cbor::Value::bytes(c->parent.view()))
            .put("kind", cbor::Value::uns(static_cast<std::uint64_t>(c->kind)))
            .put("storage", ref_to_cbor(c->storage))
            .put("owner", cbor::Value::bytes(c->initial_owner.view()))
            .put("salt", salt_to_cbor(c->salt));
    } else if (const auto* c = std::get_if<SplitBatchArgs>(&call)) {
        fn = 2;
        cbor::Array subs;
        for (const SubBatch& sb : c->sub_batches)
            subs.push_back(cbor::MapBuilder{}
                               .put("storage", ref_to_cbor(sb.storage))
                               .put("owner", cbor::Value::bytes(sb.initial_owner.view()))
                               .put("salt", salt_to_cbor(sb.salt))
                               .build());
        args.put("parent", cbor::Value::bytes(c->parent.view()))
            .put("subs", cbor::Value::array(std::move(subs)));
    } else if (const auto* c = std::get_if<LogActionArgs>(&call)) {
        fn = 3;
        args.put("asset", cbor::Value::bytes(c->asset.view()))
            .put("action", ref_to_cbor(c->action));
    } else if (const auto* c = std::get_if<TransferOwnershipArgs>(&call)) {
        fn = 4;
        args.put("asset", cbor::Value::bytes(c->asset.view()))
            .put("recipient", cbor::Value::bytes(c->recipient.view()));
    } else if (const auto* c = std::get_if<RegisterUserArgs>(&call)) {
        fn = 5;
        args.put("name", cbor::Value::text(c->name))
            .put("roles", roles_to_cbor(c->roles))
            .put("pub", cbor::Value::bytes(c->public_key.view()));
    } else {
        const auto& revoke = std::get<RevokeUserArgs>(call);
        fn = 6;
        args.put("user", cbor::Value::bytes(revoke.user.view()));
    }
    return cbor::MapBuilder{}
        .put("fn", cbor::Value::uns(fn))
        .put("args", args.build())
        .build();
}

FunctionCall call_from_cbor(const cbor::Value& v) {
    const cbor::Value& args = v.at("args");
    switch (v.at("fn").as_unsigned()) {
    case 0: {
        CreateAssetArgs c;
        const std::uint64_t kind = args.at("kind").as_unsigned();
        if (kind > 1)
            fail(Errc::DecodeError, "unknown asset kind");
        c.kind = static_cast<AssetKind>(kind);
        c.storage = ref_from_cbor(args.at("storage"));
        c.initial_owner = user_address_from_bytes(args.at("owner").as_bytes());
        c.salt = salt_from_cbor(args.at("salt"));
        return c;
    }
    case 1: {
        PublishComponentArgs c;
        c.parent = ledger_address_from_bytes(args.at("parent").as_bytes());
        const std::uint64_t kind = args.at("kind").as_unsigned();
        if (kind > 1)
            fail(Errc::DecodeError, "unknown asset kind");
        c.kind = static_cast<AssetKind>(kind);
        c.storage = ref_from_cbor(args.at("storage"));
        c.initial_owner = user_address_from_bytes(args.at("owner").as_bytes());
        c.salt = salt_from_cbor(args.at("salt"));
        return c;
    }
    case 2: {
        SplitBatchArgs c;
        c.parent = ledger_address_from_bytes(args.at("parent").as_bytes());
        for (const auto& sv : args.at("subs").as_array()) {
            SubBatch sb;
            sb.storage = ref_from_cbor(sv.at("storage"));
            sb.initial_owner = user_address_from_bytes(sv.at("owner").as_bytes());
            sb.salt = salt_from_cbor(sv.at("salt"));
            c.sub_batches.push_back(sb);
        }
        return c;
    }
    case 3: {
        LogActionArgs c;
        c.asset = ledger_address_from_bytes(args.at("asset").as_bytes());
        c.action = ref_from_cbor(args.at("action"));
        return c;
    }
    case 4: {
        TransferOwnershipArgs c;
        c.asset = ledger_address_from_bytes(args.at("asset").as_bytes());
        c.recipient = user_address_from_bytes(args.at("recipient").as_bytes());
        return c;
    }
    case 5: {
        RegisterUserArgs c;
        c.name = args.at("name").as_text();
        c.roles = roles_from_cbor(args.at("roles"));
        c.public_key = user_address_from_bytes(args.at("pub").as_bytes());
        return c;
    }
    case 6: {
        RevokeUserArgs c;
        c.user = ledger_address_from_bytes(args.at("user").as_bytes());
        return c;
    }
    default:
        fail(Errc::DecodeError, "unknown function id");
    }
}

cbor::Value ring_to_cbor(const crypto::RingSignature& sig) {
    cbor::Array resp;
    for (const auto& r : sig.responses)
        resp.push_back(cbor::Value::bytes(ByteView(r)));
    return cbor::MapBuilder{}
        .put("commit", cbor::Value::bytes(ByteView(sig.ring_commitment)))
        .put("seed", cbor::Value::bytes(ByteView(sig.challenge_seed)))
        .put("resp", cbor::Value::array(std::move(resp)))
        .build();
}

crypto::RingSignature ring_from_cbor(const cbor::Value& v) {
    crypto::RingSignature sig;
    sig.ring_commitment = to_array<32>(v.at("commit").as_bytes());
    sig.challenge_seed = to_array<32>(v.at("seed").as_bytes());
    for (const auto& r : v.at("resp").as_array())
        sig.responses.push_back(to_array<32>(r.as_bytes()));
    if (sig.responses.empty())
        fail(Errc::DecodeError, "ring signature has no responses");
    return sig;
}

cbor::Value auth_to_cbor(const Authenticator& auth) {
    if (const auto* o = std::get_if<OwnerAuth>(&auth))
        return cbor::MapBuilder{}
            .put("type", cbor::Value::uns(0))
            .put("pub", cbor::Value::bytes(o->pub.view()))
            .put("sig", signature_to_cbor(o->sig))
            .build();
    if (const auto* r = std::get_if<RoleAuth>(&auth))
        return cbor::MapBuilder{}
            .put("type", cbor::Value::uns(1))
            .put("role", cbor::Value::uns(static_cast<std::uint64_t>(r->role)))
            .put("ring", ring_to_cbor(r->ring))
            .build();
    const auto& c = std::get<ConsortiumAuth>(auth);
    return cbor::MapBuilder{}
        .put("type", cbor::Value::uns(2))
        .put("sig", signature_to_cbor(c.sig))
        .build();
}

Authenticator auth_from_cbor(const cbor::Value& v) {
    switch (v.at("type").as_unsigned()) {
    case 0: {
        OwnerAuth o;
        o.pub = user_address_from_bytes(v.at("pub").as_bytes());
        o.sig = signature_from_cbor(v.at("sig"));
        return o;
    }
    case 1: {
        RoleAuth r;
        if (v.at("role").as_unsigned() > 1)
            fail(Errc::DecodeError, "unknown role value");
        r.role = static_cast<Role>(v.at("role").as_unsigned());
        r.ring = ring_from_cbor(v.at("ring"));
        return r;
    }
    case 2: {
        ConsortiumAuth c;
        c.sig = signature_from_cbor(v.at("sig"));
        return c;
    }
    default:
        fail(Errc::DecodeError, "unknown authenticator type");
    }
}

cbor::Value tx_to_cbor(const Transaction& tx) {
    cbor::Array calls;
    for (const FunctionCall& c : tx.calls)
        calls.push_back(call_to_cbor(c));
    cbor::Array auth;
    for (const Authenticator& a : tx.auth)
        auth.push_back(auth_to_cbor(a));
    return cbor::MapBuilder{}
        .put("calls", cbor::Value::array(std::move(calls)))
        .put("auth", cbor::Value::array(std::move(auth)))
        .put("payload", cbor::Value::bytes(ByteView(tx.payload_hash)))
        .build();
}

Transaction tx_from_cbor(const cbor::Value& v) {
    Transaction tx;
    for (const auto& c : v.at("calls").as_array())
        tx.calls.push_back(call_from_cbor(c));
    if (tx.calls.empty())
        fail(Errc::DecodeError, "transaction has no calls");
    for (const auto& a : v.at("auth").as_array())
        tx.auth.push_back(auth_from_cbor(a));
    tx.payload_hash = to_array<32>(v.at("payload").as_bytes());
    return tx;
}

cbor::Value block_to_cbor(const Block& block, bool include_hash) {
    cbor::Array txs;
    for (const Transaction& tx : block.transactions)
        txs.push_back(tx_to_cbor(tx));
    return cbor::MapBuilder{}
        .put("height", cbor::Value::uns(block.height))
        .put("prev", cbor::Value::bytes(ByteView(block.previous_hash)))
        .put("txs", cbor::Value::array(std::move(txs)))
        .put_if(block.consortium.has_value(), "consortium",
                block.consortium ? cbor::Value::bytes(block.consortium->view())
                                 : cbor::Value::null())
        .put_if(include_hash, "hash", cbor::Value::bytes(ByteView(block.block_hash)))
        .build();
}

} // namespace

Hash32 payload_hash(const std::vector<FunctionCall>& calls) {
    cbor::Array arr;
    for (const FunctionCall& c : calls)
        arr.push_back(call_to_cbor(c));
    return crypto::sha256(cbor::encode(cbor::Value::array(std::move(arr))));
}

Hash32 compute_block_hash(const Block& block) {
    return crypto::sha256(cbor::encode(block_to_cbor(block, false)));
}

Bytes encode_transaction(const Transaction& tx) {
    return cbor::encode(tx_to_cbor(tx));
}

Transaction decode_transaction(ByteView bytes) {
    return tx_from_cbor(cbor::decode(bytes));
}

Bytes encode_block(const Block& block) {
    return cbor::encode(block_to_cbor(block, true));
}

Block decode_block(ByteView bytes) {
    return [](const cbor::Value& v) {
        Block block;
        block.height = v.at("height").as_unsigned();
        block.previous_hash = to_array<32>(v.at("prev").as_bytes());
        for (const auto& t : v.at("txs").as_array())
            block.transactions.push_back(tx_from_cbor(t));
        if (const cbor::Value* c = v.find("consortium"))
            block.consortium = user_address_from_bytes(c->as_bytes());
        block.block_hash = to_array<32>(v.at("hash").as_bytes());
        return block;
    }(cbor::decode(bytes));
}

Bytes tx_auth_message(const Hash32& payload) {
    return concat({to_bytes(kTxTag), payload});
}

OwnerAuth make_owner_auth(const Hash32& payload, const crypto::KeyPair& key) {
    return OwnerAuth{key.pub, crypto::sign(tx_auth_message(payload), key.secret)};
}

ConsortiumAuth make_consortium_auth(const Hash32& payload, const crypto::KeyPair& key) {
    return ConsortiumAuth{crypto::sign(tx_auth_message(payload), key.secret)};
}

RoleAuth make_role_auth(const Hash32& payload, Role role, const std::vector<UserAddress>& ring,
                        const crypto::KeyPair& key, crypto::Rng& rng) {
    const auto it = std::find(ring.begin(), ring.end(), key.pub);
    if (it == ring.end())
        fail(Errc::BadIndex, "signer key is not a ring member");
    const std::size_t index = static_cast<std::size_t>(it - ring.begin());
    return RoleAuth{role,
                    crypto::ring_sign(tx_auth_message(payload), ring, key.secret, index, rng)};
}

// ---------------------------------------------------------------------------
// State machine
// ---------------------------------------------------------------------------

LedgerAddress Ledger::asset_address(const StorageRef& storage, const ByteArray<16>& salt) {
    const Bytes seed = concat({storage.address.view(), storage.hash, salt});
    return derive_ledger_address(AddressKind::Asset, seed);
}

LedgerAddress Ledger::user_address(const UserAddress& public_key) {
    return derive_ledger_address(AddressKind::User, public_key.view());
}

Ledger::Ledger(const UserAddress& consortium_key) : consortium_(consortium_key) {
    Block genesis;
    genesis.height = 0;
    genesis.previous_hash = Hash32{};
    genesis.consortium = consortium_key;
    genesis.block_hash = compute_block_hash(genesis);
    chain_.push_back(std::move(genesis));
}

namespace {

// Credentials established by a transaction's authenticators.
struct AuthContext {
    std::vector<UserAddress> owner_keys; // signature-verified
    std::vector<const RoleAuth*> role_auths; // verified lazily at call time
    bool consortium_ok = false;
};

} // namespace

const AssetEntry& Ledger::query_asset(const LedgerAddress& addr) const {
    const auto it = assets_.find(addr);
    if (it == assets_.end())
        fail(Errc::NotFound, "no asset entry at " + hex_encode(addr.view()));
    return it->second;
}

const UserEntry& Ledger::query_user(const LedgerAddress& addr) const {
    const auto it = users_.find(addr);
    if (it == users_.end())
        fail(Errc::NotFound, "no user entry at " + hex_encode(addr.view()));
    return it->second;
}

std::vector<UserAddress> Ledger::role_keys(Role role) const {
    std::vector<UserAddress> keys;
    for (const auto& [addr, user] : users_)
        if (!user.revoked && user.has_role(role))
            keys.push_back(user.public_key);
    std::sort(keys.begin(), keys.end());
    return keys;
}

std::vector<std::pair<LedgerAddress, UserEntry>>
Ledger::users_named(const std::string& name) const {
    std::vector<std::pair<LedgerAddress, UserEntry>> out;
    for (const auto& [addr, user] : users_)
        if (user.name == name)
            out.emplace_back(addr, user);
    return out;
}

namespace {

struct MutableState {
    std::map<LedgerAddress, AssetEntry>& assets;
    std::map<LedgerAddress, UserEntry>& users;
    std::int64_t asset_bytes_delta = 0;
};

void require_role(const MutableState& st, const AuthContext& auth, Role role,
                  const Bytes& message) {
    // Ring freshness: the commitment must pin exactly the current
    // non-revoked key set for the role, evaluated at call time.
    std::vector<UserAddress> ring;
    for (const auto& [addr, user] : st.users)
        if (!user.revoked && user.has_role(role))
            ring.push_back(user.public_key);
    std::sort(ring.begin(), ring.end());
    for (const RoleAuth* ra : auth.role_auths) {
        if (ra->role != role)
            continue;
        if (ring.empty())
            break;
        if (ra->ring.ring_commitment != crypto::ring_commitment(ring))
            continue;
        if (crypto::ring_verify(ra->ring, message, ring))
            return;
    }
    fail(Errc::RoleAuthFailed, "no valid ring signature for required role");
}

const UserAddress& require_owner(const AssetEntry& asset, const AuthContext& auth) {
    const UserAddress& owner = asset.current_owner();
    for (const UserAddress& k : auth.owner_keys)
        if (k == owner)
            return owner;
    fail(Errc::NotOwner, "caller is not the asset's current owner");
}

void require_valid_address(const UserAddress& addr, const char* what) {
    if (!crypto::valid_user_address(addr))
        fail(Errc::InvalidKey, std::string(what) + " is not a valid group element");
}

AssetEntry make_created_entry(AssetKind kind, const StorageRef& storage,
                              const UserAddress& owner,
                              std::optional<LedgerAddress> parent) {
    AssetEntry entry;
    entry.kind = kind;
    entry.storage = storage;
    entry.owners = {owner};
    entry.parent = parent;
    return entry;
}

void insert_asset(MutableState& st, const LedgerAddress& addr, AssetEntry entry) {
    if (st.assets.contains(addr))
        fail(Errc::DuplicateAddress, "asset address already exists");
    st.asset_bytes_delta += static_cast<std::int64_t>(canonical_serialize(entry).size());
    st.assets.emplace(addr, std::move(entry));
}

CallResult apply_call(MutableState& st, const FunctionCall& call, const AuthContext& auth,
                      const Bytes& auth_message) {
    CallResult result;
    if (const auto* c = std::get_if<CreateAssetArgs>(&call)) {
        require_role(st, auth, Role::Producer, auth_message);
        require_valid_address(c->initial_owner, "initial owner");
        const LedgerAddress addr = Ledger::asset_address(c->storage, c->salt);
        insert_asset(st, addr,
                     make_created_entry(c->kind, c->storage, c->initial_owner, std::nullopt));
        result.created.push_back(addr);
    } else if (const auto* c = std::get_if<PublishComponentArgs>(&call)) {
        const auto parent_it = st.assets.find(c->parent);
        if (parent_it == st.assets.end())
            fail(Errc::ParentNotFound, "parent batch does not exist");
        if (parent_it->second.kind != AssetKind::Batch)
            fail(Errc::ParentNotBatch, "components can only be published from batches");
        require_role(st, auth, Role::Intermediary, auth_message);
        require_owner(parent_it->second, auth);
        require_valid_address(c->initial_owner, "initial owner");
        const LedgerAddress addr = Ledger::asset_address(c->storage, c->salt);
        insert_asset(st, addr,
                     make_created_entry(c->kind, c->storage, c->initial_owner, c->parent));
        result.created.push_back(addr);
    } else if (const auto* c = std::get_if<SplitBatchArgs>(&call)) {
        if (c->sub_batches.empty())
            fail(Errc::EmptySplit, "split requires at least one sub-batch");
        const auto parent_it = st.assets.find(c->parent);
        if (parent_it == st.assets.end())
            fail(Errc::ParentNotFound, "parent batch does not exist");
        if (parent_it->second.kind != AssetKind::Batch)
            fail(Errc::ParentNotBatch, "only batches can be split");
        require_role(st, auth, Role::Intermediary, auth_message);
        require_owner(parent_it->second, auth);
        // Validate all addresses before inserting any.
        std::vector<LedgerAddress> addrs;
        for (const SubBatch& sb : c->sub_batches) {
            require_valid_address(sb.initial_owner, "initial owner");
            const LedgerAddress addr = Ledger::asset_address(sb.storage, sb.salt);
            if (st.assets.contains(addr) ||
                std::find(addrs.begin(), addrs.end(), addr) != addrs.end())
                fail(Errc::DuplicateAddress, "sub-batch address already exists");
            addrs.push_back(addr);
        }
        for (std::size_t i = 0; i < c->sub_batches.size(); ++i) {
            insert_asset(st, addrs[i],
                         make_created_entry(AssetKind::Batch, c->sub_batches[i].storage,
                                            c->sub_batches[i].initial_owner, c->parent));
            result.created.push_back(addrs[i]);
        }
    } else if (const auto* c = std::get_if<LogActionArgs>(&call)) {
        const auto it = st.assets.find(c->asset);
        if (it == st.assets.end())
            fail(Errc::AssetNotFound, "no asset entry to log against");
        require_owner(it->second, auth);
        const std::int64_t before = static_cast<std::int64_t>(canonical_serialize(it->second).size());
        it->second.actions.push_back(c->action);
        st.asset_bytes_delta += static_cast<std::int64_t>(canonical_serialize(it->second).size()) - before;
    } else if (const auto* c = std::get_if<TransferOwnershipArgs>(&call)) {
        const auto it = st.assets.find(c->asset);
        if (it == st.assets.end())
            fail(Errc::AssetNotFound, "no asset entry to transfer");
        require_owner(it->second, auth);
        require_valid_address(c->recipient, "recipient");
        const std::int64_t before = static_cast<std::int64_t>(canonical_serialize(it->second).size());
        it->second.owners.push_back(c->recipient);
        st.asset_bytes_delta += static_cast<std::int64_t>(canonical_serialize(it->second).size()) - before;
    } else if (const auto* c = std::get_if<RegisterUserArgs>(&call)) {
        if (!auth.consortium_ok)
            fail(Errc::AuthFailed, "user management requires the consortium key");
        if (c->roles.empty())
            fail(Errc::DecodeError, "registered users must hold at least one role");
        require_valid_address(c->public_key, "user public key");
        const LedgerAddress addr = Ledger::user_address(c->public_key);
        if (st.users.contains(addr))
            fail(Errc::DuplicateUser, "public key already registered");
        UserEntry entry;
        entry.name = c->name;
        entry.roles = c->roles;
        std::sort(entry.roles.begin(), entry.roles.end());
        entry.roles.erase(std::unique(entry.roles.begin(), entry.roles.end()),
                          entry.roles.end());
        entry.public_key = c->public_key;
        st.users.emplace(addr, std::move(entry));
        result.created.push_back(addr);
    } else {
        const auto& revoke = std::get<RevokeUserArgs>(call);
        if (!auth.consortium_ok)
            fail(Errc::AuthFailed, "user management requires the consortium key");
        const auto it = st.users.find(revoke.user);
        if (it == st.users.end())
            fail(Errc::UserNotFound, "no user entry to revoke");
        it->second.revoked = true;
    }
    return result;
}

} // namespace

Receipt Ledger::apply_transaction(const Transaction& tx, bool append_block) {
    if (tx.calls.empty())
        fail(Errc::DecodeError, "transaction has no calls");
    if (payload_hash(tx.calls) != tx.payload_hash)
        fail(Errc::AuthFailed, "payload hash does not match calls");

    const Bytes message = tx_auth_message(tx.payload_hash);
    AuthContext auth;
    for (const Authenticator& a : tx.auth) {
        if (const auto* o = std::get_if<OwnerAuth>(&a)) {
            if (!crypto::verify(o->sig, message, o->pub))
                fail(Errc::AuthFailed, "owner signature invalid");
            auth.owner_keys.push_back(o->pub);
        } else if (const auto* r = std::get_if<RoleAuth>(&a)) {
            auth.role_auths.push_back(r);
        } else {
            const auto& c = std::get<ConsortiumAuth>(a);
            if (!crypto::verify(c.sig, message, consortium_))
                fail(Errc::AuthFailed, "consortium signature invalid");
            auth.consortium_ok = true;
        }
    }

    Receipt receipt;
    if (tx.calls.size() == 1) {
        // Single-call fast path: each apply validates fully before mutating.
        MutableState st{assets_, users_};
        receipt.results.push_back(apply_call(st, tx.calls[0], auth, message));
        metrics_.asset_bytes =
            static_cast<std::uint64_t>(static_cast<std::int64_t>(metrics_.asset_bytes) +
                                       st.asset_bytes_delta);
    } else {
        auto assets_copy = assets_;
        auto users_copy = users_;
        MutableState st{assets_copy, users_copy};
        for (const FunctionCall& call : tx.calls)
            receipt.results.push_back(apply_call(st, call, auth, message));
        assets_ = std::move(assets_copy);
        users_ = std::move(users_copy);
        metrics_.asset_bytes =
            static_cast<std::uint64_t>(static_cast<std::int64_t>(metrics_.asset_bytes) +
                                       st.asset_bytes_delta);
    }
    metrics_.transaction_count += 1;

    if (append_block) {
        Block block;
        block.height = chain_.size();
        block.previous_hash = chain_.back().block_hash;
        block.transactions = {tx};
        block.block_hash = compute_block_hash(block);
        chain_.push_back(std::move(block));
    }
    receipt.block_height = chain_.back().height;
    return receipt;
}

Receipt Ledger::submit(const Transaction& tx) {
    return apply_transaction(tx, true);
}

void Ledger::save(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::IoError, "cannot open " + path.string() + " for writing");
    for (const Block& block : chain_) {
        const Bytes bytes = encode_block(block);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    if (!out)
        fail(Errc::IoError, "write failed for " + path.string());
}

Ledger Ledger::replay(const std::vector<Block>& blocks) {
    if (blocks.empty())
        fail(Errc::ChainInvalid, "chain is empty");
    const Block& genesis = blocks[0];
    if (genesis.height != 0 || genesis.previous_hash != Hash32{} || !genesis.consortium)
        fail(Errc::ChainInvalid, "malformed genesis block");
    if (compute_block_hash(genesis) != genesis.block_hash)
        fail(Errc::ChainInvalid, "genesis hash mismatch");
    if (!genesis.transactions.empty())
        fail(Errc::ChainInvalid, "genesis block must carry no transactions");

    Ledger ledger(*genesis.consortium);
    for (std::size_t i = 1; i < blocks.size(); ++i) {
        const Block& block = blocks[i];
        std::ostringstream at;
        at << "block " << i;
        if (block.height != i)
            fail(Errc::ChainInvalid, at.str() + ": height out of order");
        if (block.previous_hash != blocks[i - 1].block_hash)
            fail(Errc::ChainInvalid, at.str() + ": previous hash link broken");
        if (compute_block_hash(block) != block.block_hash)
            fail(Errc::ChainInvalid, at.str() + ": block hash mismatch");
        if (block.consortium)
            fail(Errc::ChainInvalid, at.str() + ": consortium key outside genesis");
        if (block.transactions.empty())
            fail(Errc::ChainInvalid, at.str() + ": empty block");
        for (const Transaction& tx : block.transactions) {
            try {
                ledger.apply_transaction(tx, false);
            } catch (const Error& e) {
                fail(Errc::ChainInvalid, at.str() + ": transaction rejected on replay (" +
                                             std::string(e.what()) + ")");
            }
        }
        Block copy = block;
        ledger.chain_.push_back(std::move(copy));
    }
    return ledger;
}

Ledger Ledger::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::IoError, "cannot open " + path.string());
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    std::vector<Block> blocks;
    std::size_t offset = 0;
    while (offset < bytes.size()) {
        const std::size_t start = offset;
        cbor::decode_prefix(bytes, offset); // find the item boundary
        blocks.push_back(decode_block(ByteView(bytes).subspan(start, offset - start)));
    }
    return replay(blocks);
}

bool validate_chain(const Ledger& ledger, std::string* diagnostic) {
    try {
        Ledger replayed = Ledger::replay(ledger.chain());
        const auto mismatch = [&](const std::string& what) {
            if (diagnostic)
                *diagnostic = what;
            return false;
        };
        if (replayed.assets().size() != ledger.assets().size())
            return mismatch("replayed asset map size differs");
        for (const auto& [addr, entry] : ledger.assets()) {
            const auto it = replayed.assets().find(addr);
            if (it == replayed.assets().end() ||
                canonical_serialize(it->second) != canonical_serialize(entry))
                return mismatch("asset entry diverges at " + hex_encode(addr.view()));
        }
        if (replayed.users().size() != ledger.users().size())
            return mismatch("replayed user map size differs");
        for (const auto& [addr, entry] : ledger.users()) {
            const auto it = replayed.users().find(addr);
            if (it == replayed.users().end() ||
                canonical_serialize(it->second) != canonical_serialize(entry))
                return mismatch("user entry diverges at " + hex_encode(addr.view()));
        }
        if (!(replayed.metrics() == ledger.metrics()))
            return mismatch("metrics diverge from replay");
        return true;
    } catch (const Error& e) {
        if (diagnostic)
            *diagnostic = e.what();
        return false;
    }
}

} // namespace spoq::ledger
