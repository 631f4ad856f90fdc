// spoq: command-line operator surface for the supply-chain tracing platform.
// One binary exposing every role's workflow against a local ledger file,
// storage backends, and the client keystore.

#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <optional>

#include "spoq/efficiency.hpp"
#include "spoq/http_store.hpp"
#include "spoq/keystore.hpp"
#include "spoq/ledger.hpp"
#include "spoq/storage.hpp"
#include "spoq/verify.hpp"

using namespace spoq;

namespace {

enum class Format { Text, JsonText, Cbor };

struct GlobalOptions {
    std::string ledger_path;
    std::string keystore_path;
    std::string identity_path;
    std::string cas_path;
    std::string server_url;
    Format format = Format::Text;
};

Bytes read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        fail(Errc::IoError, "cannot read " + path);
    return Bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, ByteView bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        fail(Errc::IoError, "cannot write " + path);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

// identity / key files: canonical CBOR {pub, secret?}
void write_identity(const std::string& path, const crypto::KeyPair& kp) {
    write_file(path, cbor::encode(cbor::MapBuilder{}
                                      .put("pub", cbor::Value::bytes(kp.pub.view()))
                                      .put("secret", cbor::Value::bytes(ByteView(kp.secret.bytes)))
                                      .build()));
    write_file(path + ".pub",
               cbor::encode(
                   cbor::MapBuilder{}.put("pub", cbor::Value::bytes(kp.pub.view())).build()));
}

crypto::KeyPair load_identity(const std::string& path) {
    if (path.empty())
        fail(Errc::IoError, "no identity configured (--identity or SPOQ_IDENTITY)");
    const cbor::Value v = cbor::decode(read_file(path));
    const cbor::Value* secret = v.find("secret");
    if (!secret)
        fail(Errc::InvalidKey, path + " holds no secret key");
    return crypto::keypair_from_secret(crypto::Scalar{to_array<32>(secret->as_bytes())});
}

UserAddress load_public_key(const std::string& path) {
    const cbor::Value v = cbor::decode(read_file(path));
    return user_address_from_bytes(v.at("pub").as_bytes());
}

verify::MockPufDevice load_device(const std::string& path) {
    const cbor::Value v = cbor::decode(read_file(path));
    return verify::MockPufDevice::from_secret(
        crypto::Scalar{to_array<32>(v.at("secret").as_bytes())});
}

void write_device(const std::string& path, const verify::MockPufDevice& device) {
    write_file(path,
               cbor::encode(cbor::MapBuilder{}
                                .put("secret", cbor::Value::bytes(ByteView(device.secret().bytes)))
                                .build()));
}


// Secrets are read from files, never from argv: a key argument names a
// file holding either 64 hex characters or the raw 32 bytes.
ByteArray<32> read_key_file(const std::string& path) {
    const Bytes raw = read_file(path);
    if (raw.size() == 32)
        return to_array<32>(raw);
    std::string text(raw.begin(), raw.end());
    text.erase(text.find_last_not_of(" \n\r\t") + 1);
    const Bytes decoded = hex_decode(text);
    if (decoded.size() != 32)
        fail(Errc::DecodeError, path + " does not hold a 32-byte key");
    return to_array<32>(decoded);
}

LedgerAddress parse_ledger_address(const std::string& hex) {
    return ledger_address_from_bytes(hex_decode(hex));
}

StorageRef parse_ref(const std::string& spec) {
    const auto colon = spec.find(':');
    if (colon == std::string::npos)
        fail(Errc::DecodeError, "expected ADDRESS:HASH, got '" + spec + "'");
    StorageRef ref;
    ref.address = storage_address_from_bytes(hex_decode(spec.substr(0, colon)));
    ref.hash = to_array<32>(hex_decode(spec.substr(colon + 1)));
    return ref;
}

std::string format_ref(const StorageRef& ref) {
    return hex_encode(ref.address.view()) + ":" + hex_encode(ref.hash);
}

// Simple key/value result, rendered per --format.
struct Output {
    std::vector<std::pair<std::string, std::string>> fields;
    std::optional<cbor::Value> cbor_value; // richer payload when available
    std::string text_override;

    void put(std::string key, std::string value) {
        fields.emplace_back(std::move(key), std::move(value));
    }
};

void emit(const GlobalOptions& opts, const Output& out) {
    switch (opts.format) {
    case Format::Text:
        if (!out.text_override.empty()) {
            std::cout << out.text_override;
            if (out.text_override.back() != '\n')
                std::cout << '\n';
            return;
        }
        for (const auto& [k, v] : out.fields)
            std::cout << k << ": " << v << "\n";
        return;
    case Format::JsonText: {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : out.fields)
            j[k] = v;
        std::cout << j.dump() << "\n";
        return;
    }
    case Format::Cbor: {
        cbor::Value v = [&] {
            if (out.cbor_value)
                return *out.cbor_value;
            cbor::MapBuilder b;
            for (const auto& [k, val] : out.fields)
                b.put(k, cbor::Value::text(val));
            return b.build();
        }();
        const Bytes bytes = cbor::encode(v);
        std::cout.write(reinterpret_cast<const char*>(bytes.data()),
                        static_cast<std::streamsize>(bytes.size()));
        return;
    }
    }
}

ledger::Ledger open_ledger(const GlobalOptions& opts) {
    if (opts.ledger_path.empty())
        fail(Errc::IoError, "no ledger configured (--ledger or SPOQ_LEDGER)");
    return ledger::Ledger::load(opts.ledger_path);
}

std::string cas_path(const GlobalOptions& opts) {
    if (!opts.cas_path.empty())
        return opts.cas_path;
    if (opts.ledger_path.empty())
        fail(Errc::IoError, "no content store configured (--cas or SPOQ_CAS)");
    return opts.ledger_path + ".cas";
}

ledger::Receipt submit_and_save(const GlobalOptions& opts, ledger::Ledger& ledger,
                                const ledger::Transaction& tx) {
    const ledger::Receipt receipt = ledger.submit(tx);
    ledger.save(opts.ledger_path);
    return receipt;
}

struct EntrySpec {
    std::string kind; // product | batch | action
    std::string name;
    std::string author;
    std::string data;
    std::string barcode;
    std::string enroll_device_out;
    std::string device_file;
    std::vector<std::string> components;
    std::string action_asset;
    bool no_sign = false;
};

void add_entry_flags(CLI::App* cmd, EntrySpec& spec, bool with_kind) {
    if (with_kind)
        cmd->add_option("--kind", spec.kind, "entry kind: product|batch|action")->required();
    cmd->add_option("--name", spec.name, "asset name")->required();
    cmd->add_option("--author", spec.author, "author (business) name")->required();
    cmd->add_option("--data", spec.data, "free-form data field");
    cmd->add_option("--barcode", spec.barcode, "barcode fingerprint payload (products)");
    cmd->add_option("--enroll-device", spec.enroll_device_out,
                    "enroll a new mock PUF device and write it to this file (products)");
    cmd->add_option("--device", spec.device_file, "existing mock PUF device to enroll (products)");
    cmd->add_option("--component", spec.components,
                    "component reference ADDRESS:HASH (repeatable; batches)");
    cmd->add_option("--asset", spec.action_asset, "bound asset ledger address (actions)");
    cmd->add_flag("--no-sign", spec.no_sign, "leave the entry unsigned");
}

StorageEntry build_entry(const GlobalOptions& opts, const EntrySpec& spec, crypto::Rng& rng) {
    StorageEntry entry;
    entry.name = spec.name;
    entry.author_name = spec.author;
    entry.data = to_bytes(spec.data);
    rng.fill(entry.nonce.data(), entry.nonce.size());
    if (spec.kind == "product") {
        Fingerprint fp;
        if (!spec.enroll_device_out.empty()) {
            const verify::MockPufDevice device = verify::MockPufDevice::create(rng);
            write_device(spec.enroll_device_out, device);
            fp = verify::fingerprint_enroll(device);
        } else if (!spec.device_file.empty()) {
            fp = verify::fingerprint_enroll(load_device(spec.device_file));
        } else if (!spec.barcode.empty()) {
            fp = verify::barcode_fingerprint(to_bytes(spec.barcode));
        } else {
            fail(Errc::DecodeError,
                 "products need a fingerprint: --barcode, --device, or --enroll-device");
        }
        ProductBody body;
        body.fingerprint = fp;
        entry.body = std::move(body);
    } else if (spec.kind == "batch") {
        BatchBody body;
        for (const std::string& c : spec.components)
            body.components.push_back(parse_ref(c));
        if (body.components.empty())
            fail(Errc::DecodeError, "batches need at least one --component");
        entry.body = std::move(body);
    } else if (spec.kind == "action") {
        if (spec.action_asset.empty())
            fail(Errc::DecodeError, "actions need --asset");
        entry.body = ActionBody{parse_ledger_address(spec.action_asset)};
    } else {
        fail(Errc::DecodeError, "unknown entry kind '" + spec.kind + "'");
    }
    if (!spec.no_sign) {
        const crypto::KeyPair identity = load_identity(opts.identity_path);
        sign_storage_entry(entry, identity.secret);
    }
    return entry;
}

struct StoreSpec {
    std::string store = "cas"; // cas | server
    std::string policy = "public"; // public | key[:KEYFILE] | owner:ASSET
};

void add_store_flags(CLI::App* cmd, StoreSpec& spec) {
    cmd->add_option("--store", spec.store, "backend: cas|server (default cas)");
    cmd->add_option("--policy", spec.policy,
                    "server access policy: public | key[:KEYFILE] | owner:ASSET (default public)");
}

// Stores entry bytes on the selected backend; returns the ref plus the
// access key when a fresh one was minted.
std::pair<StorageRef, std::optional<crypto::AccessKey>>
store_entry(const GlobalOptions& opts, const StoreSpec& where, ByteView bytes,
            crypto::Rng& rng) {
    StorageRef ref;
    ref.hash = entry_hash(bytes);
    if (where.store == "cas") {
        storage::ContentStore store{std::filesystem::path(cas_path(opts))};
        ref.address = store.put(bytes);
        return {ref, std::nullopt};
    }
    if (where.store != "server")
        fail(Errc::UnknownBackend, "unknown --store '" + where.store + "'");
    if (opts.server_url.empty())
        fail(Errc::IoError, "no --server-url configured");

    storage::AccessPolicy policy;
    std::optional<crypto::AccessKey> fresh;
    if (where.policy == "public") {
        policy = storage::AccessPolicy::public_read();
    } else if (where.policy == "key") {
        crypto::AccessKey key;
        rng.fill(key.bytes.data(), key.bytes.size());
        fresh = key;
        policy = storage::AccessPolicy::key_protected(key);
    } else if (where.policy.rfind("key:", 0) == 0) {
        policy = storage::AccessPolicy::key_protected(
            crypto::AccessKey{read_key_file(where.policy.substr(4))});
    } else if (where.policy.rfind("owner:", 0) == 0) {
        policy = storage::AccessPolicy::ownership_protected(
            parse_ledger_address(where.policy.substr(6)));
    } else {
        fail(Errc::PolicyInvalid, "unknown --policy '" + where.policy + "'");
    }

    const crypto::KeyPair identity = load_identity(opts.identity_path);
    storage::HttpStorageClient client(opts.server_url);
    ref.address =
        client.put_entry(bytes, policy, identity.pub, storage::make_write_proof(bytes, identity));
    return {ref, fresh};
}

ByteArray<16> fresh_salt(crypto::Rng& rng) {
    ByteArray<16> salt;
    rng.fill(salt.data(), salt.size());
    return salt;
}

storage::ReadRouter::Credentials gather_credentials(const GlobalOptions& opts,
                                                    const std::optional<LedgerAddress>& asset,
                                                    const std::vector<std::string>& extra_keys) {
    storage::ReadRouter::Credentials creds;
    for (const std::string& k : extra_keys)
        creds.access_keys.push_back(crypto::AccessKey{read_key_file(k)});
    if (!opts.identity_path.empty() && std::filesystem::exists(opts.identity_path)) {
        try {
            creds.identity = load_identity(opts.identity_path);
        } catch (const Error&) {
        }
    }
    if (!opts.keystore_path.empty() && std::filesystem::exists(opts.keystore_path) && asset) {
        storage::Keystore keystore{std::filesystem::path(opts.keystore_path)};
        if (const auto record = keystore.find(*asset)) {
            for (const auto& k : record->access_keys)
                creds.access_keys.push_back(k);
            for (const auto& k : record->encryption_keys)
                creds.encryption_keys.push_back(k);
        }
    }
    return creds;
}

std::optional<std::string> resolve_server_url(const GlobalOptions& opts,
                                              const std::optional<LedgerAddress>& asset) {
    if (!opts.server_url.empty())
        return opts.server_url;
    // Domain-hidden mode: the locator comes from the keystore record.
    if (!opts.keystore_path.empty() && std::filesystem::exists(opts.keystore_path) && asset) {
        storage::Keystore keystore{std::filesystem::path(opts.keystore_path)};
        if (const auto record = keystore.find(*asset))
            return record->domain_hint;
    }
    return std::nullopt;
}

nlohmann::json report_to_json(const verify::VerificationReport& report) {
    nlohmann::json j;
    j["hash"] = std::string(verify::check_name(report.hash_ok));
    j["signature"] = std::string(verify::check_name(report.signature_ok));
    j["role"] = std::string(verify::check_name(report.role_ok));
    j["origin"] = std::string(verify::check_name(report.origin_ok));
    j["fingerprint"] = std::string(verify::check_name(report.fingerprint_ok));
    j["verdict"] = report.pass() ? "PASS" : "FAIL";
    j["trail"] = nlohmann::json::array();
    for (const auto& node : report.origin_trail) {
        nlohmann::json n;
        n["storage"] = hex_encode(node.ref.address.view());
        n["hash"] = hex_encode(node.ref.hash);
        if (node.ledger)
            n["ledger"] = hex_encode(node.ledger->view());
        j["trail"].push_back(n);
    }
    j["diagnostics"] = report.diagnostics;
    return j;
}

eff::LifecycleScenario parse_scenario_file(const std::string& path) {
    const Bytes bytes = read_file(path);
    eff::LifecycleScenario s;
    auto assign = [&s](const std::string& key, std::uint64_t value) {
        if (key == "p") s.p = value;
        else if (key == "b1") s.b1 = value;
        else if (key == "b2") s.b2 = value;
        else if (key == "a1") s.a1 = value;
        else if (key == "o1") s.o1 = value;
        else if (key == "a2") s.a2 = value;
        else if (key == "o2") s.o2 = value;
        else fail(Errc::DecodeError, "unknown scenario key '" + key + "'");
    };
    // canonical CBOR map, or plain-text key=value lines
    try {
        const cbor::Value v = cbor::decode(bytes);
        for (const auto& [key, value] : v.map_entries())
            assign(key, value.as_unsigned());
        return s;
    } catch (const Error&) {
    }
    std::istringstream in(std::string(bytes.begin(), bytes.end()));
    std::string line;
    while (std::getline(in, line)) {
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos)
            line.erase(hash_pos);
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            continue;
        auto trim = [](std::string t) {
            t.erase(0, t.find_first_not_of(" \t\r"));
            const auto end = t.find_last_not_of(" \t\r");
            t.erase(end == std::string::npos ? 0 : end + 1);
            return t;
        };
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty())
            continue;
        assign(key, std::stoull(value));
    }
    return s;
}

void write_or_print(const std::string& out_path, const std::string& content) {
    if (out_path.empty()) {
        std::cout << content;
        return;
    }
    write_file(out_path, to_bytes(content));
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"SPOQchain supply-chain tracing platform"};
    app.require_subcommand(1);

    GlobalOptions opts;
    std::string format_name = "text";
    app.add_option("-L,--ledger", opts.ledger_path, "ledger chain file")->envname("SPOQ_LEDGER");
    app.add_option("-K,--keystore", opts.keystore_path, "keystore file")
        ->envname("SPOQ_KEYSTORE");
    app.add_option("-I,--identity", opts.identity_path, "identity key file")
        ->envname("SPOQ_IDENTITY");
    app.add_option("--cas", opts.cas_path, "content store file (default <ledger>.cas)")
        ->envname("SPOQ_CAS");
    app.add_option("--server-url", opts.server_url, "storage server locator");
    app.add_option("--format", format_name, "output format: text|json-text|cbor");

    crypto::SystemRng rng;
    int exit_code = 0;
    std::vector<std::function<void()>> actions;
    auto on = [&actions](CLI::App* cmd, std::function<void()> fn) {
        cmd->callback([&actions, fn = std::move(fn)] { actions.push_back(fn); });
    };

    // ---- keygen ----
    auto* keygen_cmd = app.add_subcommand("keygen", "generate an identity key pair");
    std::string keygen_out;
    keygen_cmd->add_option("--out", keygen_out, "identity file to write")->required();
    on(keygen_cmd, [&] {
        const crypto::KeyPair kp = crypto::keygen(rng);
        write_identity(keygen_out, kp);
        Output out;
        out.put("address", hex_encode(kp.pub.view()));
        out.put("file", keygen_out);
        emit(opts, out);
    });

    // ---- init ----
    auto* init_cmd = app.add_subcommand("init", "create a fresh ledger with a genesis block");
    std::string init_consortium;
    init_cmd->add_option("--consortium", init_consortium,
                         "consortium key file (defaults to --identity)");
    on(init_cmd, [&] {
        if (opts.ledger_path.empty())
            fail(Errc::IoError, "no ledger configured (--ledger or SPOQ_LEDGER)");
        if (std::filesystem::exists(opts.ledger_path))
            fail(Errc::IoError, opts.ledger_path + " already exists");
        const UserAddress consortium = init_consortium.empty()
                                           ? load_identity(opts.identity_path).pub
                                           : load_public_key(init_consortium);
        ledger::Ledger ledger(consortium);
        ledger.save(opts.ledger_path);
        Output out;
        out.put("ledger", opts.ledger_path);
        out.put("consortium", hex_encode(consortium.view()));
        emit(opts, out);
    });

    // ---- consortium ----
    auto* consortium_cmd = app.add_subcommand("consortium", "user registry management");
    consortium_cmd->require_subcommand(1);
    {
        auto* reg = consortium_cmd->add_subcommand("register", "register a producer/intermediary");
        auto name = std::make_shared<std::string>();
        auto roles = std::make_shared<std::vector<std::string>>();
        auto key_file = std::make_shared<std::string>();
        reg->add_option("--name", *name, "business name")->required();
        reg->add_option("--role", *roles, "producer|intermediary (repeatable)")->required();
        reg->add_option("--key", *key_file, "public key file of the new user")->required();
        on(reg, [&, name, roles, key_file] {
            std::vector<Role> parsed;
            for (const std::string& r : *roles) {
                if (r == "producer")
                    parsed.push_back(Role::Producer);
                else if (r == "intermediary")
                    parsed.push_back(Role::Intermediary);
                else
                    fail(Errc::DecodeError, "unknown role '" + r + "'");
            }
            ledger::Ledger ledger = open_ledger(opts);
            const crypto::KeyPair consortium = load_identity(opts.identity_path);
            ledger::Transaction tx;
            tx.calls = {ledger::RegisterUserArgs{*name, parsed, load_public_key(*key_file)}};
            tx.payload_hash = ledger::payload_hash(tx.calls);
            tx.auth = {ledger::make_consortium_auth(tx.payload_hash, consortium)};
            const auto receipt = submit_and_save(opts, ledger, tx);
            Output out;
            out.put("user", hex_encode(receipt.results.at(0).created.at(0).view()));
            emit(opts, out);
        });

        auto* revoke = consortium_cmd->add_subcommand("revoke", "revoke a user entry");
        auto user = std::make_shared<std::string>();
        revoke->add_option("--user", *user, "user ledger address")->required();
        on(revoke, [&, user] {
            ledger::Ledger ledger = open_ledger(opts);
            const crypto::KeyPair consortium = load_identity(opts.identity_path);
            ledger::Transaction tx;
            tx.calls = {ledger::RevokeUserArgs{parse_ledger_address(*user)}};
            tx.payload_hash = ledger::payload_hash(tx.calls);
            tx.auth = {ledger::make_consortium_auth(tx.payload_hash, consortium)};
            submit_and_save(opts, ledger, tx);
            Output out;
            out.put("revoked", *user);
            emit(opts, out);
        });
    }

    // ---- producer ----
    auto* producer_cmd = app.add_subcommand("producer", "asset publication");
    producer_cmd->require_subcommand(1);
    auto add_publish = [&](const std::string& name, const std::string& kind) {
        auto* cmd = producer_cmd->add_subcommand(name, "publish a new " + kind);
        auto entry_spec = std::make_shared<EntrySpec>();
        auto store_spec = std::make_shared<StoreSpec>();
        auto owner = std::make_shared<std::string>();
        entry_spec->kind = kind;
        add_entry_flags(cmd, *entry_spec, false);
        add_store_flags(cmd, *store_spec);
        cmd->add_option("--owner", *owner, "initial owner address hex (default: self)");
        on(cmd, [&, entry_spec, store_spec, owner, kind] {
            ledger::Ledger ledger = open_ledger(opts);
            const crypto::KeyPair identity = load_identity(opts.identity_path);
            const StorageEntry entry = build_entry(opts, *entry_spec, rng);
            const Bytes bytes = canonical_serialize(entry);
            const auto [ref, fresh_key] = store_entry(opts, *store_spec, bytes, rng);

            ledger::CreateAssetArgs args;
            args.kind = kind == "product" ? AssetKind::Product : AssetKind::Batch;
            args.storage = ref;
            args.initial_owner =
                owner->empty() ? identity.pub : user_address_from_bytes(hex_decode(*owner));
            args.salt = fresh_salt(rng);
            ledger::Transaction tx;
            tx.calls = {args};
            tx.payload_hash = ledger::payload_hash(tx.calls);
            tx.auth = {ledger::make_role_auth(tx.payload_hash, Role::Producer,
                                              ledger.role_keys(Role::Producer), identity, rng)};
            const auto receipt = submit_and_save(opts, ledger, tx);
            Output out;
            out.put("asset", hex_encode(receipt.results.at(0).created.at(0).view()));
            out.put("ref", format_ref(ref));
            if (fresh_key)
                out.put("access_key", hex_encode(fresh_key->bytes));
            emit(opts, out);
        });
    };
    add_publish("publish-product", "product");
    add_publish("publish-batch", "batch");

    // ---- intermediary ----
    auto* intermediary_cmd = app.add_subcommand("intermediary", "batch splitting and publication");
    intermediary_cmd->require_subcommand(1);
    {
        auto* split = intermediary_cmd->add_subcommand(
            "split", "split an owned batch into a new sub-batch");
        auto entry_spec = std::make_shared<EntrySpec>();
        auto store_spec = std::make_shared<StoreSpec>();
        auto parent = std::make_shared<std::string>();
        auto owner = std::make_shared<std::string>();
        entry_spec->kind = "batch";
        add_entry_flags(split, *entry_spec, false);
        add_store_flags(split, *store_spec);
        split->add_option("--parent", *parent, "parent batch ledger address")->required();
        split->add_option("--owner", *owner, "initial owner address hex (default: self)");
        on(split, [&, entry_spec, store_spec, parent, owner] {
            ledger::Ledger ledger = open_ledger(opts);
            const crypto::KeyPair identity = load_identity(opts.identity_path);
            const StorageEntry entry = build_entry(opts, *entry_spec, rng);
            const Bytes bytes = canonical_serialize(entry);
            const auto [ref, fresh_key] = store_entry(opts, *store_spec, bytes, rng);

            ledger::SplitBatchArgs args;
            args.parent = parse_ledger_address(*parent);
            args.sub_batches = {ledger::SubBatch{
                ref, owner->empty() ? identity.pub : user_address_from_bytes(hex_decode(*owner)),
                fresh_salt(rng)}};
            ledger::Transaction tx;
            tx.calls = {args};
            tx.payload_hash = ledger::payload_hash(tx.calls);
            tx.auth = {ledger::make_role_auth(tx.payload_hash, Role::Intermediary,
                                              ledger.role_keys(Role::Intermediary), identity, rng),
                       ledger::make_owner_auth(tx.payload_hash, identity)};
            const auto receipt = submit_and_save(opts, ledger, tx);
            Output out;
            out.put("asset", hex_encode(receipt.results.at(0).created.at(0).view()));
            out.put("ref", format_ref(ref));
            if (fresh_key)
                out.put("access_key", hex_encode(fresh_key->bytes));
            emit(opts, out);
        });

        auto* publish = intermediary_cmd->add_subcommand(
            "publish-component", "publish an existing batch component on the ledger");
        auto parent2 = std::make_shared<std::string>();
        auto ref_spec = std::make_shared<std::string>();
        auto kind = std::make_shared<std::string>("product");
        auto owner2 = std::make_shared<std::string>();
        publish->add_option("--parent", *parent2, "parent batch ledger address")->required();
        publish->add_option("--ref", *ref_spec, "component storage reference ADDRESS:HASH")
            ->required();
        publish->add_option("--kind", *kind, "product|batch (default product)");
        publish->add_option("--owner", *owner2, "initial owner address hex (default: self)");
        on(publish, [&, parent2, ref_spec, kind, owner2] {
            ledger::Ledger ledger = open_ledger(opts);
            const crypto::KeyPair identity = load_identity(opts.identity_path);
            ledger::PublishComponentArgs args;
            args.parent = parse_ledger_address(*parent2);
            args.kind = *kind == "batch" ? AssetKind::Batch : AssetKind::Product;
            args.storage = parse_ref(*ref_spec);
            args.initial_owner =
                owner2->empty() ? identity.pub : user_address_from_bytes(hex_decode(*owner2));
            args.salt = fresh_salt(rng);
            ledger::Transaction tx;
            tx.calls = {args};
            tx.payload_hash = ledger::payload_hash(tx.calls);
            tx.auth = {ledger::make_role_auth(tx.payload_hash, Role::Intermediary,
                                              ledger.role_keys(Role::Intermediary), identity, rng),
                       ledger::make_owner_auth(tx.payload_hash, identity)};
            const auto receipt = submit_and_save(opts, ledger, tx);
            Output out;
            out.put("asset", hex_encode(receipt.results.at(0).created.at(0).view()));
            emit(opts, out);
        });
    }

    // ---- owner ----
    auto* owner_cmd = app.add_subcommand("owner", "ownership transfer and action logging");
    owner_cmd->require_subcommand(1);
    {
        auto* transfer = owner_cmd->add_subcommand("transfer", "transfer an owned asset");
        auto asset = std::make_shared<std::string>();
        auto recipient = std::make_shared<std::string>();
        transfer->add_option("--asset", *asset, "asset ledger address")->required();
        transfer
            ->add_option("--recipient", *recipient,
                         "recipient: key file path or 33-byte address hex")
            ->required();
        on(transfer, [&, asset, recipient] {
            ledger::Ledger ledger = open_ledger(opts);
            const crypto::KeyPair identity = load_identity(opts.identity_path);
            const UserAddress to = std::filesystem::exists(*recipient)
                                       ? load_public_key(*recipient)
                                       : user_address_from_bytes(hex_decode(*recipient));
            ledger::TransferOwnershipArgs args{parse_ledger_address(*asset), to};
            ledger::Transaction tx;
            tx.calls = {args};
            tx.payload_hash = ledger::payload_hash(tx.calls);
            tx.auth = {ledger::make_owner_auth(tx.payload_hash, identity)};
            submit_and_save(opts, ledger, tx);
            Output out;
            out.put("asset", *asset);
            out.put("new_owner", hex_encode(to.view()));
            emit(opts, out);
        });

        auto* log = owner_cmd->add_subcommand("log-action", "log an action on an owned asset");
        auto entry_spec = std::make_shared<EntrySpec>();
        auto store_spec = std::make_shared<StoreSpec>();
        entry_spec->kind = "action";
        add_entry_flags(log, *entry_spec, false);
        add_store_flags(log, *store_spec);
        on(log, [&, entry_spec, store_spec] {
            ledger::Ledger ledger = open_ledger(opts);
            const crypto::KeyPair identity = load_identity(opts.identity_path);
            if (entry_spec->action_asset.empty())
                fail(Errc::DecodeError, "log-action needs --asset");
            const StorageEntry entry = build_entry(opts, *entry_spec, rng);
            const Bytes bytes = canonical_serialize(entry);
            const auto [ref, fresh_key] = store_entry(opts, *store_spec, bytes, rng);

            ledger::LogActionArgs args{parse_ledger_address(entry_spec->action_asset), ref};
            ledger::Transaction tx;
            tx.calls = {args};
            tx.payload_hash = ledger::payload_hash(tx.calls);
            tx.auth = {ledger::make_owner_auth(tx.payload_hash, identity)};
            submit_and_save(opts, ledger, tx);
            Output out;
            out.put("asset", entry_spec->action_asset);
            out.put("action_ref", format_ref(ref));
            if (fresh_key)
                out.put("access_key", hex_encode(fresh_key->bytes));
            emit(opts, out);
        });
    }

    // ---- user ----
    auto* user_cmd = app.add_subcommand("user", "queries and verification");
    user_cmd->require_subcommand(1);
    {
        auto* show = user_cmd->add_subcommand("show", "print the entry at a ledger address");
        auto addr = std::make_shared<std::string>();
        show->add_option("address", *addr, "ledger address hex")->required();
        on(show, [&, addr] {
            ledger::Ledger ledger = open_ledger(opts);
            const LedgerAddress a = parse_ledger_address(*addr);
            Output out;
            try {
                const AssetEntry& asset = ledger.query_asset(a);
                out.put("type", asset.kind == AssetKind::Product ? "product" : "batch");
                out.put("storage", format_ref(asset.storage));
                out.put("owners", std::to_string(asset.owners.size()));
                out.put("current_owner", hex_encode(asset.current_owner().view()));
                out.put("actions", std::to_string(asset.actions.size()));
                if (asset.parent)
                    out.put("parent", hex_encode(asset.parent->view()));
                out.cbor_value = cbor::decode(canonical_serialize(asset));
            } catch (const Error&) {
                const UserEntry& user = ledger.query_user(a); // throws NotFound
                out.put("type", "user");
                out.put("name", user.name);
                std::string roles;
                for (Role r : user.roles)
                    roles += (roles.empty() ? "" : ",") +
                             std::string(r == Role::Producer ? "producer" : "intermediary");
                out.put("roles", roles);
                out.put("pub", hex_encode(user.public_key.view()));
                out.put("revoked", user.revoked ? "true" : "false");
                out.cbor_value = cbor::decode(canonical_serialize(user));
            }
            emit(opts, out);
        });

        auto* verify_sub = user_cmd->add_subcommand("verify", "run the verification pipeline");
        auto addr2 = std::make_shared<std::string>();
        auto device_file = std::make_shared<std::string>();
        auto barcode = std::make_shared<std::string>();
        auto keys = std::make_shared<std::vector<std::string>>();
        verify_sub->add_option("address", *addr2, "asset ledger address hex")->required();
        verify_sub->add_option("--device", *device_file, "mock PUF device file");
        verify_sub->add_option("--barcode", *barcode, "scanned barcode payload");
        verify_sub->add_option("--access-key", *keys, "extra access key file (repeatable)");
        on(verify_sub, [&, addr2, device_file, barcode, keys] {
            ledger::Ledger ledger = open_ledger(opts);
            const LedgerAddress a = parse_ledger_address(*addr2);

            storage::ContentStore local{std::filesystem::path(cas_path(opts))};
            storage::ReadRouter router(&local, resolve_server_url(opts, a),
                                       gather_credentials(opts, a, *keys), rng);

            std::unique_ptr<verify::DeviceInterface> device;
            if (!device_file->empty()) {
                device = std::make_unique<verify::MockPufDevice>(load_device(*device_file));
            } else if (!barcode->empty()) {
                device = std::make_unique<verify::BarcodeDevice>(to_bytes(*barcode));
            } else if (!opts.keystore_path.empty() &&
                       std::filesystem::exists(opts.keystore_path)) {
                storage::Keystore keystore{std::filesystem::path(opts.keystore_path)};
                if (const auto record = keystore.find(a))
                    if (record->fingerprint_secret)
                        device = std::make_unique<verify::MockPufDevice>(
                            verify::MockPufDevice::from_secret(*record->fingerprint_secret));
            }

            const verify::VerificationReport report =
                verify::verify_asset(a, ledger, router, device.get(), &rng);
            if (opts.format == Format::JsonText) {
                std::cout << report_to_json(report).dump() << "\n";
            } else if (opts.format == Format::Cbor) {
                const Bytes bytes = cbor::encode(report.to_cbor());
                std::cout.write(reinterpret_cast<const char*>(bytes.data()),
                                static_cast<std::streamsize>(bytes.size()));
            } else {
                std::cout << report.to_text();
            }
            if (!report.pass())
                exit_code = 1;
        });
    }

    // ---- storage ----
    auto* storage_cmd = app.add_subcommand("storage", "storage backends");
    storage_cmd->require_subcommand(1);
    {
        auto* serve = storage_cmd->add_subcommand("serve", "run the access-controlled server");
        auto port = std::make_shared<int>(8574);
        auto host = std::make_shared<std::string>("127.0.0.1");
        auto mode = std::make_shared<std::string>("allowlist");
        auto allow = std::make_shared<std::vector<std::string>>();
        auto ttl_seconds = std::make_shared<unsigned>(60);
        serve->add_option("--port", *port, "listen port (default 8574)");
        serve->add_option("--host", *host, "bind host (default 127.0.0.1)");
        serve->add_option("--mode", *mode, "allowlist|public-action");
        serve->add_option("--allow", *allow, "allowlisted writer key file (repeatable)");
        serve->add_option("--nonce-ttl", *ttl_seconds, "nonce ttl in seconds (default 60)");
        on(serve, [&, port, host, mode, allow, ttl_seconds] {
            auto ledger = std::make_shared<ledger::Ledger>(open_ledger(opts));
            storage::ServerConfig config;
            config.nonce_ttl = std::chrono::seconds(*ttl_seconds);
            if (*mode == "public-action")
                config.write_mode = storage::WriteMode::PublicActionStore;
            else if (*mode != "allowlist")
                fail(Errc::DecodeError, "unknown --mode '" + *mode + "'");
            for (const std::string& file : *allow)
                config.allowlist.insert(load_public_key(file));
            storage::StorageServer core(
                std::move(config),
                [ledger](const LedgerAddress& a) -> std::optional<AssetEntry> {
                    try {
                        return ledger->query_asset(a);
                    } catch (const Error&) {
                        return std::nullopt;
                    }
                });
            storage::HttpStorageServer server(core);
            std::cerr << "serving on http://" << *host << ":" << *port << "\n";
            server.run(*host, *port);
        });

        auto* put = storage_cmd->add_subcommand("put", "build and store a storage entry");
        auto entry_spec = std::make_shared<EntrySpec>();
        auto store_spec = std::make_shared<StoreSpec>();
        auto encrypt = std::make_shared<bool>(false);
        add_entry_flags(put, *entry_spec, true);
        add_store_flags(put, *store_spec);
        put->add_flag("--encrypt", *encrypt,
                      "encrypt before storing on the content store (prints the key)");
        on(put, [&, entry_spec, store_spec, encrypt] {
            const StorageEntry entry = build_entry(opts, *entry_spec, rng);
            Bytes bytes = canonical_serialize(entry);
            Output out;
            if (*encrypt) {
                crypto::AccessKey key;
                rng.fill(key.bytes.data(), key.bytes.size());
                bytes = crypto::aead_encrypt(bytes, key, {}, rng);
                out.put("encryption_key", hex_encode(key.bytes));
            }
            const auto [ref, fresh_key] = store_entry(opts, *store_spec, bytes, rng);
            out.put("ref", format_ref(ref));
            out.put("address", hex_encode(ref.address.view()));
            out.put("hash", hex_encode(ref.hash));
            if (fresh_key)
                out.put("access_key", hex_encode(fresh_key->bytes));
            emit(opts, out);
        });

        auto* get = storage_cmd->add_subcommand("get", "fetch entry bytes by storage address");
        auto addr = std::make_shared<std::string>();
        auto keys = std::make_shared<std::vector<std::string>>();
        auto out_file = std::make_shared<std::string>();
        auto asset_hint = std::make_shared<std::string>();
        get->add_option("address", *addr, "storage address hex")->required();
        get->add_option("--access-key", *keys, "access/decryption key file (repeatable)");
        get->add_option("--asset", *asset_hint, "asset address for keystore lookup");
        get->add_option("--out", *out_file, "write raw bytes to a file");
        on(get, [&, addr, keys, out_file, asset_hint] {
            storage::ContentStore local{std::filesystem::path(cas_path(opts))};
            std::optional<LedgerAddress> hint;
            if (!asset_hint->empty())
                hint = parse_ledger_address(*asset_hint);
            storage::ReadRouter router(&local, resolve_server_url(opts, hint),
                                       gather_credentials(opts, hint, *keys), rng);
            const Bytes bytes = router.fetch(storage_address_from_bytes(hex_decode(*addr)));
            if (!out_file->empty()) {
                write_file(*out_file, bytes);
                Output out;
                out.put("written", *out_file);
                out.put("bytes", std::to_string(bytes.size()));
                emit(opts, out);
            } else {
                Output out;
                out.put("entry", hex_encode(bytes));
                out.cbor_value = cbor::decode(bytes);
                emit(opts, out);
            }
        });
    }

    // ---- keystore ----
    auto* keystore_cmd = app.add_subcommand("keystore", "client credential store");
    keystore_cmd->require_subcommand(1);
    {
        auto* add = keystore_cmd->add_subcommand("add", "add or update a record");
        auto asset = std::make_shared<std::string>();
        auto access_keys = std::make_shared<std::vector<std::string>>();
        auto enc_keys = std::make_shared<std::vector<std::string>>();
        auto domain = std::make_shared<std::string>();
        auto device_file = std::make_shared<std::string>();
        add->add_option("--asset", *asset, "asset ledger address")->required();
        add->add_option("--access-key", *access_keys, "access key file (repeatable)");
        add->add_option("--enc-key", *enc_keys, "encryption key file (repeatable)");
        add->add_option("--domain", *domain, "storage server locator hint");
        add->add_option("--device", *device_file, "mock PUF device file to remember");
        on(add, [&, asset, access_keys, enc_keys, domain, device_file] {
            if (opts.keystore_path.empty())
                fail(Errc::IoError, "no keystore configured (--keystore or SPOQ_KEYSTORE)");
            storage::Keystore keystore{std::filesystem::path(opts.keystore_path)};
            storage::KeystoreRecord record;
            record.asset = parse_ledger_address(*asset);
            if (const auto existing = keystore.find(record.asset))
                record = *existing;
            for (const std::string& k : *access_keys)
                record.access_keys.push_back(crypto::AccessKey{read_key_file(k)});
            for (const std::string& k : *enc_keys)
                record.encryption_keys.push_back(read_key_file(k));
            if (!domain->empty())
                record.domain_hint = *domain;
            if (!device_file->empty())
                record.fingerprint_secret = load_device(*device_file).secret();
            keystore.put(record);
            Output out;
            out.put("asset", *asset);
            out.put("access_keys", std::to_string(record.access_keys.size()));
            out.put("enc_keys", std::to_string(record.encryption_keys.size()));
            emit(opts, out);
        });

        auto* list = keystore_cmd->add_subcommand("list", "list stored records");
        on(list, [&] {
            if (opts.keystore_path.empty())
                fail(Errc::IoError, "no keystore configured (--keystore or SPOQ_KEYSTORE)");
            storage::Keystore keystore{std::filesystem::path(opts.keystore_path)};
            Output out;
            cbor::Array records;
            for (const auto& record : keystore.list()) {
                out.put(hex_encode(record.asset.view()),
                        std::to_string(record.access_keys.size()) + " access key(s)" +
                            (record.domain_hint ? ", domain " + *record.domain_hint : ""));
                records.push_back(storage::keystore_record_to_cbor(record));
            }
            if (records.empty())
                out.put("records", "0");
            out.cbor_value = cbor::Value::array(std::move(records));
            emit(opts, out);
        });
    }

    // ---- eval ----
    auto* eval_cmd = app.add_subcommand("eval", "efficiency evaluation harness");
    eval_cmd->require_subcommand(1);
    {
        auto* table = eval_cmd->add_subcommand("table3", "batching-vs-product-wise factor table");
        auto measured = std::make_shared<bool>(false);
        auto out_file = std::make_shared<std::string>();
        table->add_flag("--measured", *measured, "also replay each scenario through the ledger");
        table->add_option("--out", *out_file, "write CSV here instead of stdout");
        on(table, [&, measured, out_file] {
            write_or_print(*out_file, eff::emit_report(eff::table_sweep(*measured, rng)));
        });

        auto* figures = eval_cmd->add_subcommand(
            "figures", "cumulative lifecycle series and the action-count sweep");
        auto out_file2 = std::make_shared<std::string>();
        figures->add_option("--out", *out_file2, "write CSV here instead of stdout");
        on(figures, [&, out_file2] {
            std::vector<eff::ReportRow> rows;
            for (const std::uint64_t p : {50ull, 100ull, 150ull, 200ull}) {
                eff::LifecycleScenario s;
                s.p = p;
                auto series = eff::lifecycle_series(s, eff::Mode::ProductWise, rng);
                for (auto& row : series)
                    row.label += "-p" + std::to_string(p);
                rows.insert(rows.end(), series.begin(), series.end());
            }
            eff::LifecycleScenario batched;
            const auto series = eff::lifecycle_series(batched, eff::Mode::Batched, rng);
            rows.insert(rows.end(), series.begin(), series.end());
            const auto sweep = eff::action_sweep();
            rows.insert(rows.end(), sweep.begin(), sweep.end());
            write_or_print(*out_file2, eff::emit_report(rows));
        });

        auto* scenario = eval_cmd->add_subcommand("scenario", "evaluate a scenario file");
        auto file = std::make_shared<std::string>();
        auto out_file3 = std::make_shared<std::string>();
        scenario->add_option("file", *file, "scenario file (key=value or canonical CBOR)")
            ->required();
        scenario->add_option("--out", *out_file3, "write CSV here instead of stdout");
        on(scenario, [&, file, out_file3] {
            const eff::LifecycleScenario s = parse_scenario_file(*file);
            std::vector<eff::ReportRow> rows;
            rows.push_back({"scenario", s, std::nullopt, eff::analytic_report(s)});
            rows.push_back({"scenario", s, std::nullopt, eff::measured_report(s, rng)});
            write_or_print(*out_file3, eff::emit_report(rows));
        });
    }

    // Global options (--format, --ledger, ...) remain usable after the
    // subcommand name.
    std::function<void(CLI::App*)> enable_fallthrough = [&](CLI::App* cmd) {
        cmd->fallthrough();
        for (CLI::App* sub : cmd->get_subcommands({}))
            enable_fallthrough(sub);
    };
    for (CLI::App* sub : app.get_subcommands({}))
        enable_fallthrough(sub);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2; // usage errors
    }

    try {
        if (format_name == "json-text")
            opts.format = Format::JsonText;
        else if (format_name == "cbor")
            opts.format = Format::Cbor;
        else if (format_name != "text")
            fail(Errc::DecodeError, "unknown --format '" + format_name + "'");
        for (const auto& action : actions)
            action();
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
