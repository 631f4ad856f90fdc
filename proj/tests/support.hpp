#pragma once

#include <cstring>
#include <string>
#include <vector>

#include "spoq/crypto.hpp"
#include "spoq/ledger.hpp"
#include "spoq/model.hpp"

namespace spoq::test {

// Deterministic DRBG for reproducible tests: SHA-256 counter stream.
class TestRng final : public crypto::Rng {
public:
    explicit TestRng(std::uint64_t seed = 1) : seed_(seed) {}

    void fill(std::uint8_t* out, std::size_t n) override {
        while (n > 0) {
            const Bytes block_input =
                to_bytes("testrng-" + std::to_string(seed_) + "-" + std::to_string(counter_++));
            const Hash32 block = crypto::sha256(block_input);
            const std::size_t take = std::min(n, block.size());
            std::memcpy(out, block.data(), take);
            out += take;
            n -= take;
        }
    }

private:
    std::uint64_t seed_;
    std::uint64_t counter_ = 0;
};

inline ByteArray<32> nonce32(TestRng& rng) {
    return rng.array<32>();
}

inline StorageEntry make_product_entry(const std::string& name, const std::string& author,
                                       const Fingerprint& fp, TestRng& rng) {
    StorageEntry entry;
    entry.name = name;
    entry.author_name = author;
    entry.data = to_bytes(std::string_view("demo product data"));
    entry.nonce = nonce32(rng);
    entry.body = ProductBody{fp, {}};
    return entry;
}

inline StorageEntry make_batch_entry(const std::string& name, const std::string& author,
                                     std::vector<StorageRef> components, TestRng& rng) {
    StorageEntry entry;
    entry.name = name;
    entry.author_name = author;
    entry.data = to_bytes(std::string_view("demo batch data"));
    entry.nonce = nonce32(rng);
    entry.body = BatchBody{std::move(components)};
    return entry;
}

inline StorageEntry make_action_entry(const std::string& name, const std::string& author,
                                      const LedgerAddress& asset, TestRng& rng) {
    StorageEntry entry;
    entry.name = name;
    entry.author_name = author;
    entry.data = to_bytes(std::string_view("demo action data"));
    entry.nonce = nonce32(rng);
    entry.body = ActionBody{asset};
    return entry;
}

// Registered-user test bench: a ledger with a consortium plus helpers for
// building correctly authenticated transactions.
struct Bench {
    TestRng rng;
    crypto::KeyPair consortium;
    ledger::Ledger ledger;

    explicit Bench(std::uint64_t seed = 7)
        : rng(seed), consortium(crypto::keygen(rng)), ledger(consortium.pub) {}

    crypto::KeyPair register_user(const std::string& name, std::vector<Role> roles) {
        const crypto::KeyPair kp = crypto::keygen(rng);
        register_key(name, std::move(roles), kp.pub);
        return kp;
    }

    LedgerAddress register_key(const std::string& name, std::vector<Role> roles,
                               const UserAddress& pub) {
        ledger::Transaction tx;
        tx.calls = {ledger::RegisterUserArgs{name, std::move(roles), pub}};
        tx.payload_hash = ledger::payload_hash(tx.calls);
        tx.auth = {ledger::make_consortium_auth(tx.payload_hash, consortium)};
        return ledger.submit(tx).results.at(0).created.at(0);
    }

    void revoke(const LedgerAddress& user) {
        ledger::Transaction tx;
        tx.calls = {ledger::RevokeUserArgs{user}};
        tx.payload_hash = ledger::payload_hash(tx.calls);
        tx.auth = {ledger::make_consortium_auth(tx.payload_hash, consortium)};
        ledger.submit(tx);
    }

    ledger::Receipt submit(std::vector<ledger::FunctionCall> calls,
                           std::vector<ledger::Authenticator> auth) {
        ledger::Transaction tx;
        tx.calls = std::move(calls);
        tx.payload_hash = ledger::payload_hash(tx.calls);
        tx.auth = std::move(auth);
        return ledger.submit(tx);
    }

    LedgerAddress create_asset(AssetKind kind, const StorageRef& ref,
                               const crypto::KeyPair& producer,
                               const UserAddress& initial_owner) {
        ledger::CreateAssetArgs args{kind, ref, initial_owner, rng.array<16>()};
        const Hash32 payload = ledger::payload_hash({ledger::FunctionCall{args}});
        const auto receipt =
            submit({args}, {ledger::make_role_auth(payload, Role::Producer,
                                                   ledger.role_keys(Role::Producer), producer,
                                                   rng)});
        return receipt.results.at(0).created.at(0);
    }

    LedgerAddress publish_component(const LedgerAddress& parent, AssetKind kind,
                                    const StorageRef& ref, const crypto::KeyPair& caller,
                                    const UserAddress& initial_owner) {
        ledger::PublishComponentArgs args{parent, kind, ref, initial_owner, rng.array<16>()};
        const Hash32 payload = ledger::payload_hash({ledger::FunctionCall{args}});
        const auto receipt = submit(
            {args},
            {ledger::make_role_auth(payload, Role::Intermediary,
                                    ledger.role_keys(Role::Intermediary), caller, rng),
             ledger::make_owner_auth(payload, caller)});
        return receipt.results.at(0).created.at(0);
    }

    std::vector<LedgerAddress> split_batch(const LedgerAddress& parent,
                                           const std::vector<ledger::SubBatch>& subs,
                                           const crypto::KeyPair& caller) {
        ledger::SplitBatchArgs args{parent, subs};
        const Hash32 payload = ledger::payload_hash({ledger::FunctionCall{args}});
        const auto receipt = submit(
            {args},
            {ledger::make_role_auth(payload, Role::Intermediary,
                                    ledger.role_keys(Role::Intermediary), caller, rng),
             ledger::make_owner_auth(payload, caller)});
        return receipt.results.at(0).created;
    }

    void log_action(const LedgerAddress& asset, const StorageRef& action,
                    const crypto::KeyPair& owner) {
        ledger::LogActionArgs args{asset, action};
        const Hash32 payload = ledger::payload_hash({ledger::FunctionCall{args}});
        submit({args}, {ledger::make_owner_auth(payload, owner)});
    }

    void transfer(const LedgerAddress& asset, const crypto::KeyPair& from,
                  const UserAddress& to) {
        ledger::TransferOwnershipArgs args{asset, to};
        const Hash32 payload = ledger::payload_hash({ledger::FunctionCall{args}});
        submit({args}, {ledger::make_owner_auth(payload, from)});
    }
};

} // namespace spoq::test
