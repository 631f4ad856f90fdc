#pragma once

#include <memory>
#include <optional>
#include <string>

#include "spoq/storage.hpp"

namespace spoq::storage {

// Wire protocol (HTTP/1.1, all bodies canonical CBOR):
//   GET  /nonce    -> {nonce: 16 bytes}
//   POST /entries  body {entry, policy, writer_pub, writer_sig} -> {address}
//   POST /read     body {address, mode: "key"|"owner", proof} -> {entry}
// Errors come back as 4xx with body {code, message}; the code strings are
// the stable Errc names (NONCE_INVALID, KEY_MISMATCH, NOT_OWNER, NOT_FOUND,
// WRITE_DENIED).

class HttpStorageServer {
public:
    explicit HttpStorageServer(StorageServer& core);
    ~HttpStorageServer();

    HttpStorageServer(const HttpStorageServer&) = delete;
    HttpStorageServer& operator=(const HttpStorageServer&) = delete;

    // Binds and serves on a background thread; port 0 picks a free port.
    // Returns the bound port.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    // Blocking variant for the CLI's `storage serve`.
    void run(const std::string& host, int port);
    void stop();

    std::string url() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

class HttpStorageClient {
public:
    explicit HttpStorageClient(std::string base_url);

    Challenge request_nonce();
    StorageAddress put_entry(ByteView entry_bytes, const AccessPolicy& policy,
                             const UserAddress& writer_pub, const crypto::Signature& writer_sig);

    Bytes read_public(const StorageAddress& address);
    Bytes read_key(const StorageAddress& address, const crypto::AccessKey& key,
                   crypto::Rng& rng);
    Bytes read_owner(const StorageAddress& address, const crypto::KeyPair& owner);

private:
    Bytes post_read(const StorageAddress& address, const std::string& mode, ByteView proof);

    std::string base_;
};

// Dispatches reads by storage-address descriptor: local content store or
// the HTTP server, trying the caller's credentials in order (public read,
// each access key, then an ownership proof with the identity key). Fetched
// bytes are re-verified against the address before being returned.
class ReadRouter final : public EntrySource {
public:
    struct Credentials {
        std::vector<crypto::AccessKey> access_keys;
        std::vector<ByteArray<32>> encryption_keys;
        std::optional<crypto::KeyPair> identity;
    };

    ReadRouter(const ContentStore* local, std::optional<std::string> server_url,
               Credentials credentials, crypto::Rng& rng);

    Bytes fetch(const StorageAddress& address) override;

private:
    const ContentStore* local_;
    std::optional<std::string> server_url_;
    Credentials credentials_;
    crypto::Rng& rng_;
};

} // namespace spoq::storage
