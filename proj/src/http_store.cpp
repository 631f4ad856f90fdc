#include "spoq/http_store.hpp"

#include <httplib.h>

#include <thread>

namespace spoq::storage {

namespace {

std::string to_body(const cbor::Value& v) {
    const Bytes bytes = cbor::encode(v);
    return std::string(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

ByteView body_view(const std::string& body) {
    return ByteView(reinterpret_cast<const std::uint8_t*>(body.data()), body.size());
}

int status_for(Errc code) {
    switch (code) {
    case Errc::NotFound:
        return 404;
    case Errc::PolicyInvalid:
    case Errc::DecodeError:
        return 400;
    default:
        return 403;
    }
}

Errc errc_from_wire(const std::string& name) {
    for (Errc code : {Errc::NonceInvalid, Errc::KeyMismatch, Errc::NotOwner, Errc::NotFound,
                      Errc::WriteDenied, Errc::PolicyInvalid, Errc::AssetLinkMissing,
                      Errc::DecodeError})
        if (errc_name(code) == name)
            return code;
    return Errc::IoError;
}

void send_error(httplib::Response& res, const Error& e) {
    res.status = status_for(e.code());
    res.set_content(to_body(cbor::MapBuilder{}
                                .put("code", cbor::Value::text(std::string(e.code_name())))
                                .put("message", cbor::Value::text(e.what()))
                                .build()),
                    "application/cbor");
}

} // namespace

struct HttpStorageServer::Impl {
    StorageServer& core;
    httplib::Server server;
    std::thread thread;
    std::string host = "127.0.0.1";
    int port = 0;

    explicit Impl(StorageServer& c) : core(c) {
        server.Get("/nonce", [this](const httplib::Request&, httplib::Response& res) {
            const Challenge nonce = core.request_nonce();
            res.set_content(
                to_body(cbor::MapBuilder{}.put("nonce", cbor::Value::bytes(ByteView(nonce))).build()),
                "application/cbor");
        });

        server.Post("/entries", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const cbor::Value v = cbor::decode(body_view(req.body));
                const Bytes entry = v.at("entry").as_bytes();
                const AccessPolicy policy = policy_from_cbor(v.at("policy"));
                const UserAddress writer = user_address_from_bytes(v.at("writer_pub").as_bytes());
                const crypto::Signature sig = signature_from_cbor(v.at("writer_sig"));
                const StorageAddress address = core.put_entry(entry, policy, writer, sig);
                res.set_content(to_body(cbor::MapBuilder{}
                                            .put("address", cbor::Value::bytes(address.view()))
                                            .build()),
                                "application/cbor");
            } catch (const Error& e) {
                send_error(res, e);
            }
        });

        server.Post("/read", [this](const httplib::Request& req, httplib::Response& res) {
            try {
                const cbor::Value v = cbor::decode(body_view(req.body));
                const StorageAddress address =
                    storage_address_from_bytes(v.at("address").as_bytes());
                const std::string mode = v.at("mode").as_text();
                const Bytes proof = v.at("proof").as_bytes();
                Bytes entry;
                if (mode == "key") {
                    entry = core.read_key_protected(address, proof);
                } else if (mode == "owner") {
                    const cbor::Value p = cbor::decode(proof);
                    entry = core.read_ownership_protected(
                        address, to_array<kChallengeLen>(p.at("challenge").as_bytes()),
                        signature_from_cbor(p.at("sig")));
                } else {
                    fail(Errc::DecodeError, "mode must be \"key\" or \"owner\"");
                }
                res.set_content(
                    to_body(cbor::MapBuilder{}.put("entry", cbor::Value::bytes(ByteView(entry))).build()),
                    "application/cbor");
            } catch (const Error& e) {
                send_error(res, e);
            }
        });
    }
};

HttpStorageServer::HttpStorageServer(StorageServer& core) : impl_(new Impl(core)) {}

HttpStorageServer::~HttpStorageServer() {
    stop();
}

int HttpStorageServer::start(const std::string& host, int port) {
    impl_->host = host;
    if (port == 0) {
        impl_->port = impl_->server.bind_to_any_port(host);
    } else {
        if (!impl_->server.bind_to_port(host, port))
            fail(Errc::IoError, "cannot bind to port " + std::to_string(port));
        impl_->port = port;
    }
    impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
    impl_->server.wait_until_ready();
    return impl_->port;
}

void HttpStorageServer::run(const std::string& host, int port) {
    impl_->host = host;
    impl_->port = port;
    if (!impl_->server.listen(host, port))
        fail(Errc::IoError, "cannot serve on " + host + ":" + std::to_string(port));
}

void HttpStorageServer::stop() {
    impl_->server.stop();
    if (impl_->thread.joinable())
        impl_->thread.join();
}

std::string HttpStorageServer::url() const {
    return "http://" + impl_->host + ":" + std::to_string(impl_->port);
}

// ---------------------------------------------------------------------------
// Client
// ---------------------------------------------------------------------------

namespace {

cbor::Value parse_response(const httplib::Result& result, const char* what) {
    if (!result)
        fail(Errc::IoError, std::string("storage server unreachable during ") + what);
    const cbor::Value v = cbor::decode(body_view(result->body));
    if (result->status != 200) {
        const cbor::Value* code = v.find("code");
        const cbor::Value* message = v.find("message");
        fail(code ? errc_from_wire(code->as_text()) : Errc::IoError,
             message ? message->as_text() : "storage request failed");
    }
    return v;
}

} // namespace

HttpStorageClient::HttpStorageClient(std::string base_url) : base_(std::move(base_url)) {}

Challenge HttpStorageClient::request_nonce() {
    httplib::Client client(base_);
    const cbor::Value v = parse_response(client.Get("/nonce"), "nonce request");
    return to_array<kChallengeLen>(v.at("nonce").as_bytes());
}

StorageAddress HttpStorageClient::put_entry(ByteView entry_bytes, const AccessPolicy& policy,
                                            const UserAddress& writer_pub,
                                            const crypto::Signature& writer_sig) {
    httplib::Client client(base_);
    const cbor::Value body = cbor::MapBuilder{}
                                 .put("entry", cbor::Value::bytes(entry_bytes))
                                 .put("policy", policy_to_cbor(policy))
                                 .put("writer_pub", cbor::Value::bytes(writer_pub.view()))
                                 .put("writer_sig", signature_to_cbor(writer_sig))
                                 .build();
    const cbor::Value v = parse_response(
        client.Post("/entries", to_body(body), "application/cbor"), "entry upload");
    return storage_address_from_bytes(v.at("address").as_bytes());
}

Bytes HttpStorageClient::post_read(const StorageAddress& address, const std::string& mode,
                                   ByteView proof) {
    httplib::Client client(base_);
    const cbor::Value body = cbor::MapBuilder{}
                                 .put("address", cbor::Value::bytes(address.view()))
                                 .put("mode", cbor::Value::text(mode))
                                 .put("proof", cbor::Value::bytes(proof))
                                 .build();
    const cbor::Value v =
        parse_response(client.Post("/read", to_body(body), "application/cbor"), "read");
    return v.at("entry").as_bytes();
}

Bytes HttpStorageClient::read_public(const StorageAddress& address) {
    return post_read(address, "key", {});
}

Bytes HttpStorageClient::read_key(const StorageAddress& address, const crypto::AccessKey& key,
                                  crypto::Rng& rng) {
    const Challenge nonce = request_nonce();
    const Bytes proof = make_key_proof(nonce, key, address, rng);
    return post_read(address, "key", proof);
}

Bytes HttpStorageClient::read_owner(const StorageAddress& address, const crypto::KeyPair& owner) {
    const Challenge nonce = request_nonce();
    const crypto::Signature sig = make_owner_proof(nonce, owner);
    const cbor::Value proof = cbor::MapBuilder{}
                                  .put("challenge", cbor::Value::bytes(ByteView(nonce)))
                                  .put("sig", signature_to_cbor(sig))
                                  .build();
    return post_read(address, "owner", cbor::encode(proof));
}

// ---------------------------------------------------------------------------
// ReadRouter
// ---------------------------------------------------------------------------

ReadRouter::ReadRouter(const ContentStore* local, std::optional<std::string> server_url,
                       Credentials credentials, crypto::Rng& rng)
    : local_(local), server_url_(std::move(server_url)), credentials_(std::move(credentials)),
      rng_(rng) {}

Bytes ReadRouter::fetch(const StorageAddress& address) {
    const ByteArray<2> descriptor = address.descriptor();
    if (descriptor == backend::kContentStore) {
        if (!local_)
            fail(Errc::UnknownBackend, "no content store configured");
        // Content-store blobs may be sealed either under shared access keys
        // or dedicated encryption keys; try both sets.
        std::vector<crypto::AccessKey> keys = credentials_.access_keys;
        for (const auto& k : credentials_.encryption_keys)
            keys.push_back(crypto::AccessKey{k});
        ContentSource source(*local_, std::move(keys));
        return source.fetch(address);
    }
    if (descriptor == backend::kHttpServer) {
        if (!server_url_)
            fail(Errc::NotFound, "no storage server locator known for this address");
        HttpStorageClient client(*server_url_);
        auto verified = [&](Bytes bytes) {
            if (derive_storage_address(backend::kHttpServer, bytes) != address)
                fail(Errc::KeyMismatch, "served entry does not match its address");
            return bytes;
        };
        try {
            return verified(client.read_public(address));
        } catch (const Error& e) {
            if (e.code() == Errc::NotFound || e.code() == Errc::IoError)
                throw;
        }
        for (const crypto::AccessKey& key : credentials_.access_keys) {
            try {
                return verified(client.read_key(address, key, rng_));
            } catch (const Error& e) {
                if (e.code() == Errc::NotFound || e.code() == Errc::IoError)
                    throw;
            }
        }
        if (credentials_.identity) {
            try {
                return verified(client.read_owner(address, *credentials_.identity));
            } catch (const Error& e) {
                if (e.code() == Errc::NotFound || e.code() == Errc::IoError)
                    throw;
            }
        }
        fail(Errc::KeyMismatch, "no credential grants access to " + hex_encode(address.view()));
    }
    fail(Errc::UnknownBackend, "unknown storage descriptor " + hex_encode(descriptor));
}

} // namespace spoq::storage
