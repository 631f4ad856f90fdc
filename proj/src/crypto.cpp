#include "spoq/crypto.hpp"

#include <openssl/bn.h>
#include <openssl/ec.h>
#include <openssl/evp.h>
#include <openssl/obj_mac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>

#include <algorithm>
#include <mutex>

namespace spoq::crypto {

namespace {

struct BnCtxDeleter { void operator()(BN_CTX* p) const { BN_CTX_free(p); } };
struct BnDeleter { void operator()(BIGNUM* p) const { BN_free(p); } };
struct PointDeleter { void operator()(EC_POINT* p) const { EC_POINT_free(p); } };
struct EvpDeleter { void operator()(EVP_CIPHER_CTX* p) const { EVP_CIPHER_CTX_free(p); } };

using BnCtxPtr = std::unique_ptr<BN_CTX, BnCtxDeleter>;
using BnPtr = std::unique_ptr<BIGNUM, BnDeleter>;
using PointPtr = std::unique_ptr<EC_POINT, PointDeleter>;
using EvpPtr = std::unique_ptr<EVP_CIPHER_CTX, EvpDeleter>;

// The platform's discrete-log group: NIST P-256, whose compressed point
// encoding is exactly 33 bytes. The group object is built once and shared
// read-only.
class Group {
public:
    static const Group& get() {
        static Group g;
        return g;
    }

    const EC_GROUP* group() const { return group_; }
    const BIGNUM* order() const { return order_; }

private:
    Group() {
        group_ = EC_GROUP_new_by_curve_name(NID_X9_62_prime256v1);
        order_ = BN_new();
        BnCtxPtr ctx(BN_CTX_new());
        if (!group_ || !order_ || !ctx || !EC_GROUP_get_order(group_, order_, ctx.get()))
            throw std::runtime_error("crypto: group initialization failed");
        // Precomputed generator table speeds up every n*G term. Deprecated
        // in OpenSSL 3 but still functional for legacy EC_GROUP objects.
#pragma GCC diagnostic push
#pragma GCC diagnostic ignored "-Wdeprecated-declarations"
        EC_GROUP_precompute_mult(group_, ctx.get());
#pragma GCC diagnostic pop
    }

    EC_GROUP* group_ = nullptr;
    BIGNUM* order_ = nullptr;
};

BnPtr to_bn(ByteView bytes) {
    BnPtr bn(BN_bin2bn(bytes.data(), static_cast<int>(bytes.size()), nullptr));
    if (!bn)
        throw std::runtime_error("crypto: BN_bin2bn failed");
    return bn;
}

ByteArray<32> to_scalar_bytes(const BIGNUM* bn) {
    ByteArray<32> out{};
    if (BN_bn2binpad(bn, out.data(), 32) != 32)
        throw std::runtime_error("crypto: scalar out of range");
    return out;
}

// Hash to scalar: SHA-256 of the tagged input reduced modulo the order.
BnPtr hash_to_bn(std::string_view tag, std::initializer_list<ByteView> parts) {
    Bytes input = to_bytes(tag);
    for (auto p : parts)
        append(input, p);
    const Hash32 digest = sha256(input);
    BnPtr raw = to_bn(digest);
    BnPtr reduced(BN_new());
    BnCtxPtr ctx(BN_CTX_new());
    if (!reduced || !ctx || !BN_mod(reduced.get(), raw.get(), Group::get().order(), ctx.get()))
        throw std::runtime_error("crypto: scalar reduction failed");
    return reduced;
}

PointPtr decode_point(const UserAddress& addr) {
    const Group& g = Group::get();
    PointPtr point(EC_POINT_new(g.group()));
    BnCtxPtr ctx(BN_CTX_new());
    if (!point || !ctx ||
        !EC_POINT_oct2point(g.group(), point.get(), addr.bytes.data(), addr.bytes.size(),
                            ctx.get()))
        fail(Errc::InvalidKey, "not a valid compressed group element");
    if (EC_POINT_is_at_infinity(g.group(), point.get()))
        fail(Errc::InvalidKey, "point at infinity");
    return point;
}

UserAddress encode_point(const EC_POINT* point) {
    const Group& g = Group::get();
    UserAddress out;
    BnCtxPtr ctx(BN_CTX_new());
    if (EC_POINT_point2oct(g.group(), point, POINT_CONVERSION_COMPRESSED, out.bytes.data(),
                           out.bytes.size(), ctx.get()) != out.bytes.size())
        throw std::runtime_error("crypto: point encoding failed");
    return out;
}

// r = a*G + b*P (either scalar may be null for a zero term).
PointPtr mul_add(const BIGNUM* a, const BIGNUM* b, const EC_POINT* p) {
    const Group& g = Group::get();
    PointPtr r(EC_POINT_new(g.group()));
    BnCtxPtr ctx(BN_CTX_new());
    if (!r || !ctx || !EC_POINT_mul(g.group(), r.get(), a, p, b, ctx.get()))
        throw std::runtime_error("crypto: point multiplication failed");
    return r;
}

BnPtr random_scalar(Rng& rng) {
    const Group& g = Group::get();
    for (;;) {
        ByteArray<32> buf;
        rng.fill(buf.data(), buf.size());
        BnPtr raw = to_bn(buf);
        BnPtr reduced(BN_new());
        BnCtxPtr ctx(BN_CTX_new());
        if (!reduced || !ctx || !BN_mod(reduced.get(), raw.get(), g.order(), ctx.get()))
            throw std::runtime_error("crypto: scalar reduction failed");
        if (!BN_is_zero(reduced.get()))
            return reduced;
    }
}

// Per-member challenge link in the ring cycle.
BnPtr ring_chain_step(const Hash32& rc, ByteView message, const UserAddress& edge_point) {
    return hash_to_bn(kRingTag, {rc, message, edge_point.view()});
}

} // namespace

Hash32 sha256(ByteView data) {
    Hash32 out;
    SHA256(data.data(), data.size(), out.data());
    return out;
}

void SystemRng::fill(std::uint8_t* out, std::size_t n) {
    if (RAND_bytes(out, static_cast<int>(n)) != 1)
        throw std::runtime_error("crypto: RAND_bytes failed");
}

SystemRng& system_rng() {
    static SystemRng rng;
    return rng;
}

KeyPair keypair_from_secret(const Scalar& secret) {
    const Group& g = Group::get();
    BnPtr x = to_bn(secret.bytes);
    if (BN_is_zero(x.get()) || BN_cmp(x.get(), g.order()) >= 0)
        fail(Errc::InvalidKey, "secret scalar out of range");
    PointPtr p = mul_add(x.get(), nullptr, nullptr);
    return KeyPair{secret, encode_point(p.get())};
}

KeyPair keygen(Rng& rng) {
    BnPtr x = random_scalar(rng);
    Scalar secret{to_scalar_bytes(x.get())};
    return keypair_from_secret(secret);
}

bool valid_user_address(const UserAddress& addr) {
    try {
        decode_point(addr);
        return true;
    } catch (const Error&) {
        return false;
    }
}

ByteArray<65> Signature::serialize() const {
    ByteArray<65> out{};
    std::memcpy(out.data(), commitment.data(), 33);
    std::memcpy(out.data() + 33, response.data(), 32);
    return out;
}

Signature Signature::parse(ByteView bytes) {
    if (bytes.size() != 65)
        fail(Errc::DecodeError, "signature must be 65 bytes");
    Signature sig;
    std::memcpy(sig.commitment.data(), bytes.data(), 33);
    std::memcpy(sig.response.data(), bytes.data() + 33, 32);
    return sig;
}

Signature sign(ByteView message, const Scalar& secret) {
    const Group& g = Group::get();
    const KeyPair kp = keypair_from_secret(secret);
    // Deterministic nonce bound to the secret and message.
    BnPtr k = hash_to_bn(kNonceTag, {secret.bytes, message});
    if (BN_is_zero(k.get())) {
        const Bytes retry = concat({secret.bytes, message, to_bytes(std::string_view("r"))});
        k = hash_to_bn(kNonceTag, {retry});
    }
    PointPtr r = mul_add(k.get(), nullptr, nullptr);
    const UserAddress r_enc = encode_point(r.get());

    BnPtr e = hash_to_bn(kSigTag, {r_enc.view(), kp.pub.view(), message});
    BnPtr x = to_bn(secret.bytes);
    BnPtr s(BN_new());
    BnCtxPtr ctx(BN_CTX_new());
    BnPtr ex(BN_new());
    if (!s || !ctx || !ex || !BN_mod_mul(ex.get(), e.get(), x.get(), g.order(), ctx.get()) ||
        !BN_mod_add(s.get(), k.get(), ex.get(), g.order(), ctx.get()))
        throw std::runtime_error("crypto: signing failed");

    return Signature{to_array<33>(r_enc.view()), to_scalar_bytes(s.get())};
}

bool verify(const Signature& sig, ByteView message, const UserAddress& pub) {
    const Group& g = Group::get();
    PointPtr p = decode_point(pub); // throws InvalidKey on malformed keys
    try {
        PointPtr r = decode_point(UserAddress{sig.commitment});
        BnPtr e = hash_to_bn(kSigTag, {ByteView(sig.commitment), pub.view(), message});
        BnPtr s = to_bn(sig.response);
        if (BN_cmp(s.get(), g.order()) >= 0)
            return false;
        // s*G - e*P == R
        BnPtr neg_e(BN_new());
        BnCtxPtr ctx(BN_CTX_new());
        if (!neg_e || !ctx || !BN_mod_sub(neg_e.get(), g.order(), e.get(), g.order(), ctx.get()))
            throw std::runtime_error("crypto: verify failed");
        PointPtr v = mul_add(s.get(), neg_e.get(), p.get());
        return EC_POINT_cmp(g.group(), v.get(), r.get(), ctx.get()) == 0;
    } catch (const Error&) {
        return false;
    }
}

std::vector<UserAddress> canonical_ring(std::vector<UserAddress> ring) {
    std::sort(ring.begin(), ring.end());
    ring.erase(std::unique(ring.begin(), ring.end()), ring.end());
    return ring;
}

Hash32 ring_commitment(const std::vector<UserAddress>& ring) {
    Bytes input = to_bytes(kRingSetTag);
    for (const UserAddress& m : ring)
        append(input, m.view());
    return sha256(input);
}

RingSignature ring_sign(ByteView message, const std::vector<UserAddress>& ring,
                        const Scalar& secret, std::size_t signer_index, Rng& rng) {
    if (ring.empty())
        fail(Errc::EmptyRing, "ring has no members");
    if (signer_index >= ring.size())
        fail(Errc::BadIndex, "signer index out of range");
    const KeyPair kp = keypair_from_secret(secret);
    if (ring[signer_index] != kp.pub)
        fail(Errc::BadIndex, "signer index does not match the secret key");

    const std::vector<UserAddress> members = canonical_ring(ring);
    const std::size_t n = members.size();
    const std::size_t j = static_cast<std::size_t>(
        std::find(members.begin(), members.end(), kp.pub) - members.begin());
    const Hash32 rc = ring_commitment(members);
    const Group& g = Group::get();

    std::vector<BnPtr> challenges(n);
    std::vector<ByteArray<32>> responses(n);

    // Close the Fiat-Shamir cycle: start from the signer's real commitment,
    // walk the ring with random responses, then solve for the signer's own
    // response.
    BnPtr k = random_scalar(rng);
    PointPtr start = mul_add(k.get(), nullptr, nullptr);
    challenges[(j + 1) % n] = ring_chain_step(rc, message, encode_point(start.get()));

    for (std::size_t step = 1; step < n; ++step) {
        const std::size_t i = (j + step) % n;
        BnPtr s_i = random_scalar(rng);
        PointPtr p_i = decode_point(members[i]);
        PointPtr edge = mul_add(s_i.get(), challenges[i].get(), p_i.get());
        challenges[(i + 1) % n] = ring_chain_step(rc, message, encode_point(edge.get()));
        responses[i] = to_scalar_bytes(s_i.get());
    }

    BnPtr x = to_bn(secret.bytes);
    BnPtr cx(BN_new());
    BnPtr s_j(BN_new());
    BnCtxPtr ctx(BN_CTX_new());
    if (!cx || !s_j || !ctx ||
        !BN_mod_mul(cx.get(), challenges[j].get(), x.get(), g.order(), ctx.get()) ||
        !BN_mod_sub(s_j.get(), k.get(), cx.get(), g.order(), ctx.get()))
        throw std::runtime_error("crypto: ring signing failed");
    responses[j] = to_scalar_bytes(s_j.get());

    RingSignature sig;
    sig.ring_commitment = rc;
    sig.challenge_seed = to_scalar_bytes(challenges[0].get());
    sig.responses = std::move(responses);
    return sig;
}

bool ring_verify(const RingSignature& sig, ByteView message,
                 const std::vector<UserAddress>& ring) {
    const std::vector<UserAddress> members = canonical_ring(ring);
    if (members.empty() || sig.responses.size() != members.size())
        return false;
    if (ring_commitment(members) != sig.ring_commitment)
        return false;
    try {
        BnPtr c = to_bn(sig.challenge_seed);
        const Group& g = Group::get();
        if (BN_cmp(c.get(), g.order()) >= 0)
            return false;
        for (std::size_t i = 0; i < members.size(); ++i) {
            BnPtr s_i = to_bn(sig.responses[i]);
            if (BN_cmp(s_i.get(), g.order()) >= 0)
                return false;
            PointPtr p_i = decode_point(members[i]);
            PointPtr edge = mul_add(s_i.get(), c.get(), p_i.get());
            c = ring_chain_step(sig.ring_commitment, message, encode_point(edge.get()));
        }
        return to_scalar_bytes(c.get()) == sig.challenge_seed;
    } catch (const Error&) {
        return false;
    }
}

Bytes id_prove(const Scalar& secret, const ByteArray<32>& challenge) {
    const Group& g = Group::get();
    const KeyPair kp = keypair_from_secret(secret);
    BnPtr k = hash_to_bn(kNonceTag, {secret.bytes, challenge, to_bytes(kPufTag)});
    if (BN_is_zero(k.get()))
        BN_one(k.get());
    PointPtr r = mul_add(k.get(), nullptr, nullptr);
    const UserAddress r_enc = encode_point(r.get());
    BnPtr e = hash_to_bn(kPufTag, {r_enc.view(), kp.pub.view(), challenge});
    BnPtr x = to_bn(secret.bytes);
    BnPtr ex(BN_new());
    BnPtr s(BN_new());
    BnCtxPtr ctx(BN_CTX_new());
    if (!ex || !s || !ctx || !BN_mod_mul(ex.get(), e.get(), x.get(), g.order(), ctx.get()) ||
        !BN_mod_add(s.get(), k.get(), ex.get(), g.order(), ctx.get()))
        throw std::runtime_error("crypto: identification proof failed");
    Bytes proof(65);
    std::memcpy(proof.data(), r_enc.bytes.data(), 33);
    const ByteArray<32> s_bytes = to_scalar_bytes(s.get());
    std::memcpy(proof.data() + 33, s_bytes.data(), 32);
    return proof;
}

bool id_verify(const UserAddress& commitment, const ByteArray<32>& challenge, ByteView proof) {
    if (proof.size() != 65)
        return false;
    try {
        const Group& g = Group::get();
        PointPtr c = decode_point(commitment);
        UserAddress r_enc;
        std::memcpy(r_enc.bytes.data(), proof.data(), 33);
        PointPtr r = decode_point(r_enc);
        BnPtr e = hash_to_bn(kPufTag, {r_enc.view(), commitment.view(), challenge});
        BnPtr s = to_bn(proof.subspan(33));
        if (BN_cmp(s.get(), g.order()) >= 0)
            return false;
        BnPtr neg_e(BN_new());
        BnCtxPtr ctx(BN_CTX_new());
        if (!neg_e || !ctx || !BN_mod_sub(neg_e.get(), g.order(), e.get(), g.order(), ctx.get()))
            return false;
        PointPtr v = mul_add(s.get(), neg_e.get(), c.get());
        return EC_POINT_cmp(g.group(), v.get(), r.get(), ctx.get()) == 0;
    } catch (const Error&) {
        return false;
    }
}

Bytes aead_seal(ByteView plaintext, const AccessKey& key, ByteView associated_data,
                ByteView nonce) {
    if (nonce.size() != kAeadNonceLen)
        throw std::invalid_argument("aead_seal: nonce must be 12 bytes");
    EvpPtr ctx(EVP_CIPHER_CTX_new());
    if (!ctx || !EVP_EncryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.bytes.data(),
                                    nonce.data()))
        throw std::runtime_error("crypto: aead init failed");
    int len = 0;
    if (!associated_data.empty() &&
        !EVP_EncryptUpdate(ctx.get(), nullptr, &len, associated_data.data(),
                           static_cast<int>(associated_data.size())))
        throw std::runtime_error("crypto: aead aad failed");

    Bytes out(nonce.size() + plaintext.size() + 16);
    std::memcpy(out.data(), nonce.data(), nonce.size());
    std::uint8_t* ct = out.data() + nonce.size();
    if (!plaintext.empty() &&
        !EVP_EncryptUpdate(ctx.get(), ct, &len, plaintext.data(),
                           static_cast<int>(plaintext.size())))
        throw std::runtime_error("crypto: aead encrypt failed");
    if (!EVP_EncryptFinal_ex(ctx.get(), ct + plaintext.size(), &len) ||
        !EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, 16,
                             out.data() + nonce.size() + plaintext.size()))
        throw std::runtime_error("crypto: aead finalize failed");
    return out;
}

Bytes aead_encrypt(ByteView plaintext, const AccessKey& key, ByteView associated_data,
                   Rng& rng) {
    ByteArray<kAeadNonceLen> nonce;
    rng.fill(nonce.data(), nonce.size());
    return aead_seal(plaintext, key, associated_data, nonce);
}

Bytes aead_decrypt(ByteView ciphertext, const AccessKey& key, ByteView associated_data) {
    if (ciphertext.size() < kAeadNonceLen + 16)
        fail(Errc::AuthFailed, "ciphertext too short");
    const ByteView nonce = ciphertext.subspan(0, kAeadNonceLen);
    const ByteView body = ciphertext.subspan(kAeadNonceLen, ciphertext.size() - kAeadNonceLen - 16);
    const ByteView tag = ciphertext.subspan(ciphertext.size() - 16);

    EvpPtr ctx(EVP_CIPHER_CTX_new());
    if (!ctx || !EVP_DecryptInit_ex(ctx.get(), EVP_aes_256_gcm(), nullptr, key.bytes.data(),
                                    nonce.data()))
        throw std::runtime_error("crypto: aead init failed");
    int len = 0;
    if (!associated_data.empty() &&
        !EVP_DecryptUpdate(ctx.get(), nullptr, &len, associated_data.data(),
                           static_cast<int>(associated_data.size())))
        throw std::runtime_error("crypto: aead aad failed");
    Bytes plaintext(body.size());
    if (!body.empty() &&
        !EVP_DecryptUpdate(ctx.get(), plaintext.data(), &len, body.data(),
                           static_cast<int>(body.size())))
        fail(Errc::AuthFailed, "decryption failed");
    if (!EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, 16,
                             const_cast<std::uint8_t*>(tag.data())))
        throw std::runtime_error("crypto: aead set tag failed");
    std::uint8_t tail = 0;
    if (EVP_DecryptFinal_ex(ctx.get(), &tail, &len) != 1)
        fail(Errc::AuthFailed, "authentication failed");
    return plaintext;
}

} // namespace spoq::crypto
