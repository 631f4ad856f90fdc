#include <doctest.h>

#include "fixtures.hpp"
#include "spoq/verify.hpp"

using namespace spoq;
using namespace spoq::verify;
using test::Hierarchy;
using test::MapSource;

namespace {

// Hand-built three-level fixture: product listed in a sub-batch listed in
// an on-ledger root batch, everything producer-signed.
struct ThreeLevel {
    test::Bench bench{101};
    crypto::KeyPair producer{bench.register_user("MakerOne", {Role::Producer})};
    crypto::KeyPair carrier{bench.register_user("Carrier", {Role::Intermediary})};
    MapSource source;
    StorageRef product_ref, mid_ref, root_ref;
    LedgerAddress root_addr;

    ThreeLevel() {
        StorageEntry product = test::make_product_entry("Widget", "MakerOne",
                                                        test::barcode_of(7), bench.rng);
        sign_storage_entry(product, producer.secret);
        product_ref = store(product);

        StorageEntry mid = test::make_batch_entry("Inner", "MakerOne", {product_ref}, bench.rng);
        sign_storage_entry(mid, producer.secret);
        mid_ref = store(mid);

        StorageEntry root = test::make_batch_entry("Pallet", "MakerOne", {mid_ref}, bench.rng);
        sign_storage_entry(root, producer.secret);
        root_ref = store(root);

        root_addr = bench.create_asset(AssetKind::Batch, root_ref, producer, carrier.pub);
    }

    StorageRef store(const StorageEntry& entry) {
        const Bytes bytes = canonical_serialize(entry);
        StorageRef ref;
        ref.address = source.put(bytes);
        ref.hash = entry_hash(bytes);
        return ref;
    }

    OriginSubject product_subject() {
        return {product_ref, source.fetch(product_ref.address), std::nullopt};
    }
};

} // namespace

TEST_CASE("origin: a root asset with an empty trail verifies as itself") {
    Hierarchy h = test::make_hierarchy(301, false);
    const OriginResult res =
        origin(h.subject_of(h.root()), h.bench.ledger, h.source);
    CHECK(res.ok);
    REQUIRE(res.trail.size() == 1);
    CHECK(res.trail[0].ref == h.root().ref);
    CHECK(res.trail[0].ledger == h.root().ledger);
}

TEST_CASE("origin: product in sub-batch in root batch gives a trail of three") {
    ThreeLevel f;
    const OriginResult res = origin(f.product_subject(), f.bench.ledger, f.source);
    CHECK(res.ok);
    REQUIRE(res.trail.size() == 3);
    CHECK(res.trail[0].ref == f.root_ref);  // root first
    CHECK(res.trail[0].ledger == f.root_addr);
    CHECK(res.trail[1].ref == f.mid_ref);
    CHECK(res.trail[2].ref == f.product_ref);

    // Brute-force checker agrees.
    CHECK(test::bf_origin(f.product_subject(), f.bench.ledger, f.source.blobs()));
}

TEST_CASE("origin: one flipped component hash corrupts the trail") {
    ThreeLevel f;
    // Re-author the middle batch listing a wrong product hash.
    StorageEntry mid = decode_storage_entry(f.source.fetch(f.mid_ref.address));
    std::get<BatchBody>(mid.body).components[0].hash[4] ^= 0x01;
    sign_storage_entry(mid, f.producer.secret);
    const Bytes bytes = canonical_serialize(mid);
    f.source.overwrite(f.mid_ref.address, bytes);
    // keep the root consistent so only the leaf linkage breaks
    StorageEntry root = decode_storage_entry(f.source.fetch(f.root_ref.address));
    std::get<BatchBody>(root.body).components[0].hash = entry_hash(bytes);
    sign_storage_entry(root, f.producer.secret);
    const Bytes root_bytes = canonical_serialize(root);
    f.source.overwrite(f.root_ref.address, root_bytes);
    // and re-point the ledger at the new root entry via a fresh fixture
    // (the on-ledger hash must stay what it was at publication to model a
    // post-publication rewrite, so instead just verify the product):
    const OriginResult res = origin(f.product_subject(), f.bench.ledger, f.source);
    CHECK_FALSE(res.ok);
    CHECK(res.trail.empty());
    CHECK_FALSE(test::bf_origin(f.product_subject(), f.bench.ledger, f.source.blobs()));
}

TEST_CASE("origin: leaf created by a different producer is rejected") {
    test::Bench bench(102);
    const auto maker1 = bench.register_user("MakerOne", {Role::Producer});
    const auto maker2 = bench.register_user("MakerTwo", {Role::Producer});
    const auto carrier = bench.register_user("Carrier", {Role::Intermediary});
    MapSource source;

    StorageEntry leaf = test::make_product_entry("Impostor", "MakerTwo", test::barcode_of(9),
                                                 bench.rng);
    sign_storage_entry(leaf, maker2.secret);
    const Bytes leaf_bytes = canonical_serialize(leaf);
    StorageRef leaf_ref{source.put(leaf_bytes), entry_hash(leaf_bytes)};

    StorageEntry root = test::make_batch_entry("Pallet", "MakerOne", {leaf_ref}, bench.rng);
    sign_storage_entry(root, maker1.secret);
    const Bytes root_bytes = canonical_serialize(root);
    StorageRef root_ref{source.put(root_bytes), entry_hash(root_bytes)};
    bench.create_asset(AssetKind::Batch, root_ref, maker1, carrier.pub);

    const OriginSubject subject{leaf_ref, leaf_bytes, std::nullopt};
    const OriginResult res = origin(subject, bench.ledger, source);
    CHECK_FALSE(res.ok);
    CHECK(res.trail.empty());
    CHECK_FALSE(test::bf_origin(subject, bench.ledger, source.blobs()));
}

TEST_CASE("origin: trail spans split sub-batches via the ledger link") {
    ThreeLevel f;
    // Split the root: sub-batch covering the mid batch, carrier-authored.
    StorageEntry split = test::make_batch_entry("SplitA", "Carrier", {f.mid_ref}, f.bench.rng);
    sign_storage_entry(split, f.carrier.secret);
    const Bytes split_bytes = canonical_serialize(split);
    StorageRef split_ref{f.source.put(split_bytes), entry_hash(split_bytes)};
    const LedgerAddress split_addr =
        f.bench
            .split_batch(f.root_addr,
                         {ledger::SubBatch{split_ref, f.carrier.pub, f.bench.rng.array<16>()}},
                         f.carrier)
            .at(0);

    // Publish down the proper chain: mid from the split, then the product
    // from mid.
    const LedgerAddress mid_addr = f.bench.publish_component(
        split_addr, AssetKind::Batch, f.mid_ref, f.carrier, f.carrier.pub);
    const LedgerAddress product_addr = f.bench.publish_component(
        mid_addr, AssetKind::Product, f.product_ref, f.carrier, f.carrier.pub);

    OriginSubject subject{f.product_ref, f.source.fetch(f.product_ref.address), product_addr};
    const OriginResult res = origin(subject, f.bench.ledger, f.source);
    CHECK(res.ok);
    REQUIRE(res.trail.size() == 4);
    CHECK(res.trail[0].ref == f.root_ref); // root first
    CHECK(res.trail[1].ref == split_ref);
    CHECK(res.trail[2].ref == f.mid_ref);
    CHECK(res.trail[3].ref == f.product_ref);
    CHECK(test::bf_origin(subject, f.bench.ledger, f.source.blobs()));
}

TEST_CASE("origin: component published from an unrelated batch raises suspicion") {
    ThreeLevel f;
    // A second batch the carrier owns, unrelated to the product.
    StorageEntry other = test::make_batch_entry("Other", "MakerOne",
                                                {StorageRef{f.mid_ref.address, f.mid_ref.hash}},
                                                f.bench.rng);
    other.name = "OtherPallet";
    sign_storage_entry(other, f.producer.secret);
    const Bytes other_bytes = canonical_serialize(other);
    StorageRef other_ref{f.source.put(other_bytes), entry_hash(other_bytes)};
    const LedgerAddress other_addr =
        f.bench.create_asset(AssetKind::Batch, other_ref, f.producer, f.carrier.pub);

    // The carrier registers the product by proxy from the unrelated batch,
    // whose component list does not cover it.
    const LedgerAddress product_addr = f.bench.publish_component(
        other_addr, AssetKind::Product, f.product_ref, f.carrier, f.carrier.pub);

    OriginSubject subject{f.product_ref, f.source.fetch(f.product_ref.address), product_addr};
    const OriginResult res = origin(subject, f.bench.ledger, f.source);
    CHECK_FALSE(res.ok);
    CHECK(res.trail.empty());
    CHECK_FALSE(test::bf_origin(subject, f.bench.ledger, f.source.blobs()));
}

TEST_CASE("origin oracle equivalence over randomized hierarchies") {
    int checked = 0;
    int valid_true = 0, verdict_false = 0;
    for (std::uint64_t seed = 0; seed < 60; ++seed) {
        Hierarchy h = test::make_hierarchy(9000 + seed, seed % 3 == 2);
        for (std::size_t i = 0; i < h.items.size(); ++i) {
            const OriginSubject subject = h.subject_of(h.items[i]);
            const OriginResult mine = origin(subject, h.bench.ledger, h.source);
            const bool oracle = test::bf_origin(subject, h.bench.ledger, h.source.blobs());
            CAPTURE(seed);
            CAPTURE(i);
            CHECK(mine.ok == oracle);
            if (!mine.ok)
                CHECK(mine.trail.empty());
            ++checked;
            (mine.ok ? valid_true : verdict_false) += 1;
        }
    }
    // the corpus must exercise both verdicts
    CHECK(checked > 100);
    CHECK(valid_true > 0);
    CHECK(verdict_false > 0);
}

TEST_CASE("origin: trail ordering satisfies the parent relation") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Hierarchy h = test::make_hierarchy(7700 + seed, false);
        for (const auto& item : h.items) {
            const OriginResult res = origin(h.subject_of(item), h.bench.ledger, h.source);
            if (!res.ok)
                continue;
            // every adjacent pair: parent lists some descendant or is the
            // recorded split/publish parent of the child
            for (std::size_t i = 0; i + 1 < res.trail.size(); ++i) {
                const TrailNode& parent = res.trail[i];
                const TrailNode& child = res.trail[i + 1];
                const StorageEntry parent_entry =
                    decode_storage_entry(h.source.fetch(parent.ref.address));
                bool related = false;
                if (const auto* body = std::get_if<BatchBody>(&parent_entry.body))
                    for (const StorageRef& c : body->components)
                        if (c.address == child.ref.address)
                            related = true;
                if (!related && child.ledger) {
                    const AssetEntry& child_asset = h.bench.ledger.query_asset(*child.ledger);
                    related = child_asset.parent == parent.ledger;
                }
                CHECK(related);
            }
        }
    }
}

TEST_CASE("tamper completeness: every single-byte flip breaks a valid trail") {
    ThreeLevel f;
    const OriginSubject subject = f.product_subject();
    REQUIRE(origin(subject, f.bench.ledger, f.source).ok);

    for (const StorageRef& ref : {f.product_ref, f.mid_ref, f.root_ref}) {
        const Bytes original = f.source.fetch(ref.address);
        for (std::size_t pos = 0; pos < original.size(); pos += 7) { // sampled stride
            Bytes mutated = original;
            mutated[pos] ^= 0x01;
            f.source.overwrite(ref.address, mutated);
            const OriginSubject s =
                ref == f.product_ref ? OriginSubject{ref, mutated, std::nullopt} : subject;
            const OriginResult res = origin(s, f.bench.ledger, f.source);
            CAPTURE(hex_encode(ref.address.view()));
            CAPTURE(pos);
            CHECK_FALSE(res.ok);
            CHECK(res.trail.empty());
            f.source.overwrite(ref.address, original);
        }
    }
}

TEST_CASE("verify_asset: honest producer-published product passes everything") {
    test::Bench bench(103);
    const auto producer = bench.register_user("MakerOne", {Role::Producer});
    MapSource source;
    test::TestRng device_rng(55);
    MockPufDevice device = MockPufDevice::create(device_rng);

    StorageEntry product = test::make_product_entry("Widget", "MakerOne",
                                                    fingerprint_enroll(device), bench.rng);
    sign_storage_entry(product, producer.secret);
    const Bytes bytes = canonical_serialize(product);
    StorageRef ref{source.put(bytes), entry_hash(bytes)};
    const LedgerAddress addr = bench.create_asset(AssetKind::Product, ref, producer, producer.pub);

    const VerificationReport report =
        verify_asset(addr, bench.ledger, source, &device, &bench.rng);
    CHECK(report.hash_ok == Check::Pass);
    CHECK(report.signature_ok == Check::Pass);
    CHECK(report.role_ok == Check::Pass);
    CHECK(report.origin_ok == Check::Pass);
    CHECK(report.fingerprint_ok == Check::Pass);
    CHECK(report.pass());

    SUBCASE("without a device the physical step is skipped, not failed") {
        const VerificationReport r2 = verify_asset(addr, bench.ledger, source);
        CHECK(r2.fingerprint_ok == Check::Skipped);
        CHECK(r2.pass());
    }
    SUBCASE("report serializes to cbor and text") {
        CHECK_FALSE(report.to_text().empty());
        CHECK(cbor::encode(report.to_cbor()).size() > 0);
    }
}

TEST_CASE("verify_asset: storage rewrite after publication fails the hash check") {
    test::Bench bench(104);
    const auto producer = bench.register_user("MakerOne", {Role::Producer});
    MapSource source;

    StorageEntry product =
        test::make_product_entry("Widget", "MakerOne", test::barcode_of(1), bench.rng);
    sign_storage_entry(product, producer.secret);
    const Bytes bytes = canonical_serialize(product);
    StorageRef ref{source.put(bytes), entry_hash(bytes)};
    const LedgerAddress addr = bench.create_asset(AssetKind::Product, ref, producer, producer.pub);

    // The storage manager silently rewrites the entry (still well-formed,
    // still signed -- by the same producer, but different data).
    StorageEntry doctored = product;
    doctored.data = to_bytes(std::string_view("covered up"));
    sign_storage_entry(doctored, producer.secret);
    source.overwrite(ref.address, canonical_serialize(doctored));

    const VerificationReport report = verify_asset(addr, bench.ledger, source);
    CHECK(report.hash_ok == Check::Fail);
    CHECK_FALSE(report.pass());
}

TEST_CASE("verify_asset: entries signed by unregistered keys fail signature") {
    test::Bench bench(105);
    const auto producer = bench.register_user("MakerOne", {Role::Producer});
    const auto counterfeiter = crypto::keygen(bench.rng); // never registered
    MapSource source;

    StorageEntry fake =
        test::make_product_entry("Fake", "MakerOne", test::barcode_of(2), bench.rng);
    sign_storage_entry(fake, counterfeiter.secret);
    const Bytes bytes = canonical_serialize(fake);
    StorageRef ref{source.put(bytes), entry_hash(bytes)};
    const LedgerAddress addr = bench.create_asset(AssetKind::Product, ref, producer, producer.pub);

    const VerificationReport report = verify_asset(addr, bench.ledger, source);
    CHECK(report.hash_ok == Check::Pass); // hash matches what was published
    CHECK(report.signature_ok == Check::Fail);
    CHECK_FALSE(report.pass());

    SUBCASE("unsigned entries fail too") {
        StorageEntry unsigned_entry = fake;
        unsigned_entry.signature.reset();
        const Bytes b2 = canonical_serialize(unsigned_entry);
        StorageRef r2{source.put(b2), entry_hash(b2)};
        const LedgerAddress a2 =
            bench.create_asset(AssetKind::Product, r2, producer, producer.pub);
        const VerificationReport rep2 = verify_asset(a2, bench.ledger, source);
        CHECK(rep2.signature_ok == Check::Fail);
    }
}

TEST_CASE("verify_asset: author without the required role fails role_ok") {
    test::Bench bench(106);
    const auto producer = bench.register_user("MakerOne", {Role::Producer});
    const auto carrier = bench.register_user("Carrier", {Role::Intermediary});
    MapSource source;

    // Root asset authored (signed) by the intermediary: signature resolves
    // but the producer role is missing.
    StorageEntry product =
        test::make_product_entry("Widget", "Carrier", test::barcode_of(3), bench.rng);
    sign_storage_entry(product, carrier.secret);
    const Bytes bytes = canonical_serialize(product);
    StorageRef ref{source.put(bytes), entry_hash(bytes)};
    const LedgerAddress addr = bench.create_asset(AssetKind::Product, ref, producer, producer.pub);

    const VerificationReport report = verify_asset(addr, bench.ledger, source);
    CHECK(report.signature_ok == Check::Pass);
    CHECK(report.role_ok == Check::Fail);
    CHECK_FALSE(report.pass());
}

TEST_CASE("verify_asset: unreadable storage never reports Pass for unchecked fields") {
    test::Bench bench(107);
    const auto producer = bench.register_user("MakerOne", {Role::Producer});
    MapSource source; // empty: nothing readable

    StorageRef ref;
    ref.address = derive_storage_address(backend::kContentStore, bench.rng.array<8>());
    ref.hash = bench.rng.array<32>();
    const LedgerAddress addr = bench.create_asset(AssetKind::Product, ref, producer, producer.pub);

    const VerificationReport report = verify_asset(addr, bench.ledger, source);
    CHECK(report.hash_ok == Check::Fail);
    CHECK(report.signature_ok == Check::Skipped);
    CHECK(report.role_ok == Check::Skipped);
    CHECK(report.origin_ok == Check::Skipped);
    CHECK(report.fingerprint_ok == Check::Skipped);
    CHECK_FALSE(report.pass());

    SUBCASE("unknown ledger address reports failure with a diagnostic") {
        const LedgerAddress ghost = derive_ledger_address(AddressKind::Asset, bench.rng.array<8>());
        const VerificationReport r2 = verify_asset(ghost, bench.ledger, source);
        CHECK(r2.hash_ok == Check::Fail);
        CHECK_FALSE(r2.diagnostics.empty());
    }
}

TEST_CASE("fingerprints: enrollment and verification per type") {
    test::TestRng rng(108);
    MockPufDevice device = MockPufDevice::create(rng);

    SUBCASE("zk-puf enrollment publishes a valid commitment") {
        const Fingerprint fp = fingerprint_enroll(device);
        CHECK(fp.header == fingerprint::kZkPuf);
        CHECK(fp.payload.size() == 33);
        CHECK(crypto::valid_user_address(user_address_from_bytes(fp.payload)));
        MockPufDevice other = MockPufDevice::create(rng);
        CHECK(fingerprint_enroll(other).payload != fp.payload);
    }
    SUBCASE("genuine device verifies; a clone with random answers does not") {
        const Fingerprint fp = fingerprint_enroll(device);
        CHECK(fingerprint_verify(fp, device, rng));

        // The cloner copied the public commitment but not the scalar.
        class CloneDevice final : public DeviceInterface {
        public:
            explicit CloneDevice(test::TestRng& r) : rng_(r) {}
            Bytes request(const ByteArray<32>&) override {
                Bytes junk(65);
                rng_.fill(junk.data(), junk.size());
                junk[0] = 0x02;
                return junk;
            }

        private:
            test::TestRng& rng_;
        };
        CloneDevice clone(rng);
        CHECK_FALSE(fingerprint_verify(fp, clone, rng));

        // A different genuine device also fails against this commitment.
        MockPufDevice other = MockPufDevice::create(rng);
        CHECK_FALSE(fingerprint_verify(fp, other, rng));
    }
    SUBCASE("device secret round-trips through the keystore form") {
        MockPufDevice restored = MockPufDevice::from_secret(device.secret());
        CHECK(restored.commitment() == device.commitment());
        CHECK(fingerprint_verify(fingerprint_enroll(device), restored, rng));
    }
    SUBCASE("barcodes compare scanned bytes") {
        const Fingerprint fp = test::barcode_of(77);
        BarcodeDevice scanner(fp.payload);
        CHECK(fingerprint_verify(fp, scanner, rng));
        BarcodeDevice wrong(to_bytes(std::string_view("code-78")));
        CHECK_FALSE(fingerprint_verify(fp, wrong, rng));
    }
    SUBCASE("unknown fingerprint types are rejected") {
        Fingerprint alien{{0x00, 0x01, 0x02, 0x03}, {}};
        BarcodeDevice scanner({});
        CHECK_THROWS_AS(fingerprint_verify(alien, scanner, rng), Error);
    }
}
