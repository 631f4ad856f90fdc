#pragma once

#include <functional>
#include <map>
#include <optional>
#include <set>

#include "spoq/storage.hpp"
#include "spoq/verify.hpp"
#include "support.hpp"

namespace spoq::test {

// Permissive entry source: serves whatever bytes it holds without
// re-verifying content addresses, like a storage backend that could lie.
// Lets tests exercise the verification pipeline's own integrity checks.
class MapSource final : public storage::EntrySource {
public:
    StorageAddress put(ByteView bytes) {
        const StorageAddress addr = derive_storage_address(backend::kContentStore, bytes);
        blobs_[addr] = to_bytes(bytes);
        return addr;
    }

    void overwrite(const StorageAddress& addr, Bytes bytes) { blobs_[addr] = std::move(bytes); }

    Bytes& at(const StorageAddress& addr) { return blobs_.at(addr); }
    const std::map<StorageAddress, Bytes>& blobs() const { return blobs_; }

    Bytes fetch(const StorageAddress& address) override {
        const auto it = blobs_.find(address);
        if (it == blobs_.end())
            fail(Errc::NotFound, "no blob at " + hex_encode(address.view()));
        return it->second;
    }

private:
    std::map<StorageAddress, Bytes> blobs_;
};

// A generated batch hierarchy driven through the real ledger: a static
// component tree authored by a producer, plus random split/publish
// operations by an intermediary.
struct Hierarchy {
    Bench bench;
    crypto::KeyPair producer;
    crypto::KeyPair producer2; // a different registered producer, for forgeries
    crypto::KeyPair carrier;
    MapSource source;

    struct Item {
        StorageRef ref;
        std::optional<LedgerAddress> ledger;
        bool is_batch = false;
        bool forged_author = false; // authored by producer2 instead of producer
    };
    std::vector<Item> items;
    std::size_t root_index = 0;

    explicit Hierarchy(std::uint64_t seed)
        : bench(seed), producer(bench.register_user("MakerOne", {Role::Producer})),
          producer2(bench.register_user("MakerTwo", {Role::Producer})),
          carrier(bench.register_user("Carrier", {Role::Intermediary})) {}

    const Item& root() const { return items[root_index]; }

    verify::OriginSubject subject_of(const Item& item) {
        return {item.ref, source.fetch(item.ref.address), item.ledger};
    }
};

inline Fingerprint barcode_of(std::uint32_t code) {
    return verify::barcode_fingerprint(to_bytes("code-" + std::to_string(code)));
}

// Builds a random hierarchy of static depth <= 4 and width <= 8 with mixed
// split_batch/publish_component links. When `forge_one_leaf` is set, one
// product entry is authored by a second producer -- hashes stay coherent,
// so only the producer linkage is broken for that leaf.
inline Hierarchy make_hierarchy(std::uint64_t seed, bool forge_one_leaf) {
    Hierarchy h(seed);
    TestRng& rng = h.bench.rng;
    auto pick = [&rng](std::uint32_t bound) {
        std::uint32_t v;
        rng.fill(reinterpret_cast<std::uint8_t*>(&v), sizeof v);
        return v % bound;
    };

    std::vector<std::size_t> product_indices;

    // Static component tree, built bottom-up. Root is at level 0; nesting
    // stops at batch_levels.
    const std::uint32_t batch_levels = 1 + pick(3); // 1..3 batch layers
    std::function<std::size_t(std::uint32_t)> build = [&](std::uint32_t level) -> std::size_t {
        const bool is_product = level >= batch_levels || (level > 0 && pick(3) == 0);
        StorageEntry entry;
        if (is_product) {
            entry = make_product_entry("product-" + std::to_string(h.items.size()), "MakerOne",
                                       barcode_of(pick(100000)), rng);
        } else {
            std::vector<StorageRef> components;
            const std::uint32_t n_children = 1 + pick(4);
            std::vector<std::size_t> children;
            for (std::uint32_t i = 0; i < n_children; ++i)
                children.push_back(build(level + 1));
            for (const std::size_t c : children)
                components.push_back(h.items[c].ref);
            entry = make_batch_entry("batch-" + std::to_string(h.items.size()), "MakerOne",
                                     std::move(components), rng);
        }
        sign_storage_entry(entry, h.producer.secret);
        const Bytes bytes = canonical_serialize(entry);
        Hierarchy::Item item;
        item.ref.address = h.source.put(bytes);
        item.ref.hash = entry_hash(bytes);
        item.is_batch = !is_product;
        h.items.push_back(item);
        if (is_product)
            product_indices.push_back(h.items.size() - 1);
        return h.items.size() - 1;
    };

    // Optionally re-author one product before any batch references it.
    std::optional<std::size_t> forged;
    h.root_index = [&] {
        if (forge_one_leaf) {
            // Build one forged product first so some batch includes it.
            StorageEntry entry = make_product_entry("product-forged", "MakerTwo",
                                                    barcode_of(424242), rng);
            sign_storage_entry(entry, h.producer2.secret);
            const Bytes bytes = canonical_serialize(entry);
            Hierarchy::Item item;
            item.ref.address = h.source.put(bytes);
            item.ref.hash = entry_hash(bytes);
            item.forged_author = true;
            h.items.push_back(item);
            forged = h.items.size() - 1;
            product_indices.push_back(*forged);
        }
        // Root batch listing a generated subtree plus the forged leaf.
        std::vector<StorageRef> components;
        const std::uint32_t n_children = 1 + pick(4);
        for (std::uint32_t i = 0; i < n_children; ++i)
            components.push_back(h.items[build(1)].ref);
        if (forged)
            components.push_back(h.items[*forged].ref);
        StorageEntry entry = make_batch_entry("batch-root", "MakerOne", std::move(components), rng);
        sign_storage_entry(entry, h.producer.secret);
        const Bytes bytes = canonical_serialize(entry);
        Hierarchy::Item item;
        item.ref.address = h.source.put(bytes);
        item.ref.hash = entry_hash(bytes);
        item.is_batch = true;
        h.items.push_back(item);
        return h.items.size() - 1;
    }();

    // Publish the root on the ledger (producer-created root).
    h.items[h.root_index].ledger = h.bench.create_asset(
        AssetKind::Batch, h.items[h.root_index].ref, h.producer, h.carrier.pub);

    // Random split/publish operations over on-ledger batches the carrier
    // owns.
    const std::uint32_t n_ops = pick(4);
    for (std::uint32_t op = 0; op < n_ops; ++op) {
        std::vector<std::size_t> on_ledger_batches;
        for (std::size_t i = 0; i < h.items.size(); ++i)
            if (h.items[i].ledger && h.items[i].is_batch)
                on_ledger_batches.push_back(i);
        if (on_ledger_batches.empty())
            break;
        const std::size_t parent_idx = on_ledger_batches[pick(on_ledger_batches.size())];
        const Hierarchy::Item& parent = h.items[parent_idx];
        const StorageEntry parent_entry = decode_storage_entry(h.source.fetch(parent.ref.address));
        const auto& components = std::get<BatchBody>(parent_entry.body).components;

        if (pick(2) == 0) {
            // Split: a new sub-batch entry covering a subset of the
            // parent's components, authored by the carrier.
            std::vector<StorageRef> subset;
            for (const StorageRef& c : components)
                if (subset.empty() || pick(2) == 0)
                    subset.push_back(c);
            StorageEntry entry = make_batch_entry("split-" + std::to_string(h.items.size()),
                                                  "Carrier", std::move(subset), rng);
            sign_storage_entry(entry, h.carrier.secret);
            const Bytes bytes = canonical_serialize(entry);
            Hierarchy::Item item;
            item.ref.address = h.source.put(bytes);
            item.ref.hash = entry_hash(bytes);
            item.is_batch = true;
            item.ledger = h.bench
                              .split_batch(*parent.ledger,
                                           {ledger::SubBatch{item.ref, h.carrier.pub,
                                                             rng.array<16>()}},
                                           h.carrier)
                              .at(0);
            h.items.push_back(item);
        } else {
            // Publish one not-yet-published component from this parent.
            std::vector<std::size_t> candidates;
            for (std::size_t i = 0; i < h.items.size(); ++i)
                if (!h.items[i].ledger)
                    for (const StorageRef& c : components)
                        if (c == h.items[i].ref)
                            candidates.push_back(i);
            if (candidates.empty())
                continue;
            const std::size_t child_idx = candidates[pick(candidates.size())];
            Hierarchy::Item& child = h.items[child_idx];
            child.ledger = h.bench.publish_component(
                *parent.ledger, child.is_batch ? AssetKind::Batch : AssetKind::Product,
                child.ref, h.carrier, h.carrier.pub);
        }
    }
    return h;
}

// ---------------------------------------------------------------------------
// Brute-force origin oracle
// ---------------------------------------------------------------------------
//
// Independent checker: exhaustively walks every candidate ancestor path,
// validating every component hash and the root/leaf producer linkage by
// direct re-computation. Shares no code with verify::origin.

inline bool bf_origin(const verify::OriginSubject& subject, const ledger::Ledger& ledger,
                      const std::map<StorageAddress, Bytes>& blobs) {
    struct Entry {
        Bytes bytes;
        StorageEntry decoded;
        std::optional<UserAddress> author;
        std::optional<LedgerAddress> ledger_addr;
        std::optional<LedgerAddress> parent;
        std::optional<Hash32> ledger_hash;
    };

    std::map<StorageAddress, Entry> entries;
    auto author_of = [&](const StorageEntry& e) -> std::optional<UserAddress> {
        if (!e.signature)
            return std::nullopt;
        for (const auto& [addr, user] : ledger.users())
            if (user.name == e.author_name && verify_storage_entry_signature(e, user.public_key))
                return user.public_key;
        return std::nullopt;
    };
    auto ingest = [&](const StorageAddress& addr, const Bytes& bytes) {
        try {
            Entry e;
            e.bytes = bytes;
            e.decoded = decode_storage_entry(bytes);
            e.author = author_of(e.decoded);
            entries[addr] = std::move(e);
        } catch (const Error&) {
        }
    };
    for (const auto& [addr, bytes] : blobs)
        ingest(addr, bytes);
    ingest(subject.ref.address, subject.bytes);
    for (const auto& [laddr, asset] : ledger.assets()) {
        const auto it = entries.find(asset.storage.address);
        if (it == entries.end() || it->second.ledger_addr)
            continue;
        it->second.ledger_addr = laddr;
        it->second.parent = asset.parent;
        it->second.ledger_hash = asset.storage.hash;
    }

    const auto subject_it = entries.find(subject.ref.address);
    if (subject_it == entries.end())
        return false;
    const std::optional<UserAddress> subject_author = subject_it->second.author;

    auto lists_with_hash = [&](const Entry& batch, const StorageAddress& addr,
                               const Bytes& bytes) {
        const auto* body = std::get_if<BatchBody>(&batch.decoded.body);
        if (!body)
            return false;
        for (const StorageRef& c : body->components)
            if (c.address == addr)
                return c.hash == crypto::sha256(bytes);
        return false;
    };
    auto intact = [&](const Entry& e) {
        if (!e.author)
            return false;
        if (e.ledger_hash && crypto::sha256(e.bytes) != *e.ledger_hash)
            return false;
        return true;
    };

    std::function<bool(const StorageAddress&, std::vector<StorageAddress>&)> dfs =
        [&](const StorageAddress& head, std::vector<StorageAddress>& trail) -> bool {
        const Entry& h = entries.at(head);
        if (h.ledger_addr && !h.parent) {
            // producer-created root
            if (trail.size() == 1)
                return true;
            return h.author && subject_author && *h.author == *subject_author;
        }
        // candidate parents per the platform's resolution rule: recorded
        // lineage first for published assets, component-list membership for
        // off-ledger components
        std::vector<StorageAddress> candidates;
        if (h.ledger_addr && h.parent) {
            const auto assets = ledger.assets();
            const auto it = assets.find(*h.parent);
            if (it == assets.end())
                return false;
            candidates.push_back(it->second.storage.address);
        } else {
            for (const auto& [addr, e] : entries) {
                const auto* body = std::get_if<BatchBody>(&e.decoded.body);
                if (!body)
                    continue;
                for (const StorageRef& c : body->components)
                    if (c.address == head)
                        candidates.push_back(addr);
            }
        }
        for (const StorageAddress& cand : candidates) {
            const auto it = entries.find(cand);
            if (it == entries.end())
                continue;
            if (std::find(trail.begin(), trail.end(), cand) != trail.end())
                continue;
            const Entry& parent = it->second;
            if (!intact(parent))
                continue;
            bool covered = false;
            for (const StorageAddress& member : trail)
                if (lists_with_hash(parent, member, entries.at(member).bytes)) {
                    covered = true;
                    break;
                }
            if (!covered)
                continue;
            trail.push_back(cand);
            if (dfs(cand, trail))
                return true;
            trail.pop_back();
        }
        return false;
    };

    std::vector<StorageAddress> trail{subject.ref.address};
    return dfs(subject.ref.address, trail);
}

} // namespace spoq::test
