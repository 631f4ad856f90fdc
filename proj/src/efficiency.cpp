#include "spoq/efficiency.hpp"

#include <iomanip>
#include <sstream>

#include "spoq/ledger.hpp"

namespace spoq::eff {

void LifecycleScenario::validate() const {
    if (b1 == 0)
        fail(Errc::ScenarioInvalid, "at least one root batch is required");
    if (b2 > 0 && p < b2)
        fail(Errc::ScenarioInvalid, "cannot split " + std::to_string(p) + " products into " +
                                        std::to_string(b2) + " non-empty sub-batches");
}

std::uint64_t tx_ex(const LifecycleScenario& s) {
    s.validate();
    return s.p * (1 + s.a1 + s.o1 + s.a2 + s.o2);
}

std::uint64_t tx_spoq(const LifecycleScenario& s) {
    s.validate();
    const std::uint64_t root_phase = s.b1 * (1 + s.a1 + s.o1);
    if (s.b2 != 0)
        return root_phase + s.b2 * (1 + s.a2 + s.o2);
    return root_phase + s.b1 * (s.a2 + s.o2);
}

std::size_t asset_entry_size(std::uint64_t actions, std::uint64_t owners, bool parented) {
    if (owners == 0)
        throw std::invalid_argument("asset entries have at least one owner");
    // Entry sizes depend only on the counts and the parent flag, never on
    // the concrete byte values, so a synthetic entry measures exactly.
    AssetEntry entry;
    entry.kind = AssetKind::Batch;
    entry.storage.address.bytes.fill(0x11);
    entry.storage.hash.fill(0x22);
    UserAddress owner;
    owner.bytes.fill(0x33);
    entry.owners.assign(owners, owner);
    StorageRef action;
    action.address.bytes.fill(0x44);
    action.hash.fill(0x55);
    entry.actions.assign(actions, action);
    if (parented) {
        LedgerAddress parent;
        parent.bytes.fill(0x66);
        entry.parent = parent;
    }
    return canonical_serialize(entry).size();
}

Calibration calibrate() {
    Calibration c;
    c.base_root = asset_entry_size(0, 1, false);
    c.base_child = asset_entry_size(0, 1, true);
    c.delta_action = asset_entry_size(1, 1, false) - c.base_root;
    c.delta_owner = asset_entry_size(0, 2, false) - c.base_root;
    return c;
}

StorageTotals storage_model(const LifecycleScenario& s) {
    s.validate();
    StorageTotals totals;
    totals.ex = s.p * asset_entry_size(s.a1 + s.a2, 1 + s.o1 + s.o2, false);
    if (s.b2 != 0)
        totals.spoq = s.b1 * asset_entry_size(s.a1, 1 + s.o1, false) +
                      s.b2 * asset_entry_size(s.a2, 1 + s.o2, true);
    else
        totals.spoq = s.b1 * asset_entry_size(s.a1 + s.a2, 1 + s.o1 + s.o2, false);
    return totals;
}

CostReport analytic_report(const LifecycleScenario& s) {
    const StorageTotals stor = storage_model(s);
    CostReport report;
    report.tx_ex = tx_ex(s);
    report.tx_spoq = tx_spoq(s);
    report.stor_ex = stor.ex;
    report.stor_spoq = stor.spoq;
    report.source = Source::Analytic;
    return report;
}

// ---------------------------------------------------------------------------
// Ledger-backed simulation
// ---------------------------------------------------------------------------

namespace {

using namespace spoq::ledger;

StorageRef synthetic_ref(std::uint64_t counter) {
    const Bytes seed = concat({to_bytes(std::string_view("sim-entry-")),
                               crypto::sha256(to_bytes(std::to_string(counter)))});
    StorageRef ref;
    ref.address = derive_storage_address(backend::kContentStore, seed);
    ref.hash = crypto::sha256(seed);
    return ref;
}

ByteArray<16> synthetic_salt(std::uint64_t counter) {
    const Hash32 h = crypto::sha256(to_bytes("sim-salt-" + std::to_string(counter)));
    return to_array<16>(ByteView(h).subspan(0, 16));
}

// Drives one lifecycle through a private ledger. Every logical event is a
// single-call transaction so measured counts line up with the analytic
// equations; user registrations happen before the baseline snapshot.
class Simulation {
public:
    Simulation(const LifecycleScenario& s, Mode mode, crypto::Rng& rng)
        : scenario_(s), mode_(mode), rng_(rng), consortium_(crypto::keygen(rng)),
          ledger_(consortium_.pub) {
        // The producer also holds the intermediary role so splitting works
        // for scenarios without transfers (o1 = 0).
        producer_ = register_user("SimProducer", {Role::Producer, Role::Intermediary});
        intermediaries_.push_back(register_user("SimCarrierA", {Role::Intermediary}));
        intermediaries_.push_back(register_user("SimCarrierB", {Role::Intermediary}));
        for (int i = 0; i < 4; ++i)
            customers_.push_back(crypto::keygen(rng_)); // unregistered end customers
        baseline_tx_ = ledger_.metrics().transaction_count;
    }

    SimResult run() {
        if (mode_ == Mode::ProductWise)
            run_product_wise();
        else
            run_batched();
        SimResult result;
        result.transactions = ledger_.metrics().transaction_count - baseline_tx_;
        result.asset_bytes = ledger_.metrics().asset_bytes;
        result.series = std::move(series_);
        return result;
    }

    const Ledger& ledger() const { return ledger_; }

private:
    crypto::KeyPair register_user(const std::string& name, std::vector<Role> roles) {
        const crypto::KeyPair kp = crypto::keygen(rng_);
        RegisterUserArgs args{name, std::move(roles), kp.pub};
        Transaction tx;
        tx.calls = {args};
        tx.payload_hash = payload_hash(tx.calls);
        tx.auth = {make_consortium_auth(tx.payload_hash, consortium_)};
        ledger_.submit(tx);
        return kp;
    }

    void record_event() {
        series_.emplace_back(ledger_.metrics().transaction_count - baseline_tx_,
                             ledger_.metrics().asset_bytes);
    }

    Receipt submit_event(std::vector<FunctionCall> calls, std::vector<Authenticator> auth) {
        Transaction tx;
        tx.calls = std::move(calls);
        tx.payload_hash = payload_hash(tx.calls);
        tx.auth = std::move(auth);
        const Receipt receipt = ledger_.submit(tx);
        record_event();
        return receipt;
    }

    LedgerAddress create_asset(AssetKind kind, const crypto::KeyPair& owner) {
        CreateAssetArgs args{kind, synthetic_ref(counter_), owner.pub,
                             synthetic_salt(counter_)};
        ++counter_;
        const Hash32 payload = payload_hash({FunctionCall{args}});
        const Receipt receipt = submit_event(
            {args}, {make_role_auth(payload, Role::Producer, ledger_.role_keys(Role::Producer),
                                    producer_, rng_)});
        return receipt.results.at(0).created.at(0);
    }

    void log_action(const LedgerAddress& asset, const crypto::KeyPair& owner) {
        LogActionArgs args{asset, synthetic_ref(counter_)};
        ++counter_;
        const Hash32 payload = payload_hash({FunctionCall{args}});
        submit_event({args}, {make_owner_auth(payload, owner)});
    }

    void transfer(const LedgerAddress& asset, const crypto::KeyPair& from,
                  const crypto::KeyPair& to) {
        TransferOwnershipArgs args{asset, to.pub};
        const Hash32 payload = payload_hash({FunctionCall{args}});
        submit_event({args}, {make_owner_auth(payload, from)});
    }

    LedgerAddress split_one(const LedgerAddress& parent, const crypto::KeyPair& owner) {
        SplitBatchArgs args{parent, {SubBatch{synthetic_ref(counter_), owner.pub,
                                              synthetic_salt(counter_)}}};
        ++counter_;
        const Hash32 payload = payload_hash({FunctionCall{args}});
        const Receipt receipt = submit_event(
            {args},
            {make_role_auth(payload, Role::Intermediary, ledger_.role_keys(Role::Intermediary),
                            owner, rng_),
             make_owner_auth(payload, owner)});
        return receipt.results.at(0).created.at(0);
    }

    // Runs `transfers` ownership hops starting from `owner`, cycling through
    // `pool`; returns the final owner.
    crypto::KeyPair transfer_chain(const LedgerAddress& asset, crypto::KeyPair owner,
                                   const std::vector<crypto::KeyPair>& pool,
                                   std::uint64_t transfers) {
        for (std::uint64_t i = 0; i < transfers; ++i) {
            const crypto::KeyPair& next = pool[i % pool.size()];
            transfer(asset, owner, next);
            owner = next;
        }
        return owner;
    }

    void run_product_wise() {
        for (std::uint64_t i = 0; i < scenario_.p; ++i) {
            const LedgerAddress product = create_asset(AssetKind::Product, producer_);
            crypto::KeyPair owner = producer_;
            for (std::uint64_t a = 0; a < scenario_.a1; ++a)
                log_action(product, owner);
            owner = transfer_chain(product, owner, intermediaries_, scenario_.o1);
            for (std::uint64_t a = 0; a < scenario_.a2; ++a)
                log_action(product, owner);
            transfer_chain(product, owner, customers_, scenario_.o2);
        }
    }

    void run_batched() {
        std::vector<LedgerAddress> roots;
        std::vector<crypto::KeyPair> root_owners;
        for (std::uint64_t b = 0; b < scenario_.b1; ++b) {
            const LedgerAddress root = create_asset(AssetKind::Batch, producer_);
            crypto::KeyPair owner = producer_;
            for (std::uint64_t a = 0; a < scenario_.a1; ++a)
                log_action(root, owner);
            owner = transfer_chain(root, owner, intermediaries_, scenario_.o1);
            roots.push_back(root);
            root_owners.push_back(owner);
        }
        if (scenario_.b2 == 0) {
            for (std::uint64_t b = 0; b < scenario_.b1; ++b) {
                crypto::KeyPair owner = root_owners[b];
                for (std::uint64_t a = 0; a < scenario_.a2; ++a)
                    log_action(roots[b], owner);
                transfer_chain(roots[b], owner, customers_, scenario_.o2);
            }
            return;
        }
        for (std::uint64_t j = 0; j < scenario_.b2; ++j) {
            const std::size_t r = j % roots.size();
            const crypto::KeyPair& splitter = root_owners[r];
            const LedgerAddress sub = split_one(roots[r], splitter);
            crypto::KeyPair owner = splitter;
            for (std::uint64_t a = 0; a < scenario_.a2; ++a)
                log_action(sub, owner);
            transfer_chain(sub, owner, customers_, scenario_.o2);
        }
    }

    LifecycleScenario scenario_;
    Mode mode_;
    crypto::Rng& rng_;
    crypto::KeyPair consortium_;
    Ledger ledger_;
    crypto::KeyPair producer_;
    std::vector<crypto::KeyPair> intermediaries_;
    std::vector<crypto::KeyPair> customers_;
    std::uint64_t counter_ = 0;
    std::uint64_t baseline_tx_ = 0;
    std::vector<std::pair<std::uint64_t, std::uint64_t>> series_;
};

} // namespace

SimResult run_simulation(const LifecycleScenario& s, Mode mode, crypto::Rng& rng) {
    s.validate();
    Simulation sim(s, mode, rng);
    return sim.run();
}

CostReport measured_report(const LifecycleScenario& s, crypto::Rng& rng) {
    const SimResult pw = run_simulation(s, Mode::ProductWise, rng);
    const SimResult batched = run_simulation(s, Mode::Batched, rng);
    CostReport report;
    report.tx_ex = pw.transactions;
    report.stor_ex = pw.asset_bytes;
    report.tx_spoq = batched.transactions;
    report.stor_spoq = batched.asset_bytes;
    report.source = Source::Measured;
    return report;
}

// ---------------------------------------------------------------------------
// CSV emission
// ---------------------------------------------------------------------------

namespace {

std::string format_factor(double value) {
    if (value <= 0.0)
        return "";
    std::ostringstream out;
    out << std::fixed << std::setprecision(6) << value;
    return out.str();
}

} // namespace

std::string emit_report(const std::vector<ReportRow>& rows) {
    if (rows.empty())
        fail(Errc::EmptyInput, "no report rows");
    std::ostringstream out;
    out << "label,p,b1,b2,a1,o1,a2,o2,source,event_index,"
           "tx_ex,tx_spoq,stor_ex,stor_spoq,factor_tx,factor_stor\r\n";
    for (const ReportRow& row : rows) {
        const LifecycleScenario& s = row.scenario;
        const CostReport& r = row.report;
        out << row.label << ',' << s.p << ',' << s.b1 << ',' << s.b2 << ',' << s.a1 << ','
            << s.o1 << ',' << s.a2 << ',' << s.o2 << ','
            << (r.source == Source::Analytic ? "analytic" : "measured") << ',';
        if (row.event_index)
            out << *row.event_index;
        out << ',' << r.tx_ex << ',' << r.tx_spoq << ',' << r.stor_ex << ',' << r.stor_spoq
            << ',' << format_factor(r.tx_factor()) << ',' << format_factor(r.stor_factor())
            << "\r\n";
    }
    return out.str();
}

std::vector<ReportRow> table_sweep(bool measured, crypto::Rng& rng) {
    std::vector<ReportRow> rows;
    for (const std::uint64_t p : {50ull, 100ull, 150ull, 200ull}) {
        for (const std::uint64_t b2 : {10ull, 0ull}) {
            LifecycleScenario s;
            s.p = p;
            s.b2 = b2;
            rows.push_back({"table3", s, std::nullopt, analytic_report(s)});
            if (measured)
                rows.push_back({"table3", s, std::nullopt, measured_report(s, rng)});
        }
    }
    return rows;
}

std::vector<ReportRow> lifecycle_series(const LifecycleScenario& s, Mode mode,
                                        crypto::Rng& rng) {
    const SimResult sim = run_simulation(s, mode, rng);
    std::vector<ReportRow> rows;
    rows.reserve(sim.series.size());
    const std::string label =
        mode == Mode::ProductWise ? "series-productwise" : "series-batched";
    for (std::size_t i = 0; i < sim.series.size(); ++i) {
        CostReport report;
        report.source = Source::Measured;
        if (mode == Mode::ProductWise) {
            report.tx_ex = sim.series[i].first;
            report.stor_ex = sim.series[i].second;
        } else {
            report.tx_spoq = sim.series[i].first;
            report.stor_spoq = sim.series[i].second;
        }
        rows.push_back({label, s, i + 1, report});
    }
    return rows;
}

std::vector<ReportRow> action_sweep() {
    std::vector<ReportRow> rows;
    for (std::uint64_t a = 0; a <= 50; ++a) {
        for (const std::uint64_t b2 : {10ull, 0ull}) {
            LifecycleScenario s;
            s.p = 200;
            s.b2 = b2;
            s.a1 = a;
            s.a2 = a;
            rows.push_back({"fig7", s, std::nullopt, analytic_report(s)});
        }
    }
    return rows;
}

} // namespace spoq::eff
