#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "spoq/crypto.hpp"

namespace spoq::eff {

// Parameter tuple driving both the analytic model and the ledger
// simulation: p products in b1 root batches; a1/o1 actions and transfers
// during the root-batch phase; b2 sub-batches after splitting (0 = no
// splitting) with a2/o2 events each.
struct LifecycleScenario {
    std::uint64_t p = 50;
    std::uint64_t b1 = 1;
    std::uint64_t b2 = 10;
    std::uint64_t a1 = 10;
    std::uint64_t o1 = 10;
    std::uint64_t a2 = 10;
    std::uint64_t o2 = 10;

    void validate() const; // throws ScenarioInvalid

    bool operator==(const LifecycleScenario&) const = default;
};

// Transaction counts for product-wise tracing and for batch-based tracing.
std::uint64_t tx_ex(const LifecycleScenario& s);
std::uint64_t tx_spoq(const LifecycleScenario& s);

// Per-item sizes measured from the canonical encoder. Entry sizes are a
// deterministic function of the action count, owner count, and parent-link
// presence, so the calibrated model reproduces measured ledger bytes
// exactly.
struct Calibration {
    std::size_t base_root = 0;    // minimal entry: one owner, no actions, no parent
    std::size_t base_child = 0;   // same but carrying a parent link
    std::size_t delta_action = 0; // marginal cost of one logged action
    std::size_t delta_owner = 0;  // marginal cost of one ownership transfer
};

Calibration calibrate();

// Exact serialized size of an asset entry with the given shape.
std::size_t asset_entry_size(std::uint64_t actions, std::uint64_t owners, bool parented);

struct StorageTotals {
    std::uint64_t ex = 0;
    std::uint64_t spoq = 0;
};

// Analytic end-of-lifecycle blockchain storage for both approaches.
StorageTotals storage_model(const LifecycleScenario& s);

enum class Mode { ProductWise, Batched };
enum class Source { Analytic, Measured };

struct CostReport {
    std::uint64_t tx_ex = 0;
    std::uint64_t tx_spoq = 0;
    std::uint64_t stor_ex = 0;
    std::uint64_t stor_spoq = 0;
    Source source = Source::Analytic;

    // Unrounded ratios; the integer fields are the exact rationals.
    double tx_factor() const { return tx_spoq ? double(tx_ex) / double(tx_spoq) : 0.0; }
    double stor_factor() const { return stor_spoq ? double(stor_ex) / double(stor_spoq) : 0.0; }
};

CostReport analytic_report(const LifecycleScenario& s);

// One measured lifecycle replayed through the real ledger; every logical
// event is one transaction, matching the analytic count.
struct SimResult {
    std::uint64_t transactions = 0;
    std::uint64_t asset_bytes = 0;
    // Running (transactions, asset_bytes) after each event.
    std::vector<std::pair<std::uint64_t, std::uint64_t>> series;
};

SimResult run_simulation(const LifecycleScenario& s, Mode mode, crypto::Rng& rng);

CostReport measured_report(const LifecycleScenario& s, crypto::Rng& rng);

// One CSV row: a sweep label, the scenario, an optional position on the
// cumulative-event axis, and the costs.
struct ReportRow {
    std::string label;
    LifecycleScenario scenario;
    std::optional<std::uint64_t> event_index;
    CostReport report;
};

// RFC 4180 CSV with a header row; throws EmptyInput on no rows.
std::string emit_report(const std::vector<ReportRow>& rows);

// Table sweep over p in {50,100,150,200} x b2 in {10,0}; analytic always,
// measured when requested.
std::vector<ReportRow> table_sweep(bool measured, crypto::Rng& rng);

// Cumulative per-event series for one scenario/mode (transactions axis).
std::vector<ReportRow> lifecycle_series(const LifecycleScenario& s, Mode mode,
                                        crypto::Rng& rng);

// Sweep over a1 = a2 in [0, 50] at fixed transfers.
std::vector<ReportRow> action_sweep();

} // namespace spoq::eff
