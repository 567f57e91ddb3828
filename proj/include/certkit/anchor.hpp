#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "certkit/digest.hpp"
#include "certkit/multilevel_tree.hpp"
#include "certkit/tree_json.hpp"

namespace certkit {

struct AnchorReceipt {
    std::string tx_id;  // empty when rejected
    bool accepted = false;
    Timestamp block_time = 0;
    double gas_price_paid = 0.0;

    friend bool operator==(const AnchorReceipt&, const AnchorReceipt&) = default;
};

struct TxView {
    Bytes data;
    Timestamp block_time = 0;
};

/// Seam between the pipeline and whatever chain stores the certification data.
class AnchorClient {
public:
    virtual ~AnchorClient() = default;

    /// A refusal is a receipt with accepted=false; errors are reserved for
    /// requests that can never succeed (e.g. oversize data).
    virtual AnchorReceipt submit_tx(ByteView data, double gas_price) = 0;

    /// Throws Errc::TxNotFound ("transaction not located") for unknown ids.
    virtual TxView get_tx(const std::string& tx_id) const = 0;
};

struct GasStep {
    std::uint64_t from_submission = 0;
    double min_gas_price = 0.0;
};

struct ChainConfig {
    std::uint64_t seed = 42;
    // Piecewise-constant minimum gas price indexed by submission ordinal.
    std::vector<GasStep> gas_schedule{{0, 1.0}};
    // Independent congestion failure probability. The default is arbitrary.
    double extra_failure_rate = 0.1;
    std::size_t max_data_bytes = 1024;
    Timestamp genesis_time = 1'700'000'000;
    Timestamp block_interval = 12;
};

/// Deterministic stand-in for a public chain.
///
/// A submission is refused when its gas price is below the scheduled minimum
/// or when a seeded Bernoulli draw fires. Exactly one draw is consumed per
/// submission, so (seed, schedule, call sequence) fix every receipt.
/// Single writer; concurrent readers are fine while no submission runs.
class SimulatedChain final : public AnchorClient {
public:
    explicit SimulatedChain(ChainConfig config = {});

    AnchorReceipt submit_tx(ByteView data, double gas_price) override;
    TxView get_tx(const std::string& tx_id) const override;

    const ChainConfig& config() const noexcept { return config_; }
    double min_gas_price() const noexcept { return min_gas_price_at(submissions_); }
    double min_gas_price_at(std::uint64_t ordinal) const noexcept;
    std::uint64_t submissions() const noexcept { return submissions_; }
    std::size_t accepted_count() const noexcept { return ledger_.size(); }
    Timestamp now() const noexcept { return clock_; }

    /// Network conditions may change between runs; the draw sequence does not.
    void set_extra_failure_rate(double rate);
    void set_gas_schedule(std::vector<GasStep> schedule);

    Json dump() const;
    static SimulatedChain restore(const Json& j);

    void save(const std::filesystem::path& path) const;
    static SimulatedChain load(const std::filesystem::path& path);

private:
    struct Entry {
        Bytes data;
        Timestamp block_time = 0;
        double gas_price = 0.0;
        std::uint64_t ordinal = 0;
    };

    ChainConfig config_;
    std::mt19937_64 rng_;
    std::uint64_t submissions_ = 0;
    Timestamp clock_ = 0;
    std::map<std::string, Entry> ledger_;
};

} // namespace certkit
