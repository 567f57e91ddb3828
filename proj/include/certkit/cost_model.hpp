#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace certkit {

/// Costs are in abstract units; `d` is the average stored size of one node.
struct CostParams {
    std::uint64_t n_items = 1;
    double c_hash = 1.0;
    double p = 1.0;
    double d = 0.0;
};

struct CostBreakdown {
    double generation = 0.0;
    double storage = 0.0;
    double transaction = 0.0;
    double verification = 0.0;
    double total = 0.0;
};

/// One transaction per item, nothing stored off-chain.
CostBreakdown cost_single(const CostParams& params);

/// One transaction per batch; S = 2N-1 stored nodes and a real-valued
/// log2(N) verification.
CostBreakdown cost_merkle(const CostParams& params);

/// Spend for a Proof-of-Attendance round: p * sum(1 + F_i) when each
/// attraction retries on its own, p with one shared multi-level tree.
double poa_price(double p, std::span<const std::uint32_t> failures, bool multilevel);

struct CostRow {
    std::uint64_t n = 0;
    CostBreakdown single;
    CostBreakdown merkle;
};

std::vector<CostRow> cost_table(std::span<const std::uint64_t> n_list, const CostParams& base);
void write_cost_csv(std::ostream& out, std::span<const CostRow> rows);
void write_cost_text(std::ostream& out, std::span<const CostRow> rows);

} // namespace certkit
