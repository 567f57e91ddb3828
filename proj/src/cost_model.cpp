#include "certkit/cost_model.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>

#include "certkit/errors.hpp"

namespace certkit {

namespace {

void validate(const CostParams& params)
{
    if (params.n_items == 0) {
        throw Error(Errc::InvalidArgument, "N must be at least 1");
    }
    if (!(params.c_hash >= 0.0 && params.p >= 0.0 && params.d >= 0.0)) {
        throw Error(Errc::InvalidArgument, "cost parameters must be non-negative");
    }
}

CostBreakdown summed(CostBreakdown b)
{
    b.total = b.generation + b.storage + b.transaction + b.verification;
    return b;
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

} // namespace

CostBreakdown cost_single(const CostParams& params)
{
    validate(params);
    const double n = static_cast<double>(params.n_items);
    CostBreakdown b;
    b.generation = n * params.c_hash;
    b.transaction = n * params.p;
    b.verification = params.c_hash;
    return summed(b);
}

CostBreakdown cost_merkle(const CostParams& params)
{
    validate(params);
    const double n = static_cast<double>(params.n_items);
    const double s = 2.0 * n - 1.0;
    CostBreakdown b;
    b.generation = s * params.c_hash;
    b.storage = s * params.d;
    b.transaction = params.p;
    b.verification = std::log2(n) * params.c_hash;
    return summed(b);
}

double poa_price(double p, std::span<const std::uint32_t> failures, bool multilevel)
{
    if (failures.empty()) {
        throw Error(Errc::InvalidArgument, "at least one attraction is required");
    }
    if (multilevel) {
        return p;
    }
    double attempts = 0.0;
    for (std::uint32_t f : failures) {
        attempts += 1.0 + f;
    }
    return p * attempts;
}

std::vector<CostRow> cost_table(std::span<const std::uint64_t> n_list, const CostParams& base)
{
    std::vector<CostRow> rows;
    rows.reserve(n_list.size());
    for (std::uint64_t n : n_list) {
        CostParams params = base;
        params.n_items = n;
        rows.push_back(CostRow{n, cost_single(params), cost_merkle(params)});
    }
    return rows;
}

void write_cost_csv(std::ostream& out, std::span<const CostRow> rows)
{
    out << "approach,N,generation,storage,transaction,verification,total\n";
    for (const CostRow& r : rows) {
        for (const auto& [name, b] : {std::pair{"single", &r.single}, std::pair{"merkle", &r.merkle}}) {
            out << name << ',' << r.n << ',' << fmt(b->generation) << ',' << fmt(b->storage) << ','
                << fmt(b->transaction) << ',' << fmt(b->verification) << ',' << fmt(b->total) << '\n';
        }
    }
}

void write_cost_text(std::ostream& out, std::span<const CostRow> rows)
{
    char line[256];
    std::snprintf(line, sizeof line, "%-8s %8s %12s %12s %12s %12s %12s\n", "approach", "N", "generation",
                  "storage", "transaction", "verification", "total");
    out << line;
    for (const CostRow& r : rows) {
        for (const auto& [name, b] : {std::pair{"single", &r.single}, std::pair{"merkle", &r.merkle}}) {
            std::snprintf(line, sizeof line, "%-8s %8llu %12s %12s %12s %12s %12s\n", name,
                          static_cast<unsigned long long>(r.n), fmt(b->generation).c_str(),
                          fmt(b->storage).c_str(), fmt(b->transaction).c_str(), fmt(b->verification).c_str(),
                          fmt(b->total).c_str());
            out << line;
        }
    }
}

} // namespace certkit
