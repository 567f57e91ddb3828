#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace certkit {

/// Sorts a copy, drops floor(fraction*n) samples from each tail and averages
/// the rest.
double trimmed_mean(std::span<const double> samples, double fraction);

/// 10, 57, 100, 157, ..., 957, 1000, 1100, 1157, 1300, 1357, 1500, 1557,
/// 1700, 1757, 2000.
std::vector<std::uint64_t> default_leaf_sizes();

struct BenchConfig {
    std::vector<std::uint64_t> leaf_sizes = default_leaf_sizes();
    std::uint64_t iterations = 250'000;
    double trim_fraction = 0.05;
    std::uint64_t rng_seed = 42;
    std::uint64_t warmup = 1'000;
    std::size_t payload_bytes = 32;
};

struct BenchRow {
    std::string op;  // "gen" or "proof"
    std::uint64_t n = 0;
    double trimmed_mean_ms = 0.0;
    std::uint64_t raw_count = 0;
};

/// Same seed, same payloads: leaf data depends only on (seed, N).
std::vector<std::vector<std::uint8_t>> bench_payloads(std::uint64_t seed, std::uint64_t n,
                                                      std::size_t payload_bytes);

std::vector<BenchRow> bench_generation(const BenchConfig& config);
std::vector<BenchRow> bench_proof_extraction(const BenchConfig& config);

/// CSV columns: op,N,trimmed_mean_ms,iterations
void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows);

/// Coefficient of determination of the least-squares line through (x, y).
double linear_fit_r2(std::span<const double> x, std::span<const double> y);

} // namespace certkit
