#include "certkit/bench.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <random>

#include "certkit/errors.hpp"
#include "certkit/indexed_merkle_tree.hpp"

namespace certkit {

namespace {

using clock_type = std::chrono::steady_clock;

void validate(const BenchConfig& config)
{
    if (config.iterations == 0) {
        throw Error(Errc::InvalidArgument, "iterations must be positive");
    }
    if (!(config.trim_fraction >= 0.0 && config.trim_fraction < 0.5)) {
        throw Error(Errc::InvalidArgument, "trim fraction must lie in [0, 0.5)");
    }
    for (std::uint64_t n : config.leaf_sizes) {
        if (n == 0) {
            throw Error(Errc::InvalidArgument, "leaf sizes must be positive");
        }
    }
}

double elapsed_ms(clock_type::time_point start, clock_type::time_point stop)
{
    return std::chrono::duration<double, std::milli>(stop - start).count();
}

// Keeps the optimiser from discarding benchmarked work.
volatile std::uint8_t g_sink;

std::vector<BenchRow> sorted(std::vector<BenchRow> rows)
{
    std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) { return a.n < b.n; });
    return rows;
}

} // namespace

double trimmed_mean(std::span<const double> samples, double fraction)
{
    if (samples.empty()) {
        throw Error(Errc::InvalidArgument, "trimmed mean of no samples");
    }
    if (!(fraction >= 0.0 && fraction < 0.5)) {
        throw Error(Errc::InvalidArgument, "trim fraction must lie in [0, 0.5)");
    }
    std::vector<double> v(samples.begin(), samples.end());
    std::sort(v.begin(), v.end());
    const auto cut = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(v.size())));
    const auto first = v.begin() + static_cast<std::ptrdiff_t>(cut);
    const auto last = v.end() - static_cast<std::ptrdiff_t>(cut);
    return std::accumulate(first, last, 0.0) / static_cast<double>(last - first);
}

std::vector<std::uint64_t> default_leaf_sizes()
{
    std::vector<std::uint64_t> sizes{10, 57};
    for (std::uint64_t h = 100; h < 1000; h += 100) {
        sizes.push_back(h);
        sizes.push_back(h + 57);
    }
    for (std::uint64_t n : {1000, 1100, 1157, 1300, 1357, 1500, 1557, 1700, 1757, 2000}) {
        sizes.push_back(n);
    }
    return sizes;
}

std::vector<std::vector<std::uint8_t>> bench_payloads(std::uint64_t seed, std::uint64_t n,
                                                      std::size_t payload_bytes)
{
    std::mt19937_64 rng(seed ^ (n * 0x9e3779b97f4a7c15ULL));
    std::vector<std::vector<std::uint8_t>> out(n, std::vector<std::uint8_t>(payload_bytes));
    for (auto& item : out) {
        for (auto& b : item) {
            b = static_cast<std::uint8_t>(rng());
        }
    }
    return out;
}

std::vector<BenchRow> bench_generation(const BenchConfig& config)
{
    validate(config);
    std::vector<BenchRow> rows;
    std::vector<double> samples(config.iterations);
    for (std::uint64_t n : config.leaf_sizes) {
        const auto leaves = bench_payloads(config.rng_seed, n, config.payload_bytes);
        for (std::uint64_t i = 0; i < config.warmup; ++i) {
            g_sink = IndexedMerkleTree::build(leaves).root_digest().bytes[0];
        }
        for (std::uint64_t i = 0; i < config.iterations; ++i) {
            const auto start = clock_type::now();
            const IndexedMerkleTree tree = IndexedMerkleTree::build(leaves);
            const auto stop = clock_type::now();
            g_sink = tree.root_digest().bytes[0];
            samples[i] = elapsed_ms(start, stop);
        }
        rows.push_back(BenchRow{"gen", n, trimmed_mean(samples, config.trim_fraction), config.iterations});
    }
    return sorted(std::move(rows));
}

std::vector<BenchRow> bench_proof_extraction(const BenchConfig& config)
{
    validate(config);
    std::vector<BenchRow> rows;
    std::vector<double> samples(config.iterations);
    std::vector<std::uint64_t> targets(config.iterations);
    for (std::uint64_t n : config.leaf_sizes) {
        const IndexedMerkleTree tree =
            IndexedMerkleTree::build(bench_payloads(config.rng_seed, n, config.payload_bytes));
        std::mt19937_64 rng(config.rng_seed + n);
        std::uniform_int_distribution<std::uint64_t> pick(0, n - 1);
        for (auto& t : targets) {
            t = leaf_index_of_position(pick(rng) + 1);
        }
        for (std::uint64_t i = 0; i < config.warmup; ++i) {
            g_sink = static_cast<std::uint8_t>(tree.extract_proof(targets[i % targets.size()]).steps.size());
        }
        for (std::uint64_t i = 0; i < config.iterations; ++i) {
            const auto start = clock_type::now();
            const MerkleProof proof = tree.extract_proof(targets[i]);
            const auto stop = clock_type::now();
            g_sink = static_cast<std::uint8_t>(proof.steps.size());
            samples[i] = elapsed_ms(start, stop);
        }
        rows.push_back(BenchRow{"proof", n, trimmed_mean(samples, config.trim_fraction), config.iterations});
    }
    return sorted(std::move(rows));
}

void write_bench_csv(std::ostream& out, std::span<const BenchRow> rows)
{
    out << "op,N,trimmed_mean_ms,iterations\n";
    char buf[64];
    for (const BenchRow& r : rows) {
        std::snprintf(buf, sizeof buf, "%.9g", r.trimmed_mean_ms);
        out << r.op << ',' << r.n << ',' << buf << ',' << r.raw_count << '\n';
    }
}

double linear_fit_r2(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) {
        throw Error(Errc::InvalidArgument, "linear fit needs two or more paired samples");
    }
    const double n = static_cast<double>(x.size());
    const double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
    const double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
    double sxx = 0.0;
    double sxy = 0.0;
    double syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - mx) * (x[i] - mx);
        sxy += (x[i] - mx) * (y[i] - my);
        syy += (y[i] - my) * (y[i] - my);
    }
    if (sxx == 0.0) {
        throw Error(Errc::InvalidArgument, "linear fit needs distinct x values");
    }
    if (syy == 0.0) {
        return 1.0;
    }
    return (sxy * sxy) / (sxx * syy);
}

} // namespace certkit
