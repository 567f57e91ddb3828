#include "doctest.h"

#include <algorithm>
#include <numeric>
#include <random>
#include <sstream>

#include "certkit/bench.hpp"
#include "certkit/errors.hpp"

using namespace certkit;

TEST_CASE("trimmed mean")
{
    std::vector<double> one_to_twenty(20);
    std::iota(one_to_twenty.begin(), one_to_twenty.end(), 1.0);
    CHECK(trimmed_mean(one_to_twenty, 0.05) == 10.5);

    const std::vector<double> v{4.0, 1.0, 9.0, 2.0};
    CHECK(trimmed_mean(v, 0.0) == 4.0);
    CHECK(trimmed_mean(std::vector<double>(7, 3.25), 0.2) == 3.25);

    // 10% of 25 rounds down to 2 per tail.
    std::vector<double> w(25);
    std::iota(w.begin(), w.end(), 0.0);
    w[0] = -1000.0;
    w[24] = 1000.0;
    CHECK(trimmed_mean(w, 0.1) == 12.0);

    CHECK_THROWS_AS(trimmed_mean(std::vector<double>{}, 0.05), Error);
    CHECK_THROWS_AS(trimmed_mean(v, 0.5), Error);
}

TEST_CASE("trimmed mean is permutation invariant and bounded")
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int round = 0; round < 100; ++round) {
        std::vector<double> s(1 + rng() % 60);
        for (double& x : s) {
            x = u(rng);
        }
        const double f = (rng() % 50) / 100.0;
        const double m = trimmed_mean(s, f);
        std::shuffle(s.begin(), s.end(), rng);
        CHECK(trimmed_mean(s, f) == doctest::Approx(m));
        CHECK(m >= *std::min_element(s.begin(), s.end()));
        CHECK(m <= *std::max_element(s.begin(), s.end()));
    }
}

TEST_CASE("default schedule")
{
    const auto sizes = default_leaf_sizes();
    CHECK(sizes.size() == 30);
    CHECK(sizes.front() == 10);
    CHECK(sizes.back() == 2000);
    CHECK(std::is_sorted(sizes.begin(), sizes.end()));
    for (std::uint64_t n : {10, 57, 100, 157, 200, 257, 900, 957, 1000, 1100, 1157, 1300, 1357, 1500, 1557, 1700,
                            1757, 2000}) {
        CHECK(std::find(sizes.begin(), sizes.end(), n) != sizes.end());
    }
}

TEST_CASE("payloads depend only on seed and size")
{
    CHECK(bench_payloads(42, 57, 32) == bench_payloads(42, 57, 32));
    CHECK(bench_payloads(42, 57, 32) != bench_payloads(43, 57, 32));
    CHECK(bench_payloads(42, 57, 32).size() == 57);
}

TEST_CASE("bench rows and CSV")
{
    BenchConfig config;
    config.leaf_sizes = {100, 10, 57};
    config.iterations = 50;
    config.warmup = 5;
    const auto gen = bench_generation(config);
    const auto proof = bench_proof_extraction(config);
    REQUIRE(gen.size() == 3);
    REQUIRE(proof.size() == 3);
    CHECK(gen[0].n == 10);
    CHECK(gen[2].n == 100);
    for (const auto& r : gen) {
        CHECK(r.op == "gen");
        CHECK(r.raw_count == 50);
        CHECK(r.trimmed_mean_ms > 0.0);
    }
    std::ostringstream out;
    write_bench_csv(out, proof);
    CHECK(out.str().starts_with("op,N,trimmed_mean_ms,iterations\nproof,10,"));

    config.iterations = 0;
    CHECK_THROWS_AS(bench_generation(config), Error);
}

TEST_CASE("linear fit")
{
    const std::vector<double> x{1, 2, 3, 4};
    CHECK(linear_fit_r2(x, std::vector<double>{3, 5, 7, 9}) == doctest::Approx(1.0));
    CHECK(linear_fit_r2(x, std::vector<double>{1, -1, 1, -1}) < 0.5);
    CHECK_THROWS_AS(linear_fit_r2(x, std::vector<double>{1}), Error);
}
