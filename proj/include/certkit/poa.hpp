#pragma once

#include <cstdint>
#include <vector>

#include "certkit/digest.hpp"

namespace certkit {

/// Proof-of-Attendance round. Attraction i sees its transaction refused
/// during the first failures[i] submission rounds (network congestion);
/// every round brings new attendances for every attraction.
struct PoaScenario {
    std::vector<std::uint32_t> failures;
    std::size_t attendances_per_round = 3;
    double p = 1.0;  // gas price of one transaction
    std::uint64_t seed = 42;
};

struct PoaSpend {
    std::uint64_t submitted = 0;
    std::uint64_t accepted = 0;
    std::uint64_t rejected = 0;
    double spend = 0.0;  // gas paid on accepted transactions
    std::size_t attendances = 0;  // issued under this strategy
    std::size_t verified = 0;
};

struct PoaOutcome {
    PoaSpend naive;       // one tree and one transaction per attraction and round
    PoaSpend multilevel;  // one shared three-level tree, one transaction per round
    double naive_formula = 0.0;
    double multilevel_formula = 0.0;
    std::size_t attempts = 0;  // attempt subtrees per attraction in the final tree
    Digest anchored_root;
};

/// Runs both strategies against seeded simulated chains.
PoaOutcome simulate_poa(const PoaScenario& scenario);

} // namespace certkit
