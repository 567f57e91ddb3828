#include "certkit/poa.hpp"

#include <algorithm>
#include <random>
#include <string>

#include "certkit/anchor.hpp"
#include "certkit/cost_model.hpp"
#include "certkit/errors.hpp"
#include "certkit/multilevel_tree.hpp"

namespace certkit {

namespace {

struct Attendance {
    Bytes payload;
    MultiIndex index;
};

Bytes attendance_payload(std::mt19937_64& rng, std::size_t attraction, std::size_t round, std::size_t k)
{
    return to_bytes("attendance a" + std::to_string(attraction) + " r" + std::to_string(round) + " #" +
                    std::to_string(k) + " " + std::to_string(rng()));
}

// Congested rounds raise the floor above what the client pays.
void set_congestion(SimulatedChain& chain, bool congested, double p)
{
    chain.set_gas_schedule({{0, congested ? p + 1.0 : 0.0}});
}

ChainConfig calm_chain(std::uint64_t seed)
{
    ChainConfig c;
    c.seed = seed;
    c.extra_failure_rate = 0.0;
    return c;
}

void record(PoaSpend& s, const AnchorReceipt& r)
{
    ++s.submitted;
    if (r.accepted) {
        ++s.accepted;
        s.spend += r.gas_price_paid;
    } else {
        ++s.rejected;
    }
}

Digest digest_of(const TxView& tx)
{
    if (tx.data.size() != 32) {
        throw Error(Errc::Invariant, "anchored data is not a digest");
    }
    Digest d;
    std::copy(tx.data.begin(), tx.data.end(), d.bytes.begin());
    return d;
}

PoaSpend run_naive(const PoaScenario& s)
{
    PoaSpend out;
    std::mt19937_64 rng(s.seed);
    for (std::size_t i = 0; i < s.failures.size(); ++i) {
        SimulatedChain chain(calm_chain(s.seed + i));
        struct Pending {
            IndexedMerkleTree tree;
            std::vector<Bytes> payloads;
        };
        std::vector<Pending> pending;
        for (std::size_t round = 0; !pending.empty() || round == 0; ++round) {
            std::vector<Bytes> payloads;
            for (std::size_t k = 0; k < s.attendances_per_round; ++k) {
                payloads.push_back(attendance_payload(rng, i, round, k));
            }
            out.attendances += payloads.size();
            IndexedMerkleTree tree = IndexedMerkleTree::build(payloads);
            pending.push_back(Pending{std::move(tree), std::move(payloads)});

            set_congestion(chain, round < s.failures[i], s.p);
            std::vector<Pending> still;
            for (Pending& t : pending) {
                const AnchorReceipt r = chain.submit_tx(t.tree.root_digest().view(), s.p);
                record(out, r);
                if (!r.accepted) {
                    still.push_back(std::move(t));
                    continue;
                }
                const Digest root = digest_of(chain.get_tx(r.tx_id));
                for (std::size_t k = 0; k < t.payloads.size(); ++k) {
                    const MerkleProof proof = t.tree.extract_proof(leaf_index_of_position(k + 1));
                    out.verified += verify_proof(t.payloads[k], proof, root) ? 1 : 0;
                }
            }
            pending = std::move(still);
        }
    }
    return out;
}

PoaSpend run_multilevel(const PoaScenario& s, PoaOutcome& outcome)
{
    PoaSpend out;
    std::mt19937_64 rng(s.seed);
    SimulatedChain chain(calm_chain(s.seed));
    const std::size_t attractions = s.failures.size();
    const std::uint32_t rounds_failing = *std::max_element(s.failures.begin(), s.failures.end());

    std::vector<std::vector<IndexedMerkleTree>> failed(attractions);
    std::vector<Attendance> issued;
    for (std::size_t round = 0;; ++round) {
        std::vector<std::vector<Digest>> fresh(attractions);
        for (std::size_t i = 0; i < attractions; ++i) {
            for (std::size_t k = 0; k < s.attendances_per_round; ++k) {
                Bytes payload = attendance_payload(rng, i, round, k);
                fresh[i].push_back(sha256(payload));
                // Position is fixed before the tree exists.
                const std::uint64_t entries[] = {i, failed[i].size()};
                issued.push_back(
                    Attendance{std::move(payload), assign_multi_index(entries, leaf_index_of_position(k + 1))});
            }
        }
        const MultiLevelTree mlt = build_poa_tree(fresh, failed);

        set_congestion(chain, round < rounds_failing, s.p);
        const AnchorReceipt r = chain.submit_tx(mlt.root().view(), s.p);
        record(out, r);
        if (!r.accepted) {
            for (std::size_t i = 0; i < attractions; ++i) {
                failed[i].clear();
                for (const auto& [prefix, tree] : mlt.subtrees()) {
                    if (prefix.size() == 2 && prefix[0] == 2 * i + 1) {
                        failed[i].push_back(tree);
                    }
                }
            }
            continue;
        }

        const Digest root = digest_of(chain.get_tx(r.tx_id));
        for (const Attendance& a : issued) {
            out.verified += verify_proof(a.payload, mlt.extract_proof(a.index), root) ? 1 : 0;
        }
        out.attendances = issued.size();
        outcome.attempts = mlt.child_count(MultiIndex{1});
        outcome.anchored_root = root;
        return out;
    }
}

} // namespace

PoaOutcome simulate_poa(const PoaScenario& scenario)
{
    if (scenario.failures.empty()) {
        throw Error(Errc::InvalidArgument, "at least one attraction is required");
    }
    if (scenario.attendances_per_round == 0) {
        throw Error(Errc::InvalidArgument, "each round needs at least one attendance");
    }
    if (!(scenario.p >= 0.0)) {
        throw Error(Errc::InvalidArgument, "gas price must be non-negative");
    }
    PoaOutcome outcome;
    outcome.naive = run_naive(scenario);
    outcome.multilevel = run_multilevel(scenario, outcome);
    outcome.naive_formula = poa_price(scenario.p, scenario.failures, false);
    outcome.multilevel_formula = poa_price(scenario.p, scenario.failures, true);
    return outcome;
}

} // namespace certkit
