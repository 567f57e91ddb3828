#pragma once

#include <cstdint>
#include <vector>

#include "certkit/digest.hpp"
#include "certkit/hasher.hpp"

namespace certkit {

/// Position of the sibling relative to the running digest.
/// Left means the running digest is the right operand: H(sibling || running).
enum class Side : std::uint8_t { Left, Right };

struct ProofStep {
    Side side = Side::Left;
    Digest sibling;
    std::uint64_t sibling_index = 0;

    friend bool operator==(const ProofStep&, const ProofStep&) = default;
};

/// Sibling path in leaf-to-root order.
///
/// multi_index is empty for proofs taken from a single tree; for proofs that
/// cross levels of a multi-level tree it holds the full vector index of the
/// leaf and leaf_index is its last entry.
struct MerkleProof {
    std::uint64_t leaf_index = 0;
    std::vector<std::uint64_t> multi_index;
    std::vector<ProofStep> steps;
    Digest expected_root;

    friend bool operator==(const MerkleProof&, const MerkleProof&) = default;
};

Digest compute_root(const Digest& leaf_digest, const MerkleProof& proof,
                    const Hasher& hasher = {});

/// Single-tree proofs only: each sibling index must sit where the index
/// arithmetic puts it. This also rejects a flipped side on a step whose
/// sibling is a replica, which hashing alone cannot detect. Always true for
/// multi-level proofs.
bool proof_indexes_consistent(const MerkleProof& proof) noexcept;

/// Hashes `data`, folds it through the proof and compares with the root read
/// from the chain; also requires proof_indexes_consistent. A mismatch is a false return, never an error.
bool verify_proof(ByteView data, const MerkleProof& proof, const Digest& onchain_root,
                  const Hasher& hasher = {});

} // namespace certkit
