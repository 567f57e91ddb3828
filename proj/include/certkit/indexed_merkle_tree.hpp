#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "certkit/digest.hpp"
#include "certkit/hasher.hpp"
#include "certkit/merkle_proof.hpp"

namespace certkit {

/// Index of the parent whose left child has index `left_index` and whose
/// children sit at height `child_height`: left_index + 2^child_height.
constexpr std::uint64_t parent_index(std::uint64_t left_index, unsigned child_height) noexcept
{
    return left_index + (std::uint64_t{1} << child_height);
}

/// The k-th leaf (1-based) carries index 2k-1.
constexpr std::uint64_t leaf_index_of_position(std::uint64_t position) noexcept
{
    return 2 * position - 1;
}

constexpr std::uint64_t leaf_position_of_index(std::uint64_t leaf_index) noexcept
{
    return (leaf_index + 1) / 2;
}

using NodeId = std::uint32_t;
inline constexpr NodeId kNoNode = static_cast<NodeId>(-1);

struct TreeNode {
    std::uint64_t index = 0;
    Digest value;
    NodeId left = kNoNode;
    NodeId right = kNoNode;
    // Replica of the last node of an odd layer: same index and value, no children.
    bool duplicated = false;

    bool is_leaf() const noexcept { return left == kNoNode; }
};

/// Indexed binary hash tree.
///
/// Leaves are numbered 1, 3, 5, ... left to right and every parent gets
/// parent_index(left.index, h). Odd layers longer than one have their last
/// node replicated before pairing. Nodes live in a flat arena; the tree is
/// immutable once built and safe to share between readers.
class IndexedMerkleTree {
public:
    /// Hashes each item to form the leaves. Throws Errc::NoData on empty input.
    static IndexedMerkleTree build(std::span<const Bytes> items, const Hasher& hasher = {});

    /// Uses the digests directly as leaf values (no extra hashing). This is how
    /// subtree roots become leaves of the level above.
    static IndexedMerkleTree from_leaf_digests(std::span<const Digest> leaves,
                                               const Hasher& hasher = {});

    const TreeNode& root() const noexcept { return nodes_[root_]; }
    const Digest& root_digest() const noexcept { return root().value; }
    NodeId root_id() const noexcept { return root_; }
    const TreeNode& node(NodeId id) const { return nodes_.at(id); }
    std::span<const TreeNode> nodes() const noexcept { return nodes_; }

    std::size_t leaf_count() const noexcept { return leaf_count_; }
    /// Includes duplicated replicas.
    std::size_t node_count() const noexcept { return nodes_.size(); }
    unsigned height() const noexcept { return height_; }
    std::size_t duplicate_count() const noexcept;

    /// Original leaf digests in left-to-right order.
    std::vector<Digest> leaf_digests() const;

    /// Root-to-leaf descent by index comparison. Throws Errc::NotLeafIndex for
    /// even indexes and Errc::UnknownLeaf when no such leaf exists. If
    /// `visits` is given it receives the number of nodes touched.
    MerkleProof extract_proof(std::uint64_t leaf_index, std::size_t* visits = nullptr) const;

    /// Digest stored at the leaf with the given index (same descent as extract_proof).
    const Digest& leaf_digest(std::uint64_t leaf_index) const;

    /// Deep structural comparison starting from the roots.
    friend bool operator==(const IndexedMerkleTree& a, const IndexedMerkleTree& b);

private:
    IndexedMerkleTree() = default;

    NodeId locate(std::uint64_t leaf_index, std::vector<ProofStep>* path,
                  std::size_t* visits) const;

    std::vector<TreeNode> nodes_;
    NodeId root_ = 0;
    std::size_t leaf_count_ = 0;
    unsigned height_ = 0;
};

} // namespace certkit
