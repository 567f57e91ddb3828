#pragma once

// Reference implementations used only by tests. They deliberately avoid the
// library's index arithmetic so they can catch mistakes in it.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "certkit/digest.hpp"
#include "certkit/hasher.hpp"
#include "certkit/indexed_merkle_tree.hpp"
#include "certkit/merkle_proof.hpp"

namespace certkit::testing {

/// Recursive pairwise hashing; the last element of an odd level is duplicated.
inline Digest oracle_root(std::vector<Digest> level)
{
    if (level.size() == 1) {
        return level.front();
    }
    if (level.size() % 2 != 0) {
        level.push_back(level.back());
    }
    std::vector<Digest> up;
    for (std::size_t i = 0; i < level.size(); i += 2) {
        Bytes cat(level[i].bytes.begin(), level[i].bytes.end());
        cat.insert(cat.end(), level[i + 1].bytes.begin(), level[i + 1].bytes.end());
        up.push_back(sha256(cat));
    }
    return oracle_root(std::move(up));
}

inline std::vector<Digest> oracle_leaves(const std::vector<Bytes>& items)
{
    std::vector<Digest> out;
    for (const Bytes& b : items) {
        out.push_back(sha256(b));
    }
    return out;
}

/// Naive proof: scans every node (depth-first, no index comparisons) to find
/// the non-duplicated leaf with the given index, then reads siblings off the
/// recorded path.
inline std::optional<MerkleProof> oracle_proof_full_scan(const IndexedMerkleTree& tree,
                                                         std::uint64_t leaf_index)
{
    std::vector<NodeId> path;
    std::vector<NodeId> found;
    auto dfs = [&](auto&& self, NodeId id) -> void {
        path.push_back(id);
        const TreeNode& n = tree.node(id);
        if (n.is_leaf()) {
            if (!n.duplicated && n.index == leaf_index && found.empty()) {
                found = path;
            }
        } else {
            self(self, n.left);
            self(self, n.right);
        }
        path.pop_back();
    };
    dfs(dfs, tree.root_id());
    if (found.empty()) {
        return std::nullopt;
    }
    MerkleProof proof;
    proof.leaf_index = leaf_index;
    proof.expected_root = tree.root_digest();
    for (std::size_t d = found.size() - 1; d > 0; --d) {
        const TreeNode& parent = tree.node(found[d - 1]);
        if (parent.left == found[d]) {
            const TreeNode& sib = tree.node(parent.right);
            proof.steps.push_back(ProofStep{Side::Right, sib.value, sib.index});
        } else {
            const TreeNode& sib = tree.node(parent.left);
            proof.steps.push_back(ProofStep{Side::Left, sib.value, sib.index});
        }
    }
    return proof;
}

/// Bracket rendering of the index layout: [8 [4 ..] [12 ..]]
inline std::string render_layout(const IndexedMerkleTree& t, NodeId id)
{
    const TreeNode& n = t.node(id);
    std::string s = "[" + std::to_string(n.index);
    if (!n.is_leaf()) {
        s += " " + render_layout(t, n.left) + " " + render_layout(t, n.right);
    }
    return s + "]";
}

inline std::string render_layout(const IndexedMerkleTree& t)
{
    return render_layout(t, t.root_id());
}

inline unsigned ceil_log2(std::uint64_t n)
{
    unsigned h = 0;
    while ((std::uint64_t{1} << h) < n) {
        ++h;
    }
    return h;
}

inline std::vector<Bytes> random_items(std::size_t n, std::mt19937_64& rng,
                                       std::size_t min_len = 1, std::size_t max_len = 48)
{
    std::uniform_int_distribution<std::size_t> len(min_len, max_len);
    std::uniform_int_distribution<int> byte(0, 255);
    std::vector<Bytes> items(n);
    for (Bytes& b : items) {
        b.resize(len(rng));
        for (auto& x : b) {
            x = static_cast<std::uint8_t>(byte(rng));
        }
    }
    return items;
}

inline std::vector<Bytes> named_items(std::size_t n)
{
    std::vector<Bytes> items;
    for (std::size_t k = 1; k <= n; ++k) {
        items.push_back(to_bytes("d" + std::to_string(k)));
    }
    return items;
}

} // namespace certkit::testing
