#pragma once

#include <compare>
#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "certkit/digest.hpp"
#include "certkit/hasher.hpp"
#include "certkit/indexed_merkle_tree.hpp"
#include "certkit/merkle_proof.hpp"
#include "certkit/tree_json.hpp"

namespace certkit {

using Timestamp = std::int64_t;

/// Vector index of a node in a multi-level tree. A node living at level l has
/// l+1 entries; every entry but the last is the odd leaf index that the
/// enclosing subtree occupies one level up.
class MultiIndex {
public:
    MultiIndex() = default;
    MultiIndex(std::initializer_list<std::uint64_t> entries) : entries_(entries) {}
    explicit MultiIndex(std::vector<std::uint64_t> entries) : entries_(std::move(entries)) {}

    std::size_t size() const noexcept { return entries_.size(); }
    bool empty() const noexcept { return entries_.empty(); }
    std::uint64_t operator[](std::size_t i) const { return entries_.at(i); }
    std::uint64_t back() const { return entries_.back(); }
    const std::vector<std::uint64_t>& entries() const noexcept { return entries_; }

    MultiIndex prefix(std::size_t n) const
    {
        return MultiIndex(std::vector<std::uint64_t>(entries_.begin(), entries_.begin() + n));
    }

    MultiIndex child(std::uint64_t entry) const
    {
        MultiIndex out = *this;
        out.entries_.push_back(entry);
        return out;
    }

    std::string to_string() const;

    friend auto operator<=>(const MultiIndex&, const MultiIndex&) = default;

private:
    std::vector<std::uint64_t> entries_;
};

/// [2z+1, j] for node j of the z-th (0-based) subtree.
MultiIndex assign_multi_index(std::uint64_t subtree_number, std::uint64_t local_index);

/// k-level form: one 2z+1 entry per enclosing subtree, then the local index.
MultiIndex assign_multi_index(std::span<const std::uint64_t> subtree_numbers,
                              std::uint64_t local_index);

/// Leaf position handed to a client before anchoring. The multi_index stays
/// valid however many subtrees are appended later.
struct StableLeafRef {
    MultiIndex multi_index;
    Digest data_digest;
    Timestamp assigned_at = 0;

    friend bool operator==(const StableLeafRef&, const StableLeafRef&) = default;
};

/// Composition of indexed trees over a fixed number of levels.
///
/// Level 0 is the top tree whose root gets anchored. Each subtree's root is
/// used as-is (not re-hashed) as a leaf of the tree one level up, and parent
/// trees are rebuilt eagerly on every append. Copies are independent
/// snapshots.
class MultiLevelTree {
public:
    /// `max_children` caps the number of subtrees under any one tree
    /// (0 = unlimited).
    explicit MultiLevelTree(std::size_t levels = 2, std::size_t max_children = 0,
                            Hasher hasher = {});

    std::size_t levels() const noexcept { return levels_; }
    bool empty() const noexcept { return !top_.has_value(); }

    const IndexedMerkleTree& top() const;
    const Digest& root() const { return top().root_digest(); }

    /// Appends a subtree to the deepest level. `group` selects, with 0-based
    /// numbers, the enclosing tree at each intermediate level (levels-2
    /// entries); a number equal to the current count opens a new one.
    /// Returns the prefix of the appended subtree.
    MultiIndex append_subtree(IndexedMerkleTree subtree, std::span<const std::uint64_t> group = {});

    /// Number of subtrees hanging directly below the tree at `prefix`.
    std::size_t child_count(const MultiIndex& prefix) const;

    /// Tree whose nodes carry `prefix` as leading entries ([] is the top).
    const IndexedMerkleTree& tree_at(const MultiIndex& prefix) const;
    const std::map<MultiIndex, IndexedMerkleTree>& subtrees() const noexcept { return subtrees_; }

    Digest leaf_digest(const MultiIndex& leaf) const;

    /// Within-subtree steps first, then one block per enclosing level.
    MerkleProof extract_proof(const MultiIndex& leaf, std::size_t* visits = nullptr) const;

    /// Also checks that the ref's digest is still the one stored at its index.
    MerkleProof extract_proof(const StableLeafRef& ref, std::size_t* visits = nullptr) const;

    StableLeafRef issue_ref(const MultiIndex& leaf, Timestamp now) const;

    friend bool operator==(const MultiLevelTree& a, const MultiLevelTree& b);

private:
    void rebuild_parents(const MultiIndex& changed);

    std::size_t levels_;
    std::size_t max_children_;
    Hasher hasher_;
    std::optional<IndexedMerkleTree> top_;
    std::map<MultiIndex, IndexedMerkleTree> subtrees_;
};

// .mltree.json: {"levels": int, "subtrees": [{"prefix": [int,...], "tree": <tree>}],
//                "top": <tree>|null}
Json multilevel_to_json(const MultiLevelTree& mlt);
MultiLevelTree multilevel_from_json(const Json& j, const Hasher& hasher = {});
std::string serialize_multilevel(const MultiLevelTree& mlt);
MultiLevelTree deserialize_multilevel(std::string_view text, const Hasher& hasher = {});

Json leaf_ref_to_json(const StableLeafRef& ref);
StableLeafRef leaf_ref_from_json(const Json& j, const std::string& where = "");

/// Three-level Proof-of-Attendance layout: top tree over attractions a_i,
/// each a_i over its attempt subtrees t_{i,j}.
///
/// `new_attendances[i]` feeds the current attempt of attraction i and
/// `failed_attempts[i]` holds its subtrees from rejected transactions (may be
/// shorter than new_attendances). Every attraction is padded to the same
/// number of attempts; a padding subtree is a single leaf carrying the root
/// of the attraction's previous attempt.
MultiLevelTree build_poa_tree(const std::vector<std::vector<Digest>>& new_attendances,
                              const std::vector<std::vector<IndexedMerkleTree>>& failed_attempts,
                              const Hasher& hasher = {});

} // namespace certkit
