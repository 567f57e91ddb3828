#include "certkit/multilevel_tree.hpp"

#include <algorithm>

#include "certkit/errors.hpp"

namespace certkit {

std::string MultiIndex::to_string() const
{
    std::string s = "[";
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (i != 0) {
            s += ",";
        }
        s += std::to_string(entries_[i]);
    }
    return s + "]";
}

MultiIndex assign_multi_index(std::uint64_t subtree_number, std::uint64_t local_index)
{
    return MultiIndex{2 * subtree_number + 1, local_index};
}

MultiIndex assign_multi_index(std::span<const std::uint64_t> subtree_numbers,
                              std::uint64_t local_index)
{
    std::vector<std::uint64_t> entries;
    entries.reserve(subtree_numbers.size() + 1);
    for (std::uint64_t z : subtree_numbers) {
        entries.push_back(2 * z + 1);
    }
    entries.push_back(local_index);
    return MultiIndex(std::move(entries));
}

MultiLevelTree::MultiLevelTree(std::size_t levels, std::size_t max_children, Hasher hasher)
    : levels_(levels), max_children_(max_children), hasher_(hasher)
{
    if (levels_ < 2) {
        throw Error(Errc::InvalidArgument, "a multi-level tree needs at least 2 levels");
    }
}

const IndexedMerkleTree& MultiLevelTree::top() const
{
    if (!top_) {
        throw Error(Errc::NoData, "multi-level tree is empty");
    }
    return *top_;
}

std::size_t MultiLevelTree::child_count(const MultiIndex& prefix) const
{
    std::size_t c = 0;
    while (subtrees_.contains(prefix.child(2 * c + 1))) {
        ++c;
    }
    return c;
}

const IndexedMerkleTree& MultiLevelTree::tree_at(const MultiIndex& prefix) const
{
    if (prefix.empty()) {
        if (!top_) {
            throw Error(Errc::UnknownRef, "multi-level tree is empty");
        }
        return *top_;
    }
    auto it = subtrees_.find(prefix);
    if (it == subtrees_.end()) {
        throw Error(Errc::UnknownRef, "no subtree at " + prefix.to_string());
    }
    return it->second;
}

MultiIndex MultiLevelTree::append_subtree(IndexedMerkleTree subtree,
                                          std::span<const std::uint64_t> group)
{
    if (group.size() != levels_ - 2) {
        throw Error(Errc::InvalidArgument, "group must select " + std::to_string(levels_ - 2) +
                                               " intermediate trees, got " +
                                               std::to_string(group.size()));
    }
    auto check_capacity = [&](const MultiIndex& parent, std::size_t count) {
        if (max_children_ != 0 && count >= max_children_) {
            throw Error(Errc::CapacityExceeded, "tree at " + parent.to_string() + " already holds " +
                                                    std::to_string(count) + " subtrees");
        }
    };

    MultiIndex prefix;
    for (std::uint64_t z : group) {
        const std::size_t count = child_count(prefix);
        if (z > count) {
            throw Error(Errc::InvalidArgument, "subtree number " + std::to_string(z) +
                                                   " skips ahead of " + std::to_string(count));
        }
        if (z == count) {
            check_capacity(prefix, count);
        }
        prefix = prefix.child(2 * z + 1);
    }
    const std::size_t count = child_count(prefix);
    check_capacity(prefix, count);
    MultiIndex key = prefix.child(2 * count + 1);
    subtrees_.insert_or_assign(key, std::move(subtree));
    rebuild_parents(key);
    return key;
}

void MultiLevelTree::rebuild_parents(const MultiIndex& changed)
{
    for (std::size_t n = changed.size(); n-- > 0;) {
        const MultiIndex parent = changed.prefix(n);
        std::vector<Digest> leaves;
        for (std::size_t c = 0;; ++c) {
            auto it = subtrees_.find(parent.child(2 * c + 1));
            if (it == subtrees_.end()) {
                break;
            }
            leaves.push_back(it->second.root_digest());
        }
        IndexedMerkleTree rebuilt = IndexedMerkleTree::from_leaf_digests(leaves, hasher_);
        if (parent.empty()) {
            top_ = std::move(rebuilt);
        } else {
            subtrees_.insert_or_assign(parent, std::move(rebuilt));
        }
    }
}

Digest MultiLevelTree::leaf_digest(const MultiIndex& leaf) const
{
    if (leaf.empty() || leaf.size() > levels_) {
        throw Error(Errc::UnknownRef, "multi-index " + leaf.to_string() + " has wrong length");
    }
    try {
        return tree_at(leaf.prefix(leaf.size() - 1)).leaf_digest(leaf.back());
    } catch (const Error& e) {
        throw Error(Errc::UnknownRef, "unknown ref " + leaf.to_string() + ": " + e.what());
    }
}

MerkleProof MultiLevelTree::extract_proof(const MultiIndex& leaf, std::size_t* visits) const
{
    if (leaf.empty() || leaf.size() > levels_) {
        throw Error(Errc::UnknownRef, "multi-index " + leaf.to_string() + " has wrong length");
    }
    MerkleProof proof;
    proof.leaf_index = leaf.back();
    proof.multi_index = leaf.entries();
    std::size_t total_visits = 0;
    for (std::size_t l = leaf.size(); l-- > 0;) {
        std::size_t v = 0;
        MerkleProof part;
        try {
            part = tree_at(leaf.prefix(l)).extract_proof(leaf[l], &v);
        } catch (const Error& e) {
            throw Error(Errc::UnknownRef, "unknown ref " + leaf.to_string() + ": " + e.what());
        }
        total_visits += v;
        proof.steps.insert(proof.steps.end(), part.steps.begin(), part.steps.end());
    }
    proof.expected_root = root();
    if (visits != nullptr) {
        *visits = total_visits;
    }
    return proof;
}

MerkleProof MultiLevelTree::extract_proof(const StableLeafRef& ref, std::size_t* visits) const
{
    if (leaf_digest(ref.multi_index) != ref.data_digest) {
        throw Error(Errc::UnknownRef,
                    "ref " + ref.multi_index.to_string() + " does not match the stored leaf");
    }
    return extract_proof(ref.multi_index, visits);
}

StableLeafRef MultiLevelTree::issue_ref(const MultiIndex& leaf, Timestamp now) const
{
    return StableLeafRef{leaf, leaf_digest(leaf), now};
}

bool operator==(const MultiLevelTree& a, const MultiLevelTree& b)
{
    return a.levels_ == b.levels_ && a.top_ == b.top_ && a.subtrees_ == b.subtrees_;
}

Json multilevel_to_json(const MultiLevelTree& mlt)
{
    Json j;
    j["levels"] = mlt.levels();
    j["top"] = mlt.empty() ? Json(nullptr) : tree_to_json(mlt.top());
    Json subs = Json::array();
    for (const auto& [prefix, tree] : mlt.subtrees()) {
        subs.push_back(Json{{"prefix", prefix.entries()}, {"tree", tree_to_json(tree)}});
    }
    j["subtrees"] = std::move(subs);
    return j;
}

MultiLevelTree multilevel_from_json(const Json& j, const Hasher& hasher)
{
    using namespace json_detail;
    const std::uint64_t levels = get_uint(j, "levels", "");
    if (levels < 2 || levels > 16) {
        throw Error(Errc::Parse, "parse error at /levels: out of range");
    }
    const Json& subs = field(j, "subtrees", "");
    if (!subs.is_array()) {
        throw Error(Errc::Parse, "parse error at /subtrees: expected array");
    }

    std::map<MultiIndex, IndexedMerkleTree> stored;
    for (std::size_t i = 0; i < subs.size(); ++i) {
        const std::string at = "/subtrees/" + std::to_string(i);
        const Json& p = field(subs[i], "prefix", at);
        if (!p.is_array() || p.empty() || p.size() >= levels) {
            throw Error(Errc::Parse, "parse error at " + at + "/prefix: bad length");
        }
        std::vector<std::uint64_t> entries;
        for (const Json& e : p) {
            if (!e.is_number_unsigned() || e.get<std::uint64_t>() % 2 == 0) {
                throw Error(Errc::Parse, "parse error at " + at + "/prefix: entries must be odd integers");
            }
            entries.push_back(e.get<std::uint64_t>());
        }
        MultiIndex key(std::move(entries));
        if (stored.contains(key)) {
            throw Error(Errc::Parse, "parse error at " + at + ": duplicate prefix");
        }
        stored.emplace(std::move(key), tree_from_json(field(subs[i], "tree", at), hasher, at + "/tree"));
    }

    // Replay the deepest subtrees in prefix order and demand an identical result.
    MultiLevelTree mlt(levels, 0, hasher);
    for (const auto& [prefix, tree] : stored) {
        if (prefix.size() != levels - 1) {
            continue;
        }
        std::vector<std::uint64_t> group;
        for (std::size_t l = 0; l + 1 < prefix.size(); ++l) {
            group.push_back((prefix[l] - 1) / 2);
        }
        try {
            MultiIndex got = mlt.append_subtree(tree, group);
            if (got != prefix) {
                throw Error(Errc::Invariant, "subtree " + prefix.to_string() + " is not contiguous");
            }
        } catch (const Error& e) {
            throw Error(Errc::Invariant, std::string("invariant violation in /subtrees: ") + e.what());
        }
    }

    const Json& top = field(j, "top", "");
    if (top.is_null()) {
        if (!stored.empty()) {
            throw Error(Errc::Invariant, "invariant violation at /top: missing top tree");
        }
        return mlt;
    }
    IndexedMerkleTree top_tree = tree_from_json(top, hasher, "/top");
    if (mlt.empty() || !(top_tree == mlt.top()) || stored != mlt.subtrees()) {
        throw Error(Errc::Invariant,
                    "invariant violation at /top: levels do not chain subtree roots");
    }
    return mlt;
}

std::string serialize_multilevel(const MultiLevelTree& mlt)
{
    return multilevel_to_json(mlt).dump();
}

MultiLevelTree deserialize_multilevel(std::string_view text, const Hasher& hasher)
{
    return multilevel_from_json(parse_json(text), hasher);
}

Json leaf_ref_to_json(const StableLeafRef& ref)
{
    return Json{{"multi_index", ref.multi_index.entries()},
                {"data_digest", ref.data_digest.to_hex()},
                {"assigned_at", ref.assigned_at}};
}

StableLeafRef leaf_ref_from_json(const Json& j, const std::string& where)
{
    using namespace json_detail;
    StableLeafRef ref;
    const Json& mi = field(j, "multi_index", where);
    if (!mi.is_array() || mi.empty()) {
        throw Error(Errc::Parse, "parse error at " + where + "/multi_index: expected non-empty array");
    }
    std::vector<std::uint64_t> entries;
    for (const Json& e : mi) {
        if (!e.is_number_unsigned()) {
            throw Error(Errc::Parse, "parse error at " + where + "/multi_index: expected integers");
        }
        entries.push_back(e.get<std::uint64_t>());
    }
    ref.multi_index = MultiIndex(std::move(entries));
    ref.data_digest = get_digest(j, "data_digest", where);
    ref.assigned_at = get_int(j, "assigned_at", where);
    return ref;
}

MultiLevelTree build_poa_tree(const std::vector<std::vector<Digest>>& new_attendances,
                              const std::vector<std::vector<IndexedMerkleTree>>& failed_attempts,
                              const Hasher& hasher)
{
    if (failed_attempts.size() > new_attendances.size()) {
        throw Error(Errc::InvalidArgument, "more failure lists than attractions");
    }
    std::size_t attempts = 1;
    bool any = false;
    for (std::size_t i = 0; i < new_attendances.size(); ++i) {
        const std::size_t failed = i < failed_attempts.size() ? failed_attempts[i].size() : 0;
        attempts = std::max(attempts, failed + 1);
        any = any || failed > 0 || !new_attendances[i].empty();
    }
    if (!any) {
        throw Error(Errc::NoData, "no attendance data to certify");
    }

    MultiLevelTree mlt(3, 0, hasher);
    for (std::size_t i = 0; i < new_attendances.size(); ++i) {
        std::vector<IndexedMerkleTree> subtrees;
        if (i < failed_attempts.size()) {
            subtrees = failed_attempts[i];
        }
        if (!new_attendances[i].empty()) {
            subtrees.push_back(IndexedMerkleTree::from_leaf_digests(new_attendances[i], hasher));
        }
        if (subtrees.empty()) {
            throw Error(Errc::NoData,
                        "attraction " + std::to_string(i) + " has no attendance data");
        }
        while (subtrees.size() < attempts) {
            const Digest previous = subtrees.back().root_digest();
            subtrees.push_back(IndexedMerkleTree::from_leaf_digests(std::span(&previous, 1), hasher));
        }
        const std::uint64_t group[] = {i};
        for (IndexedMerkleTree& t : subtrees) {
            mlt.append_subtree(std::move(t), group);
        }
    }
    return mlt;
}

} // namespace certkit
