#include "certkit/indexed_merkle_tree.hpp"

#include <algorithm>
#include <string>

#include "certkit/errors.hpp"

namespace certkit {

IndexedMerkleTree IndexedMerkleTree::build(std::span<const Bytes> items, const Hasher& hasher)
{
    if (items.empty()) {
        throw Error(Errc::NoData, "no data to certify");
    }
    std::vector<Digest> leaves;
    leaves.reserve(items.size());
    for (const Bytes& item : items) {
        leaves.push_back(hasher(item));
    }
    return from_leaf_digests(leaves, hasher);
}

IndexedMerkleTree IndexedMerkleTree::from_leaf_digests(std::span<const Digest> leaves,
                                                       const Hasher& hasher)
{
    if (leaves.empty()) {
        throw Error(Errc::NoData, "no data to certify");
    }

    IndexedMerkleTree tree;
    tree.leaf_count_ = leaves.size();
    // One replica at most per layer on top of the 2N-1 regular nodes.
    tree.nodes_.reserve(2 * leaves.size() + 64);

    std::vector<NodeId> layer;
    layer.reserve(leaves.size() + 1);
    for (std::size_t k = 0; k < leaves.size(); ++k) {
        tree.nodes_.push_back(TreeNode{leaf_index_of_position(k + 1), leaves[k]});
        layer.push_back(static_cast<NodeId>(k));
    }

    std::vector<NodeId> next;
    next.reserve(layer.size() / 2 + 1);
    unsigned h = 0;
    while (layer.size() > 1) {
        if (layer.size() % 2 != 0) {
            TreeNode replica = tree.nodes_[layer.back()];
            replica.left = kNoNode;
            replica.right = kNoNode;
            replica.duplicated = true;
            tree.nodes_.push_back(replica);
            layer.push_back(static_cast<NodeId>(tree.nodes_.size() - 1));
        }
        next.clear();
        for (std::size_t i = 0; i < layer.size(); i += 2) {
            const NodeId l = layer[i];
            const NodeId r = layer[i + 1];
            TreeNode parent;
            parent.value = hasher.combine(tree.nodes_[l].value, tree.nodes_[r].value);
            parent.index = parent_index(tree.nodes_[l].index, h);
            parent.left = l;
            parent.right = r;
            tree.nodes_.push_back(parent);
            next.push_back(static_cast<NodeId>(tree.nodes_.size() - 1));
        }
        layer.swap(next);
        ++h;
    }
    tree.root_ = layer.front();
    tree.height_ = h;
    return tree;
}

std::size_t IndexedMerkleTree::duplicate_count() const noexcept
{
    return static_cast<std::size_t>(
        std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.duplicated; }));
}

std::vector<Digest> IndexedMerkleTree::leaf_digests() const
{
    // Leaves occupy the first leaf_count_ arena slots in order.
    std::vector<Digest> out;
    out.reserve(leaf_count_);
    for (std::size_t k = 0; k < leaf_count_; ++k) {
        out.push_back(nodes_[k].value);
    }
    return out;
}

NodeId IndexedMerkleTree::locate(std::uint64_t leaf_index, std::vector<ProofStep>* path,
                                 std::size_t* visits) const
{
    if (leaf_index % 2 == 0) {
        throw Error(Errc::NotLeafIndex,
                    "not a leaf index: " + std::to_string(leaf_index));
    }
    std::size_t touched = 0;
    NodeId id = root_;
    for (;;) {
        ++touched;
        const TreeNode& n = nodes_[id];
        if (n.is_leaf()) {
            if (visits != nullptr) {
                *visits = touched;
            }
            if (n.duplicated || n.index != leaf_index) {
                throw Error(Errc::UnknownLeaf,
                            "unknown leaf: " + std::to_string(leaf_index));
            }
            return id;
        }
        const TreeNode& left = nodes_[n.left];
        const TreeNode& right = nodes_[n.right];
        if (leaf_index > n.index) {
            if (path != nullptr) {
                path->push_back(ProofStep{Side::Left, left.value, left.index});
            }
            id = n.right;
        } else {
            // Equal only happens at leaves; treat it as "smaller" anyway.
            if (path != nullptr) {
                path->push_back(ProofStep{Side::Right, right.value, right.index});
            }
            id = n.left;
        }
    }
}

MerkleProof IndexedMerkleTree::extract_proof(std::uint64_t leaf_index, std::size_t* visits) const
{
    MerkleProof proof;
    proof.leaf_index = leaf_index;
    proof.steps.reserve(height_);
    locate(leaf_index, &proof.steps, visits);
    std::reverse(proof.steps.begin(), proof.steps.end());
    proof.expected_root = root_digest();
    return proof;
}

const Digest& IndexedMerkleTree::leaf_digest(std::uint64_t leaf_index) const
{
    return nodes_[locate(leaf_index, nullptr, nullptr)].value;
}

namespace {

bool same_subtree(const IndexedMerkleTree& a, NodeId ia, const IndexedMerkleTree& b, NodeId ib)
{
    const TreeNode& x = a.node(ia);
    const TreeNode& y = b.node(ib);
    if (x.index != y.index || x.value != y.value || x.duplicated != y.duplicated ||
        x.is_leaf() != y.is_leaf()) {
        return false;
    }
    if (x.is_leaf()) {
        return true;
    }
    return same_subtree(a, x.left, b, y.left) && same_subtree(a, x.right, b, y.right);
}

} // namespace

bool operator==(const IndexedMerkleTree& a, const IndexedMerkleTree& b)
{
    return a.leaf_count_ == b.leaf_count_ && a.height_ == b.height_ &&
           a.nodes_.size() == b.nodes_.size() && same_subtree(a, a.root_, b, b.root_);
}

Digest compute_root(const Digest& leaf_digest, const MerkleProof& proof, const Hasher& hasher)
{
    Digest running = leaf_digest;
    for (const ProofStep& step : proof.steps) {
        running = step.side == Side::Left ? hasher.combine(step.sibling, running)
                                          : hasher.combine(running, step.sibling);
    }
    return running;
}

bool proof_indexes_consistent(const MerkleProof& proof) noexcept
{
    if (!proof.multi_index.empty()) {
        return true;
    }
    if (proof.leaf_index % 2 == 0 || proof.steps.size() > 62) {
        return false;
    }
    std::uint64_t current = proof.leaf_index;
    unsigned height = 0;
    for (const ProofStep& step : proof.steps) {
        const std::uint64_t span = std::uint64_t{2} << height;
        if (step.side == Side::Right) {
            // A replica repeats the index of the node it copies.
            if (step.sibling_index != current + span && step.sibling_index != current) {
                return false;
            }
            current = parent_index(current, height);
        } else {
            if (current != step.sibling_index + span) {
                return false;
            }
            current = parent_index(step.sibling_index, height);
        }
        ++height;
    }
    return true;
}

bool verify_proof(ByteView data, const MerkleProof& proof, const Digest& onchain_root,
                  const Hasher& hasher)
{
    return proof_indexes_consistent(proof) && compute_root(hasher(data), proof, hasher) == onchain_root;
}

} // namespace certkit
