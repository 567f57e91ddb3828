#include "certkit/tree_json.hpp"

#include <memory>
#include <vector>

#include "certkit/errors.hpp"

namespace certkit {

namespace json_detail {

namespace {

[[noreturn]] void parse_fail(const std::string& where, const std::string& what)
{
    throw Error(Errc::Parse, "parse error at " + (where.empty() ? std::string("/") : where) +
                                 ": " + what);
}

} // namespace

void require_object(const Json& j, const std::string& where)
{
    if (!j.is_object()) {
        parse_fail(where, "expected object");
    }
}

const Json& field(const Json& obj, const char* key, const std::string& where)
{
    require_object(obj, where);
    auto it = obj.find(key);
    if (it == obj.end()) {
        parse_fail(where, std::string("missing field \"") + key + "\"");
    }
    return *it;
}

std::uint64_t get_uint(const Json& obj, const char* key, const std::string& where)
{
    const Json& v = field(obj, key, where);
    if (!v.is_number_unsigned()) {
        parse_fail(where + "/" + key, "expected non-negative integer");
    }
    return v.get<std::uint64_t>();
}

std::int64_t get_int(const Json& obj, const char* key, const std::string& where)
{
    const Json& v = field(obj, key, where);
    if (!v.is_number_integer()) {
        parse_fail(where + "/" + key, "expected integer");
    }
    return v.get<std::int64_t>();
}

double get_number(const Json& obj, const char* key, const std::string& where)
{
    const Json& v = field(obj, key, where);
    if (!v.is_number()) {
        parse_fail(where + "/" + key, "expected number");
    }
    return v.get<double>();
}

bool get_bool(const Json& obj, const char* key, const std::string& where)
{
    const Json& v = field(obj, key, where);
    if (!v.is_boolean()) {
        parse_fail(where + "/" + key, "expected boolean");
    }
    return v.get<bool>();
}

std::string get_string(const Json& obj, const char* key, const std::string& where)
{
    const Json& v = field(obj, key, where);
    if (!v.is_string()) {
        parse_fail(where + "/" + key, "expected string");
    }
    return v.get<std::string>();
}

Digest get_digest(const Json& obj, const char* key, const std::string& where)
{
    std::string hex = get_string(obj, key, where);
    try {
        return Digest::from_hex(hex);
    } catch (const Error& e) {
        parse_fail(where + "/" + key, e.what());
    }
}

} // namespace json_detail

using namespace json_detail;

Json parse_json(std::string_view text)
{
    try {
        return Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw Error(Errc::Parse, "parse error at byte " + std::to_string(e.byte) + ": " + e.what());
    }
}

namespace {

constexpr unsigned kMaxDepth = 64;

Json node_to_json(const IndexedMerkleTree& tree, NodeId id)
{
    const TreeNode& n = tree.node(id);
    Json j;
    j["index"] = n.index;
    j["value"] = n.value.to_hex();
    j["duplicated"] = n.duplicated;
    if (n.is_leaf()) {
        j["left"] = nullptr;
        j["right"] = nullptr;
    } else {
        j["left"] = node_to_json(tree, n.left);
        j["right"] = node_to_json(tree, n.right);
    }
    return j;
}

struct ParsedNode {
    std::uint64_t index = 0;
    Digest value;
    bool duplicated = false;
    std::unique_ptr<ParsedNode> left;
    std::unique_ptr<ParsedNode> right;
    std::string where;
};

std::unique_ptr<ParsedNode> parse_node(const Json& j, const std::string& where, unsigned depth)
{
    if (depth > kMaxDepth) {
        throw Error(Errc::Parse, "parse error at " + where + ": tree deeper than " +
                                     std::to_string(kMaxDepth));
    }
    require_object(j, where);
    auto n = std::make_unique<ParsedNode>();
    n->where = where;
    n->index = get_uint(j, "index", where);
    n->value = get_digest(j, "value", where);
    n->duplicated = get_bool(j, "duplicated", where);
    const Json& l = field(j, "left", where);
    const Json& r = field(j, "right", where);
    if (l.is_null() != r.is_null()) {
        throw Error(Errc::Invariant, "invariant violation at " + where +
                                         ": node must have both children or none");
    }
    if (!l.is_null()) {
        n->left = parse_node(l, where + "/left", depth + 1);
        n->right = parse_node(r, where + "/right", depth + 1);
    }
    return n;
}

void collect_leaves(const ParsedNode& n, std::vector<Digest>& out)
{
    if (!n.left) {
        if (!n.duplicated) {
            out.push_back(n.value);
        }
        return;
    }
    collect_leaves(*n.left, out);
    collect_leaves(*n.right, out);
}

[[noreturn]] void invariant_fail(const ParsedNode& n, const std::string& what)
{
    throw Error(Errc::Invariant, "invariant violation at " + n.where + ": " + what);
}

// Local checks first so that messages point at the offending node, then a
// shape comparison against the canonical rebuild.
void check_node(const ParsedNode& n, const IndexedMerkleTree& rebuilt, NodeId id,
                const Hasher& hasher)
{
    const TreeNode& expect = rebuilt.node(id);
    if (n.left) {
        if (n.duplicated) {
            invariant_fail(n, "duplicated node must not have children");
        }
        if (n.value != hasher.combine(n.left->value, n.right->value)) {
            invariant_fail(n, "value does not match H(left || right)");
        }
    }
    if (n.left.operator bool() == expect.is_leaf()) {
        invariant_fail(n, "tree shape differs from canonical layout");
    }
    if (n.index != expect.index) {
        invariant_fail(n, "index " + std::to_string(n.index) + " expected " +
                              std::to_string(expect.index));
    }
    if (n.duplicated != expect.duplicated) {
        invariant_fail(n, "duplicated flag disagrees with canonical layout");
    }
    if (n.value != expect.value) {
        invariant_fail(n, "value does not match recomputed digest");
    }
    if (n.left) {
        check_node(*n.left, rebuilt, expect.left, hasher);
        check_node(*n.right, rebuilt, expect.right, hasher);
    }
}

} // namespace

Json tree_to_json(const IndexedMerkleTree& tree)
{
    Json j;
    j["leaf_count"] = tree.leaf_count();
    j["root"] = node_to_json(tree, tree.root_id());
    return j;
}

IndexedMerkleTree tree_from_json(const Json& j, const Hasher& hasher, const std::string& where)
{
    require_object(j, where);
    const std::uint64_t leaf_count = get_uint(j, "leaf_count", where);
    auto root = parse_node(field(j, "root", where), where + "/root", 0);

    std::vector<Digest> leaves;
    collect_leaves(*root, leaves);
    if (leaves.size() != leaf_count || leaf_count == 0) {
        throw Error(Errc::Invariant, "invariant violation at " + where + "/leaf_count: declared " +
                                         std::to_string(leaf_count) + ", found " +
                                         std::to_string(leaves.size()) + " leaves");
    }
    IndexedMerkleTree rebuilt = IndexedMerkleTree::from_leaf_digests(leaves, hasher);
    check_node(*root, rebuilt, rebuilt.root_id(), hasher);
    return rebuilt;
}

std::string serialize_tree(const IndexedMerkleTree& tree)
{
    return tree_to_json(tree).dump();
}

IndexedMerkleTree deserialize_tree(std::string_view text, const Hasher& hasher)
{
    return tree_from_json(parse_json(text), hasher);
}

Json proof_to_json(const MerkleProof& proof)
{
    Json j;
    j["leaf_index"] = proof.leaf_index;
    if (!proof.multi_index.empty()) {
        j["multi_index"] = proof.multi_index;
    }
    Json steps = Json::array();
    for (const ProofStep& s : proof.steps) {
        steps.push_back(Json{{"side", s.side == Side::Left ? "L" : "R"},
                             {"sibling", s.sibling.to_hex()},
                             {"sibling_index", s.sibling_index}});
    }
    j["steps"] = std::move(steps);
    j["expected_root"] = proof.expected_root.to_hex();
    return j;
}

MerkleProof proof_from_json(const Json& j, const std::string& where)
{
    MerkleProof proof;
    proof.leaf_index = get_uint(j, "leaf_index", where);
    proof.expected_root = get_digest(j, "expected_root", where);
    if (auto it = j.find("multi_index"); it != j.end()) {
        if (!it->is_array() || it->empty()) {
            throw Error(Errc::Parse, "parse error at " + where + "/multi_index: expected non-empty array");
        }
        for (std::size_t i = 0; i < it->size(); ++i) {
            const Json& e = (*it)[i];
            if (!e.is_number_unsigned()) {
                throw Error(Errc::Parse, "parse error at " + where + "/multi_index/" +
                                             std::to_string(i) + ": expected non-negative integer");
            }
            proof.multi_index.push_back(e.get<std::uint64_t>());
        }
    }
    const Json& steps = field(j, "steps", where);
    if (!steps.is_array()) {
        throw Error(Errc::Parse, "parse error at " + where + "/steps: expected array");
    }
    for (std::size_t i = 0; i < steps.size(); ++i) {
        const std::string at = where + "/steps/" + std::to_string(i);
        const Json& s = steps[i];
        ProofStep step;
        std::string side = get_string(s, "side", at);
        if (side == "L") {
            step.side = Side::Left;
        } else if (side == "R") {
            step.side = Side::Right;
        } else {
            throw Error(Errc::Parse, "parse error at " + at + "/side: expected \"L\" or \"R\"");
        }
        step.sibling = get_digest(s, "sibling", at);
        step.sibling_index = get_uint(s, "sibling_index", at);
        proof.steps.push_back(step);
    }
    return proof;
}

std::string serialize_proof(const MerkleProof& proof)
{
    return proof_to_json(proof).dump();
}

MerkleProof deserialize_proof(std::string_view text)
{
    return proof_from_json(parse_json(text));
}

} // namespace certkit
