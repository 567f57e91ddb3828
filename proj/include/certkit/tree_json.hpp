#pragma once

#include <string>
#include <string_view>

#include "json.hpp"

#include "certkit/hasher.hpp"
#include "certkit/indexed_merkle_tree.hpp"
#include "certkit/merkle_proof.hpp"

namespace certkit {

using Json = nlohmann::json;

// Tree file (.mtree.json):
//   {"leaf_count": int, "root": node}
//   node = {"duplicated": bool, "index": int, "left": node|null,
//           "right": node|null, "value": hex64}
//
// Proof file (.proof.json):
//   {"expected_root": hex64, "leaf_index": int,
//    "steps": [{"side": "L"|"R", "sibling": hex64, "sibling_index": int}]}
//   plus "multi_index": [int, ...] for proofs spanning several levels.
//
// Output is canonical: keys sorted, compact, lowercase hex.

Json tree_to_json(const IndexedMerkleTree& tree);

/// Rebuilds the tree from the stored leaves and checks every node against
/// the stored one. Errc::Parse for shape/type problems, Errc::Invariant when
/// a hash, index or duplicate flag disagrees. Messages carry a JSON pointer.
IndexedMerkleTree tree_from_json(const Json& j, const Hasher& hasher = {},
                                 const std::string& where = "");

std::string serialize_tree(const IndexedMerkleTree& tree);
IndexedMerkleTree deserialize_tree(std::string_view text, const Hasher& hasher = {});

Json proof_to_json(const MerkleProof& proof);
MerkleProof proof_from_json(const Json& j, const std::string& where = "");

std::string serialize_proof(const MerkleProof& proof);
MerkleProof deserialize_proof(std::string_view text);

/// Parses text, mapping nlohmann errors to Errc::Parse with the byte offset.
Json parse_json(std::string_view text);

namespace json_detail {

// Field accessors that raise Errc::Parse with a pointer-style location.
const Json& field(const Json& obj, const char* key, const std::string& where);
std::uint64_t get_uint(const Json& obj, const char* key, const std::string& where);
std::int64_t get_int(const Json& obj, const char* key, const std::string& where);
double get_number(const Json& obj, const char* key, const std::string& where);
bool get_bool(const Json& obj, const char* key, const std::string& where);
std::string get_string(const Json& obj, const char* key, const std::string& where);
Digest get_digest(const Json& obj, const char* key, const std::string& where);
void require_object(const Json& j, const std::string& where);

} // namespace json_detail

} // namespace certkit
