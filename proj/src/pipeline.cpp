#include "certkit/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "certkit/errors.hpp"
#include "certkit/hasher.hpp"

namespace certkit {

namespace fs = std::filesystem;
using namespace json_detail;

const char* to_string(Approach a) noexcept
{
    return a == Approach::Single ? "single" : "merkle";
}

const char* to_string(Trigger t) noexcept
{
    return t == Trigger::TimeBased ? "time" : "manual";
}

const char* to_string(RecordStatus s) noexcept
{
    switch (s) {
    case RecordStatus::Pending: return "pending";
    case RecordStatus::Anchored: return "anchored";
    case RecordStatus::Failed: return "failed";
    }
    return "?";
}

Approach approach_from_string(std::string_view s)
{
    if (s == "single") {
        return Approach::Single;
    }
    if (s == "merkle") {
        return Approach::Merkle;
    }
    throw Error(Errc::InvalidArgument, "unknown approach '" + std::string(s) + "'");
}

namespace {

RecordStatus status_from_string(const std::string& s, const std::string& where)
{
    if (s == "pending") {
        return RecordStatus::Pending;
    }
    if (s == "anchored") {
        return RecordStatus::Anchored;
    }
    if (s == "failed") {
        return RecordStatus::Failed;
    }
    throw Error(Errc::Parse, "parse error at " + where + "/status: unknown status '" + s + "'");
}

Trigger trigger_from_string(const std::string& s)
{
    return s == "time" ? Trigger::TimeBased : Trigger::Manual;
}

Timestamp system_seconds()
{
    return std::chrono::duration_cast<std::chrono::seconds>(
               std::chrono::system_clock::now().time_since_epoch())
        .count();
}

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::Io, "cannot read " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_atomically(const fs::path& path, const std::string& text)
{
    const fs::path tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out || !(out << text) || !out.flush()) {
            throw Error(Errc::Io, "cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, path);
}

template <class Fn>
void for_each_line(const fs::path& path, Fn&& fn)
{
    if (!fs::exists(path)) {
        return;
    }
    std::ifstream in(path, std::ios::binary);
    std::string line;
    std::size_t n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (line.empty()) {
            continue;
        }
        try {
            fn(parse_json(line), "line " + std::to_string(n));
        } catch (const Error& e) {
            throw Error(e.code(), path.filename().string() + ":" + std::to_string(n) + ": " + e.what());
        }
    }
}

} // namespace

Json record_to_json(const CertificationRecord& r)
{
    Json j{{"item_id", r.item_id},
           {"approach", to_string(r.approach)},
           {"digest", r.digest.to_hex()},
           {"tx_id", r.tx_id},
           {"status", to_string(r.status)},
           {"attempts", r.attempts}};
    if (r.batch) {
        j["batch"] = *r.batch;
    }
    if (r.leaf_ref) {
        j["leaf_ref"] = leaf_ref_to_json(*r.leaf_ref);
    }
    if (r.proof) {
        j["proof"] = proof_to_json(*r.proof);
    }
    if (r.anchored_root) {
        j["anchored_root"] = r.anchored_root->to_hex();
    }
    return j;
}

CertificationRecord record_from_json(const Json& j, const std::string& where)
{
    require_object(j, where);
    CertificationRecord r;
    r.item_id = get_string(j, "item_id", where);
    try {
        r.approach = approach_from_string(get_string(j, "approach", where));
    } catch (const Error& e) {
        if (e.code() != Errc::InvalidArgument) {
            throw;
        }
        throw Error(Errc::Parse, "parse error at " + where + "/approach: " + e.what());
    }
    r.digest = get_digest(j, "digest", where);
    r.tx_id = get_string(j, "tx_id", where);
    r.status = status_from_string(get_string(j, "status", where), where);
    r.attempts = static_cast<std::uint32_t>(get_uint(j, "attempts", where));
    if (j.contains("batch")) {
        r.batch = get_uint(j, "batch", where);
    }
    if (j.contains("leaf_ref")) {
        r.leaf_ref = leaf_ref_from_json(j.at("leaf_ref"), where + "/leaf_ref");
    }
    if (j.contains("proof")) {
        r.proof = proof_from_json(j.at("proof"), where + "/proof");
    }
    if (j.contains("anchored_root")) {
        r.anchored_root = get_digest(j, "anchored_root", where);
    }
    return r;
}

Pipeline::Pipeline(fs::path dir, PipelineConfig config, Clock clock)
    : dir_(std::move(dir)), config_(config), clock_(clock ? std::move(clock) : Clock(system_seconds))
{
    if (!(config_.gas_price >= 0.0)) {
        throw Error(Errc::InvalidArgument, "gas price must be non-negative");
    }
    std::error_code ec;
    fs::create_directories(dir_ / "trees", ec);
    if (ec) {
        throw Error(Errc::Io, "cannot create store " + dir_.string() + ": " + ec.message());
    }
    load();
}

Timestamp Pipeline::now() const
{
    return clock_();
}

fs::path Pipeline::tree_path(std::uint64_t batch, std::uint32_t attempt) const
{
    return dir_ / "trees" / (std::to_string(batch) + ".attempt" + std::to_string(attempt) + ".mltree.json");
}

void Pipeline::load()
{
    const fs::path state = dir_ / "state.json";
    if (!fs::exists(state)) {
        approach_ = config_.approach.value_or(Approach::Merkle);
        last_certified_at_ = now();
        save_state();
        return;
    }

    const Json s = parse_json(read_file(state));
    const Approach stored = approach_from_string(get_string(s, "approach", ""));
    if (config_.approach && *config_.approach != stored) {
        throw Error(Errc::ApproachMismatch, std::string("store was created for the ") + to_string(stored) +
                                                " approach, not " + to_string(*config_.approach));
    }
    approach_ = stored;
    const Json& b = field(s, "batch", "");
    batch_.number = get_uint(b, "number", "/batch");
    batch_.attempts = static_cast<std::uint32_t>(get_uint(b, "attempts", "/batch"));
    batch_.trigger = trigger_from_string(get_string(b, "trigger", "/batch"));
    last_certified_at_ = get_int(s, "last_certified_at", "");
    const Json& st = field(s, "stats", "");
    stats_.tx_submitted = get_uint(st, "tx_submitted", "/stats");
    stats_.tx_accepted = get_uint(st, "tx_accepted", "/stats");
    stats_.tx_rejected = get_uint(st, "tx_rejected", "/stats");
    stats_.spend = get_number(st, "spend", "/stats");

    // Items of the current batch keyed by reservation.
    std::vector<std::pair<std::string, StableLeafRef>> in_batch;
    for_each_line(dir_ / "items.jsonl", [&](const Json& j, const std::string& where) {
        DataItem item;
        item.id = get_string(j, "id", where);
        item.payload = from_hex(get_string(j, "payload", where));
        item.received_at = get_int(j, "received_at", where);
        if (j.contains("batch") && get_uint(j, "batch", where) == batch_.number && j.contains("ref")) {
            in_batch.emplace_back(item.id, leaf_ref_from_json(j.at("ref"), where + "/ref"));
        }
        order_.push_back(item.id);
        items_.emplace(item.id, std::move(item));
    });
    for_each_line(dir_ / "records.jsonl", [&](const Json& j, const std::string& where) {
        CertificationRecord r = record_from_json(j, where);
        records_[r.item_id] = std::move(r);
    });

    if (batch_.attempts > 0) {
        const fs::path p = tree_path(batch_.number, batch_.attempts);
        if (!fs::exists(p)) {
            throw Error(Errc::TreeMissing, "tree file missing: " + p.string());
        }
        batch_tree_ = deserialize_multilevel(read_file(p));
    }
    const std::uint64_t open_entry = 2 * (batch_tree_.empty() ? 0 : batch_tree_.child_count({})) + 1;
    for (const auto& [id, ref] : in_batch) {
        batch_.items.push_back(id);
        if (ref.multi_index[0] == open_entry) {
            open_items_.push_back(id);
        }
    }
}

void Pipeline::save_state() const
{
    Json s{{"approach", to_string(approach_)},
           {"batch",
            {{"number", batch_.number}, {"attempts", batch_.attempts}, {"trigger", to_string(batch_.trigger)}}},
           {"last_certified_at", last_certified_at_},
           {"stats",
            {{"tx_submitted", stats_.tx_submitted},
             {"tx_accepted", stats_.tx_accepted},
             {"tx_rejected", stats_.tx_rejected},
             {"spend", stats_.spend}}}};
    write_atomically(dir_ / "state.json", s.dump(2) + "\n");
}

void Pipeline::append_line(const fs::path& file, const Json& j) const
{
    std::ofstream out(file, std::ios::binary | std::ios::app);
    if (!out || !(out << j.dump() << '\n') || !out.flush()) {
        throw Error(Errc::Io, "cannot append to " + file.string());
    }
}

void Pipeline::put_record(CertificationRecord r)
{
    append_line(dir_ / "records.jsonl", record_to_json(r));
    records_[r.item_id] = std::move(r);
}

void Pipeline::write_tree(const fs::path& path, const MultiLevelTree& mlt) const
{
    write_atomically(path, serialize_multilevel(mlt) + "\n");
}

SubmitAck Pipeline::submit(const std::string& id, Bytes payload)
{
    if (id.empty()) {
        throw Error(Errc::InvalidArgument, "item id must not be empty");
    }
    if (payload.empty()) {
        throw Error(Errc::InvalidArgument, "payload of '" + id + "' is empty");
    }
    std::unique_lock lock(mutex_);
    if (items_.contains(id)) {
        throw Error(Errc::DuplicateId, "duplicate id '" + id + "'");
    }

    DataItem item{id, std::move(payload), now()};
    SubmitAck ack{id, sha256(item.payload), std::nullopt, std::nullopt};
    Json line{{"id", id}, {"payload", to_hex(item.payload)}, {"received_at", item.received_at}};
    CertificationRecord rec;
    rec.item_id = id;
    rec.approach = approach_;
    rec.digest = ack.digest;

    if (approach_ == Approach::Merkle) {
        // Reserve the next leaf of the open attempt. Later subtrees never move it.
        const std::uint64_t z = batch_tree_.empty() ? 0 : batch_tree_.child_count({});
        const std::uint64_t k = open_items_.size() + 1;
        StableLeafRef ref{assign_multi_index(z, 2 * k - 1), ack.digest, item.received_at};
        ack.batch = batch_.number;
        ack.ref = ref;
        line["batch"] = batch_.number;
        line["ref"] = leaf_ref_to_json(ref);
        rec.batch = batch_.number;
        rec.leaf_ref = ref;
    }

    append_line(dir_ / "items.jsonl", line);
    order_.push_back(id);
    items_.emplace(id, std::move(item));
    if (approach_ == Approach::Merkle) {
        batch_.items.push_back(id);
        open_items_.push_back(id);
    }
    put_record(std::move(rec));
    return ack;
}

CertificationRecord Pipeline::certify_single(const std::string& item_id, AnchorClient& anchor,
                                             std::optional<double> gas_price)
{
    std::unique_lock lock(mutex_);
    if (approach_ != Approach::Single) {
        throw Error(Errc::ApproachMismatch, "store uses the merkle approach; certify the batch instead");
    }
    auto it = items_.find(item_id);
    if (it == items_.end()) {
        throw Error(Errc::UnknownItem, "unknown item '" + item_id + "'");
    }
    CertificationRecord rec = records_.at(item_id);
    if (rec.status == RecordStatus::Anchored) {
        return rec;
    }

    const AnchorReceipt receipt = anchor.submit_tx(rec.digest.view(), gas_price.value_or(config_.gas_price));
    ++stats_.tx_submitted;
    ++rec.attempts;
    if (receipt.accepted) {
        ++stats_.tx_accepted;
        stats_.spend += receipt.gas_price_paid;
        rec.status = RecordStatus::Anchored;
        rec.tx_id = receipt.tx_id;
    } else {
        ++stats_.tx_rejected;
        rec.status = RecordStatus::Failed;
    }
    put_record(rec);
    save_state();
    return rec;
}

std::vector<CertificationRecord> Pipeline::certify_batch(Trigger trigger, AnchorClient& anchor,
                                                         std::optional<double> gas_price)
{
    std::unique_lock lock(mutex_);
    return certify_batch_locked(trigger, anchor, gas_price.value_or(config_.gas_price));
}

std::vector<CertificationRecord> Pipeline::certify_batch_locked(Trigger trigger, AnchorClient& anchor,
                                                                double gas_price)
{
    if (approach_ != Approach::Merkle) {
        throw Error(Errc::ApproachMismatch, "store uses the single approach; certify items one by one");
    }
    if (open_items_.empty() && batch_tree_.empty()) {
        throw Error(Errc::EmptyBatch, "no data to certify in batch " + std::to_string(batch_.number));
    }

    MultiLevelTree next = batch_tree_;
    if (!open_items_.empty()) {
        std::vector<Digest> leaves;
        leaves.reserve(open_items_.size());
        for (const std::string& id : open_items_) {
            leaves.push_back(records_.at(id).digest);
        }
        const std::uint64_t z = next.empty() ? 0 : next.child_count({});
        const MultiIndex prefix = next.append_subtree(IndexedMerkleTree::from_leaf_digests(leaves));
        if (prefix != MultiIndex{2 * z + 1}) {
            throw Error(Errc::Invariant, "subtree landed at " + prefix.to_string());
        }
    }

    // The tree goes to disk before the transaction so a receipt never
    // points at a root nobody can reproduce.
    const std::uint32_t attempt = batch_.attempts + 1;
    write_tree(tree_path(batch_.number, attempt), next);
    {
        std::lock_guard guard(cache_mutex_);
        tree_cache_.erase(batch_.number);
    }
    batch_tree_ = std::move(next);
    batch_.attempts = attempt;
    batch_.trigger = trigger;
    open_items_.clear();

    const Digest root = batch_tree_.root();
    const AnchorReceipt receipt = anchor.submit_tx(root.view(), gas_price);
    ++stats_.tx_submitted;
    last_certified_at_ = now();

    std::vector<CertificationRecord> out;
    out.reserve(batch_.items.size());
    for (const std::string& id : batch_.items) {
        CertificationRecord rec = records_.at(id);
        rec.attempts = attempt;
        if (receipt.accepted) {
            rec.status = RecordStatus::Anchored;
            rec.tx_id = receipt.tx_id;
            rec.anchored_root = root;
            if (config_.materialize_proofs) {
                rec.proof = batch_tree_.extract_proof(*rec.leaf_ref);
            }
        } else {
            rec.status = RecordStatus::Failed;
        }
        put_record(rec);
        out.push_back(std::move(rec));
    }

    if (receipt.accepted) {
        ++stats_.tx_accepted;
        stats_.spend += receipt.gas_price_paid;
        batch_ = Batch{batch_.number + 1, {}, Trigger::Manual, 0};
        batch_tree_ = MultiLevelTree();
    } else {
        ++stats_.tx_rejected;
    }
    save_state();
    return out;
}

bool Pipeline::batch_due(Timestamp t) const
{
    std::shared_lock lock(mutex_);
    if (approach_ != Approach::Merkle) {
        return false;
    }
    const bool has_data = !open_items_.empty() || !batch_tree_.empty();
    return has_data && t - last_certified_at_ >= config_.batch_interval;
}

std::vector<CertificationRecord> Pipeline::poll(AnchorClient& anchor)
{
    std::unique_lock lock(mutex_);
    if (approach_ != Approach::Merkle) {
        return {};
    }
    const bool has_data = !open_items_.empty() || !batch_tree_.empty();
    if (!has_data || now() - last_certified_at_ < config_.batch_interval) {
        return {};
    }
    return certify_batch_locked(Trigger::TimeBased, anchor, config_.gas_price);
}

std::shared_ptr<const MultiLevelTree> Pipeline::load_batch_tree(std::uint64_t batch) const
{
    {
        std::lock_guard guard(cache_mutex_);
        auto it = tree_cache_.find(batch);
        if (it != tree_cache_.end()) {
            return it->second;
        }
    }
    // Highest attempt wins: it contains every earlier attempt unchanged.
    const std::string prefix = std::to_string(batch) + ".attempt";
    const std::string suffix = ".mltree.json";
    std::uint32_t best = 0;
    for (const auto& entry : fs::directory_iterator(dir_ / "trees")) {
        const std::string name = entry.path().filename().string();
        if (name.size() <= prefix.size() + suffix.size() || !name.starts_with(prefix) ||
            !name.ends_with(suffix)) {
            continue;
        }
        const std::string digits = name.substr(prefix.size(), name.size() - prefix.size() - suffix.size());
        if (digits.find_first_not_of("0123456789") != std::string::npos) {
            continue;
        }
        best = std::max(best, static_cast<std::uint32_t>(std::stoul(digits)));
    }
    if (best == 0) {
        throw Error(Errc::TreeMissing, "tree file missing for batch " + std::to_string(batch));
    }
    auto mlt = std::make_shared<const MultiLevelTree>(deserialize_multilevel(read_file(tree_path(batch, best))));
    std::lock_guard guard(cache_mutex_);
    tree_cache_[batch] = mlt;
    return mlt;
}

MerkleProof Pipeline::resolve_proof(std::uint64_t batch, const StableLeafRef& ref, std::size_t* visits) const
{
    return load_batch_tree(batch)->extract_proof(ref, visits);
}

MerkleProof Pipeline::resolve_proof(const CertificationRecord& record) const
{
    if (record.proof) {
        return *record.proof;
    }
    if (!record.batch || !record.leaf_ref) {
        throw Error(Errc::InvalidArgument, "record '" + record.item_id + "' carries no leaf reference");
    }
    return resolve_proof(*record.batch, *record.leaf_ref);
}

bool Pipeline::verify_payload(const CertificationRecord& record, ByteView payload,
                              const AnchorClient& chain) const
{
    if (record.status != RecordStatus::Anchored) {
        throw Error(Errc::InvalidArgument, "record '" + record.item_id + "' is not anchored");
    }
    const TxView tx = chain.get_tx(record.tx_id);
    if (tx.data.size() != Digest{}.bytes.size()) {
        return false;
    }
    Digest onchain;
    std::copy(tx.data.begin(), tx.data.end(), onchain.bytes.begin());
    if (record.approach == Approach::Single) {
        return sha256(payload) == onchain;
    }
    return verify_proof(payload, resolve_proof(record), onchain);
}

bool Pipeline::verify_record(const CertificationRecord& record, const AnchorClient& chain) const
{
    Bytes payload;
    {
        std::shared_lock lock(mutex_);
        auto it = items_.find(record.item_id);
        if (it == items_.end()) {
            throw Error(Errc::UnknownItem, "unknown item '" + record.item_id + "'");
        }
        payload = it->second.payload;
    }
    return verify_payload(record, payload, chain);
}

bool Pipeline::verify_item(const std::string& item_id, const AnchorClient& chain) const
{
    auto rec = record(item_id);
    if (!rec) {
        throw Error(Errc::UnknownItem, "unknown item '" + item_id + "'");
    }
    return verify_record(*rec, chain);
}

std::optional<CertificationRecord> Pipeline::record(const std::string& item_id) const
{
    std::shared_lock lock(mutex_);
    auto it = records_.find(item_id);
    if (it == records_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<CertificationRecord> Pipeline::records() const
{
    std::shared_lock lock(mutex_);
    std::vector<CertificationRecord> out;
    out.reserve(order_.size());
    for (const std::string& id : order_) {
        out.push_back(records_.at(id));
    }
    return out;
}

std::optional<DataItem> Pipeline::item(const std::string& item_id) const
{
    std::shared_lock lock(mutex_);
    auto it = items_.find(item_id);
    if (it == items_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::size_t Pipeline::item_count() const
{
    std::shared_lock lock(mutex_);
    return order_.size();
}

std::vector<std::string> Pipeline::pending_items() const
{
    std::shared_lock lock(mutex_);
    std::vector<std::string> out;
    for (const std::string& id : order_) {
        if (records_.at(id).status != RecordStatus::Anchored) {
            out.push_back(id);
        }
    }
    return out;
}

std::vector<std::string> Pipeline::open_attempt_items() const
{
    std::shared_lock lock(mutex_);
    return open_items_;
}

Batch Pipeline::current_batch() const
{
    std::shared_lock lock(mutex_);
    return batch_;
}

bool Pipeline::batch_rejected() const
{
    std::shared_lock lock(mutex_);
    return batch_.attempts > 0;
}

PipelineStats Pipeline::stats() const
{
    std::shared_lock lock(mutex_);
    return stats_;
}

} // namespace certkit
