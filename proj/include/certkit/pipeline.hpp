#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "certkit/anchor.hpp"
#include "certkit/digest.hpp"
#include "certkit/multilevel_tree.hpp"
#include "certkit/tree_json.hpp"

namespace certkit {

enum class Approach { Single, Merkle };
enum class Trigger { TimeBased, Manual };
enum class RecordStatus { Pending, Anchored, Failed };

const char* to_string(Approach a) noexcept;
const char* to_string(Trigger t) noexcept;
const char* to_string(RecordStatus s) noexcept;
Approach approach_from_string(std::string_view s);

struct DataItem {
    std::string id;
    Bytes payload;
    Timestamp received_at = 0;
};

struct CertificationRecord {
    std::string item_id;
    Approach approach = Approach::Merkle;
    Digest digest;
    std::string tx_id;
    std::optional<std::uint64_t> batch;
    std::optional<StableLeafRef> leaf_ref;
    std::optional<MerkleProof> proof;  // only when materialisation is forced
    std::optional<Digest> anchored_root;
    RecordStatus status = RecordStatus::Pending;
    std::uint32_t attempts = 0;

    friend bool operator==(const CertificationRecord&, const CertificationRecord&) = default;
};

Json record_to_json(const CertificationRecord& r);
CertificationRecord record_from_json(const Json& j, const std::string& where = "");

/// The batch currently collecting data. Batches are bounded by triggers.
struct Batch {
    std::uint64_t number = 0;
    std::vector<std::string> items;
    Trigger trigger = Trigger::Manual;
    std::uint32_t attempts = 0;  // submissions so far, rejected ones included
};

/// "StableLeafRef-or-ack": the ref is present under the Merkle approach.
struct SubmitAck {
    std::string item_id;
    Digest digest;
    std::optional<std::uint64_t> batch;
    std::optional<StableLeafRef> ref;
};

struct PipelineStats {
    std::uint64_t tx_submitted = 0;
    std::uint64_t tx_accepted = 0;
    std::uint64_t tx_rejected = 0;
    double spend = 0.0;  // gas price paid on accepted transactions
};

struct PipelineConfig {
    // Unset: reuse what the store was created with (Merkle for a new store).
    std::optional<Approach> approach;
    double gas_price = 1.0;
    Timestamp batch_interval = 60;  // time-based trigger period
    bool materialize_proofs = false;
};

using Clock = std::function<Timestamp()>;

/// Off-chain side of the certification system.
///
/// Layout of the store directory:
///   items.jsonl    one line per submitted item (append-only)
///   records.jsonl  one line per record change, last line per item wins
///   state.json     batch counters and transaction statistics
///   trees/<batch>.attempt<k>.mltree.json
///
/// Intake and certification take an exclusive lock; verification and proof
/// resolution are read-only and may run concurrently.
class Pipeline {
public:
    explicit Pipeline(std::filesystem::path dir, PipelineConfig config = {}, Clock clock = {});

    Pipeline(const Pipeline&) = delete;
    Pipeline& operator=(const Pipeline&) = delete;

    Approach approach() const noexcept { return approach_; }
    const std::filesystem::path& dir() const noexcept { return dir_; }

    /// Errc::DuplicateId for a repeated id; empty payloads are rejected.
    SubmitAck submit(const std::string& id, Bytes payload);

    /// One transaction carrying H(payload). A refusal yields status Failed;
    /// calling again is the retry.
    CertificationRecord certify_single(const std::string& item_id, AnchorClient& anchor,
                                       std::optional<double> gas_price = {});

    /// Extends the current batch's multi-level tree with the open attempt,
    /// saves it and submits one transaction with the top root. After a
    /// refusal the tree is kept and the next call resubmits old and new data
    /// under one updated root. Errc::EmptyBatch when there is nothing to send.
    std::vector<CertificationRecord> certify_batch(Trigger trigger, AnchorClient& anchor,
                                                   std::optional<double> gas_price = {});

    bool batch_due(Timestamp now) const;

    /// Time-based trigger: certifies when the interval has elapsed.
    std::vector<CertificationRecord> poll(AnchorClient& anchor);

    /// Errc::TxNotFound if the chain does not know the transaction; a false
    /// return means the data no longer matches what was anchored.
    bool verify_record(const CertificationRecord& record, const AnchorClient& chain) const;
    bool verify_item(const std::string& item_id, const AnchorClient& chain) const;
    /// Checks bytes held by a third party against an anchored record.
    bool verify_payload(const CertificationRecord& record, ByteView payload,
                        const AnchorClient& chain) const;

    /// Loads the saved tree for the batch and extracts by index.
    MerkleProof resolve_proof(std::uint64_t batch, const StableLeafRef& ref,
                              std::size_t* visits = nullptr) const;
    MerkleProof resolve_proof(const CertificationRecord& record) const;

    std::optional<CertificationRecord> record(const std::string& item_id) const;
    std::vector<CertificationRecord> records() const;
    std::optional<DataItem> item(const std::string& item_id) const;
    std::size_t item_count() const;

    /// Items not yet anchored, in submission order.
    std::vector<std::string> pending_items() const;
    /// Items reserved in the attempt that has not been submitted yet.
    std::vector<std::string> open_attempt_items() const;

    Batch current_batch() const;
    bool batch_rejected() const;  // current batch has at least one refused submission
    PipelineStats stats() const;

    /// Path of the latest saved tree for a batch (may not exist).
    std::filesystem::path tree_path(std::uint64_t batch, std::uint32_t attempt) const;

private:
    void load();
    void save_state() const;
    void append_line(const std::filesystem::path& file, const Json& j) const;
    void put_record(CertificationRecord r);
    std::vector<CertificationRecord> certify_batch_locked(Trigger trigger, AnchorClient& anchor,
                                                          double gas_price);
    void write_tree(const std::filesystem::path& path, const MultiLevelTree& mlt) const;
    std::shared_ptr<const MultiLevelTree> load_batch_tree(std::uint64_t batch) const;
    Timestamp now() const;

    std::filesystem::path dir_;
    PipelineConfig config_;
    Approach approach_ = Approach::Merkle;
    Clock clock_;

    mutable std::shared_mutex mutex_;
    std::vector<std::string> order_;
    std::map<std::string, DataItem> items_;
    std::map<std::string, CertificationRecord> records_;

    Batch batch_;
    MultiLevelTree batch_tree_;
    std::vector<std::string> open_items_;
    Timestamp last_certified_at_ = 0;
    PipelineStats stats_;

    mutable std::mutex cache_mutex_;
    mutable std::map<std::uint64_t, std::shared_ptr<const MultiLevelTree>> tree_cache_;
};

} // namespace certkit
