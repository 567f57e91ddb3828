#include "doctest.h"

#include <atomic>
#include <filesystem>
#include <fstream>
#include <set>
#include <thread>

#include <unistd.h>

#include "certkit/errors.hpp"
#include "certkit/pipeline.hpp"

using namespace certkit;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name)
        : path(fs::temp_directory_path() / ("certkit_pipeline_" + name + "_" + std::to_string(::getpid())))
    {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

ChainConfig calm()
{
    ChainConfig c;
    c.extra_failure_rate = 0.0;
    return c;
}

// First `failures` submissions are underpriced at gas 1.0.
ChainConfig failing_first(std::uint64_t failures)
{
    ChainConfig c = calm();
    c.gas_schedule = {{0, 5.0}, {failures, 1.0}};
    return c;
}

PipelineConfig with(Approach a)
{
    PipelineConfig c;
    c.approach = a;
    return c;
}

Errc code_of(auto&& fn)
{
    try {
        fn();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected an error");
    return Errc::Io;
}

Bytes payload(const std::string& s)
{
    return to_bytes(s);
}

std::size_t proof_length_from_heights(const MultiLevelTree& mlt, const MultiIndex& leaf)
{
    std::size_t total = 0;
    for (std::size_t p = 0; p < leaf.size(); ++p) {
        total += mlt.tree_at(leaf.prefix(p)).height();
    }
    return total;
}

} // namespace

TEST_CASE("submit reserves stable leaf positions")
{
    TempDir dir("submit");
    Pipeline pl(dir.path);
    CHECK(pl.approach() == Approach::Merkle);
    auto a = pl.submit("a", payload("alpha"));
    auto b = pl.submit("b", payload("beta"));
    auto c = pl.submit("c", payload("gamma"));
    REQUIRE(a.ref);
    CHECK(a.ref->multi_index == MultiIndex{1, 1});
    CHECK(b.ref->multi_index == MultiIndex{1, 3});
    CHECK(c.ref->multi_index == MultiIndex{1, 5});
    CHECK(c.ref->data_digest == sha256(payload("gamma")));
    CHECK(a.batch == 0u);
    CHECK(code_of([&] { pl.submit("a", payload("again")); }) == Errc::DuplicateId);
    CHECK(code_of([&] { pl.submit("z", Bytes{}); }) == Errc::InvalidArgument);
    CHECK(pl.pending_items() == std::vector<std::string>{"a", "b", "c"});
    CHECK(pl.record("b")->status == RecordStatus::Pending);
}

TEST_CASE("1024 items, no failure: one transaction")
{
    TempDir dir("batch1024");
    SimulatedChain chain(calm());
    Pipeline pl(dir.path);
    for (int i = 0; i < 1024; ++i) {
        pl.submit("item-" + std::to_string(i), payload("payload " + std::to_string(i)));
    }
    const auto recs = pl.certify_batch(Trigger::Manual, chain);
    CHECK(recs.size() == 1024);
    CHECK(chain.submissions() == 1);
    CHECK(chain.accepted_count() == 1);
    std::size_t ok = 0;
    for (const auto& r : recs) {
        CHECK(r.status == RecordStatus::Anchored);
        CHECK(r.tx_id == recs.front().tx_id);
        CHECK_FALSE(r.proof.has_value());
        ok += pl.verify_record(r, chain) ? 1 : 0;
    }
    CHECK(ok == 1024);
    CHECK(pl.pending_items().empty());
    CHECK(code_of([&] { pl.certify_batch(Trigger::Manual, chain); }) == Errc::EmptyBatch);
    CHECK(chain.submissions() == 1);
}

TEST_CASE("failure, new data, success: old refs survive")
{
    TempDir dir("failure");
    SimulatedChain chain(failing_first(1));
    Pipeline pl(dir.path);
    std::vector<SubmitAck> acks;
    for (int i = 0; i < 3; ++i) {
        acks.push_back(pl.submit("old" + std::to_string(i), payload("old " + std::to_string(i))));
    }
    auto first = pl.certify_batch(Trigger::Manual, chain);
    for (const auto& r : first) {
        CHECK(r.status == RecordStatus::Failed);
        CHECK(r.attempts == 1);
    }
    CHECK(pl.batch_rejected());
    CHECK(fs::exists(pl.tree_path(0, 1)));

    auto n1 = pl.submit("new0", payload("new 0"));
    auto n2 = pl.submit("new1", payload("new 1"));
    CHECK(n1.ref->multi_index == MultiIndex{3, 1});
    CHECK(n2.ref->multi_index == MultiIndex{3, 3});
    acks.push_back(n1);
    acks.push_back(n2);

    auto second = pl.certify_batch(Trigger::Manual, chain);
    CHECK(second.size() == 5);
    CHECK(chain.submissions() == 2);
    CHECK(chain.accepted_count() == 1);
    CHECK(pl.stats().tx_accepted == 1);
    CHECK(pl.stats().tx_rejected == 1);

    const MultiLevelTree mlt = deserialize_multilevel(
        [&] {
            std::ifstream in(pl.tree_path(0, 2));
            return std::string(std::istreambuf_iterator<char>(in), {});
        }());
    for (const auto& r : second) {
        CHECK(r.status == RecordStatus::Anchored);
        CHECK(r.attempts == 2);
        CHECK(pl.verify_record(r, chain));
        const MerkleProof proof = pl.resolve_proof(r);
        CHECK(proof.steps.size() == proof_length_from_heights(mlt, r.leaf_ref->multi_index));
    }
    for (const auto& ack : acks) {
        CHECK(pl.resolve_proof(*ack.batch, *ack.ref).multi_index == ack.ref->multi_index.entries());
    }
    // The next batch starts over.
    CHECK(pl.submit("later", payload("later")).ref->multi_index == MultiIndex{1, 1});
    CHECK(pl.current_batch().number == 1);
}

TEST_CASE("failure sequences up to five never invalidate refs")
{
    for (std::uint64_t f = 0; f <= 5; ++f) {
        TempDir dir("seq" + std::to_string(f));
        SimulatedChain chain(failing_first(f));
        Pipeline pl(dir.path);
        std::vector<SubmitAck> acks;
        for (std::uint64_t round = 0; round <= f; ++round) {
            for (int k = 0; k < 3; ++k) {
                const std::string id = "r" + std::to_string(round) + "k" + std::to_string(k);
                acks.push_back(pl.submit(id, payload(id + " data")));
                CHECK(acks.back().ref->multi_index == MultiIndex{2 * round + 1, 2 * std::uint64_t(k) + 1});
            }
            const auto recs = pl.certify_batch(Trigger::Manual, chain);
            CHECK(recs.front().status == (round < f ? RecordStatus::Failed : RecordStatus::Anchored));
        }
        CHECK(chain.accepted_count() == 1);
        for (const auto& ack : acks) {
            CHECK(pl.verify_item(ack.item_id, chain));
        }
    }
}

TEST_CASE("retry without new data resubmits the same root")
{
    TempDir dir("retry");
    SimulatedChain chain(failing_first(2));
    Pipeline pl(dir.path);
    pl.submit("x", payload("x"));
    CHECK(pl.certify_batch(Trigger::Manual, chain).front().status == RecordStatus::Failed);
    CHECK(pl.certify_batch(Trigger::Manual, chain).front().status == RecordStatus::Failed);
    const auto recs = pl.certify_batch(Trigger::Manual, chain);
    CHECK(recs.front().status == RecordStatus::Anchored);
    CHECK(recs.front().attempts == 3);
    CHECK(pl.verify_record(recs.front(), chain));
}

TEST_CASE("tampering and cross-pairing are detected")
{
    TempDir dir("tamper");
    SimulatedChain chain(calm());
    Pipeline pl(dir.path);
    for (int i = 0; i < 16; ++i) {
        pl.submit("i" + std::to_string(i), payload("data-" + std::to_string(i)));
    }
    const auto recs = pl.certify_batch(Trigger::Manual, chain);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        for (std::size_t j = 0; j < recs.size(); ++j) {
            const bool ok = pl.verify_payload(recs[i], payload("data-" + std::to_string(j)), chain);
            CHECK(ok == (i == j));
        }
    }
    CHECK_FALSE(pl.verify_payload(recs[3], payload("data-3 "), chain));

    CertificationRecord ghost = recs[0];
    ghost.tx_id = "0x00";
    CHECK(code_of([&] { pl.verify_record(ghost, chain); }) == Errc::TxNotFound);

    // Another chain never saw the transaction.
    SimulatedChain elsewhere(calm());
    CHECK(code_of([&] { pl.verify_record(recs[0], elsewhere); }) == Errc::TxNotFound);

    CertificationRecord pending = recs[0];
    pending.status = RecordStatus::Pending;
    CHECK(code_of([&] { pl.verify_record(pending, chain); }) == Errc::InvalidArgument);
}

TEST_CASE("single approach: one transaction per item")
{
    TempDir dir("single");
    ChainConfig cfg = calm();
    cfg.gas_schedule = {{0, 1.0}, {3, 5.0}, {4, 1.0}};
    SimulatedChain chain(cfg);
    Pipeline pl(dir.path, with(Approach::Single));
    for (int i = 0; i < 8; ++i) {
        auto ack = pl.submit("s" + std::to_string(i), payload("single " + std::to_string(i)));
        CHECK_FALSE(ack.ref.has_value());
    }
    std::vector<CertificationRecord> out;
    for (int i = 0; i < 8; ++i) {
        out.push_back(pl.certify_single("s" + std::to_string(i), chain));
    }
    CHECK(chain.submissions() == 8);
    CHECK(out[3].status == RecordStatus::Failed);
    const auto retried = pl.certify_single("s3", chain);
    CHECK(retried.status == RecordStatus::Anchored);
    CHECK(retried.attempts == 2);
    CHECK(chain.submissions() == 9);
    CHECK(pl.stats().spend == 8.0);
    CHECK(pl.stats().tx_submitted == 9);
    for (int i = 0; i < 8; ++i) {
        const auto r = *pl.record("s" + std::to_string(i));
        CHECK_FALSE(r.proof.has_value());
        CHECK(pl.verify_record(r, chain));
    }
    CHECK(chain.get_tx(retried.tx_id).data == Bytes(retried.digest.bytes.begin(), retried.digest.bytes.end()));
    CHECK_FALSE(pl.verify_payload(retried, payload("single 4"), chain));

    CHECK(code_of([&] { pl.certify_batch(Trigger::Manual, chain); }) == Errc::ApproachMismatch);
    CHECK(code_of([&] { pl.certify_single("nope", chain); }) == Errc::UnknownItem);
    CHECK(code_of([&] { Pipeline again(dir.path, with(Approach::Merkle)); }) == Errc::ApproachMismatch);
    Pipeline reopened(dir.path);
    CHECK(reopened.approach() == Approach::Single);
}

TEST_CASE("reopen: anchored records verify, an open failed batch continues")
{
    TempDir dir("reopen");
    SimulatedChain chain(failing_first(1));
    std::vector<std::string> ids;
    {
        Pipeline pl(dir.path);
        for (int i = 0; i < 5; ++i) {
            ids.push_back("a" + std::to_string(i));
            pl.submit(ids.back(), payload(ids.back()));
        }
        pl.certify_batch(Trigger::Manual, chain);  // rejected
        pl.submit("b0", payload("b0"));
        ids.push_back("b0");
    }
    {
        Pipeline pl(dir.path);
        CHECK(pl.batch_rejected());
        CHECK(pl.open_attempt_items() == std::vector<std::string>{"b0"});
        auto ack = pl.submit("b1", payload("b1"));
        ids.push_back("b1");
        CHECK(ack.ref->multi_index == MultiIndex{3, 3});
        const auto recs = pl.certify_batch(Trigger::Manual, chain);
        CHECK(recs.size() == 7);
        CHECK(recs.front().status == RecordStatus::Anchored);
    }
    Pipeline pl(dir.path);
    CHECK(pl.item_count() == 7);
    CHECK(pl.pending_items().empty());
    for (const auto& id : ids) {
        CHECK(pl.verify_item(id, chain));
    }
    CHECK(pl.stats().tx_submitted == 2);
    CHECK(pl.current_batch().number == 1);
}

TEST_CASE("resolve_proof by index, with bounded visits")
{
    TempDir dir("resolve");
    SimulatedChain chain(failing_first(2));
    Pipeline pl(dir.path);
    std::vector<SubmitAck> acks;
    for (int round = 0; round < 3; ++round) {
        for (int k = 0; k < 5 + 4 * round; ++k) {
            const std::string id = std::to_string(round) + "/" + std::to_string(k);
            acks.push_back(pl.submit(id, payload(id)));
        }
        pl.certify_batch(Trigger::Manual, chain);
    }
    for (const auto& ack : acks) {
        std::size_t visits = 0;
        (void)pl.resolve_proof(0, *ack.ref, &visits);
        // Two levels: the attempt subtree (height <= 4) and the top (height 2).
        CHECK(visits <= (4 + 1) + (2 + 1));
    }
    StableLeafRef bogus = *acks[0].ref;
    bogus.multi_index = MultiIndex{7, 1};
    CHECK(code_of([&] { pl.resolve_proof(0, bogus); }) == Errc::UnknownRef);
    bogus = *acks[0].ref;
    bogus.data_digest = sha256(payload("other"));
    CHECK(code_of([&] { pl.resolve_proof(0, bogus); }) == Errc::UnknownRef);
    CHECK(code_of([&] { pl.resolve_proof(9, *acks[0].ref); }) == Errc::TreeMissing);

    // A fresh instance has no cache and must read the files.
    fs::remove_all(dir.path / "trees");
    fs::create_directories(dir.path / "trees");
    Pipeline reread(dir.path);
    CHECK(code_of([&] { (void)reread.resolve_proof(0, *acks[0].ref); }) == Errc::TreeMissing);
}

TEST_CASE("forced materialisation stores proofs in records")
{
    TempDir dir("materialise");
    SimulatedChain chain(calm());
    PipelineConfig cfg;
    cfg.materialize_proofs = true;
    Pipeline pl(dir.path, cfg);
    for (int i = 0; i < 6; ++i) {
        pl.submit(std::to_string(i), payload("m" + std::to_string(i)));
    }
    for (const auto& r : pl.certify_batch(Trigger::Manual, chain)) {
        REQUIRE(r.proof.has_value());
        CHECK(*r.proof == pl.resolve_proof(*r.batch, *r.leaf_ref));
        CHECK(pl.verify_record(r, chain));
    }
}

TEST_CASE("time-based trigger")
{
    TempDir dir("timer");
    SimulatedChain chain(calm());
    Timestamp t = 1000;
    PipelineConfig cfg;
    cfg.batch_interval = 30;
    Pipeline pl(dir.path, cfg, [&] { return t; });
    CHECK_FALSE(pl.batch_due(t + 100));  // nothing pending
    pl.submit("x", payload("x"));
    t = 1010;
    CHECK_FALSE(pl.batch_due(t));
    CHECK(pl.poll(chain).empty());
    t = 1030;
    CHECK(pl.batch_due(t));
    const auto recs = pl.poll(chain);
    REQUIRE(recs.size() == 1);
    CHECK(recs[0].status == RecordStatus::Anchored);
    CHECK(recs[0].leaf_ref->assigned_at == 1000);
    CHECK_FALSE(pl.batch_due(t + 1000));
}

TEST_CASE("concurrent intake and read-only verification")
{
    TempDir dir("concurrent");
    SimulatedChain chain(calm());
    Pipeline pl(dir.path);
    constexpr int kThreads = 8;
    constexpr int kEach = 40;
    std::vector<std::thread> workers;
    std::vector<std::vector<SubmitAck>> acks(kThreads);
    for (int t = 0; t < kThreads; ++t) {
        workers.emplace_back([&, t] {
            for (int i = 0; i < kEach; ++i) {
                const std::string id = "t" + std::to_string(t) + "-" + std::to_string(i);
                acks[t].push_back(pl.submit(id, payload(id)));
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    std::set<MultiIndex> seen;
    for (const auto& list : acks) {
        for (const auto& a : list) {
            seen.insert(a.ref->multi_index);
        }
    }
    CHECK(seen.size() == kThreads * kEach);
    CHECK(seen.rbegin()->back() == 2 * kThreads * kEach - 1);

    const auto recs = pl.certify_batch(Trigger::Manual, chain);
    std::atomic<int> verified{0};
    workers.clear();
    for (int t = 0; t < kThreads; ++t) {
        workers.emplace_back([&, t] {
            for (std::size_t i = t; i < recs.size(); i += kThreads) {
                verified += pl.verify_record(recs[i], chain) ? 1 : 0;
            }
        });
    }
    for (auto& w : workers) {
        w.join();
    }
    CHECK(verified == kThreads * kEach);
}

TEST_CASE("record JSON round trip")
{
    CertificationRecord r;
    r.item_id = "weird \"id\"\n";
    r.digest = sha256(payload("r"));
    r.tx_id = "0xabc";
    r.batch = 4;
    r.leaf_ref = StableLeafRef{MultiIndex{3, 5}, r.digest, 77};
    r.anchored_root = sha256(payload("root"));
    r.status = RecordStatus::Anchored;
    r.attempts = 2;
    const Json j = record_to_json(r);
    CHECK(record_from_json(j) == r);
    CHECK(record_to_json(record_from_json(j)).dump() == j.dump());

    Json bad = j;
    bad["status"] = "lost";
    CHECK(code_of([&] { record_from_json(bad, "/x"); }) == Errc::Parse);
}
