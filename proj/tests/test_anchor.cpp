#include "doctest.h"

#include <filesystem>
#include <set>

#include "certkit/anchor.hpp"
#include "certkit/errors.hpp"

using namespace certkit;

namespace {

ChainConfig config_with(double rate, std::uint64_t seed = 42)
{
    ChainConfig c;
    c.seed = seed;
    c.extra_failure_rate = rate;
    return c;
}

Bytes payload(int i)
{
    return to_bytes("root-" + std::to_string(i));
}

} // namespace

TEST_CASE("acceptance depends on gas and congestion")
{
    SimulatedChain calm(config_with(0.0));
    auto r = calm.submit_tx(payload(1), 1.0);
    CHECK(r.accepted);
    CHECK_FALSE(r.tx_id.empty());
    CHECK(r.gas_price_paid == 1.0);

    auto cheap = calm.submit_tx(payload(2), 0.5);
    CHECK_FALSE(cheap.accepted);
    CHECK(cheap.tx_id.empty());
    CHECK(cheap.gas_price_paid == 0.0);

    SimulatedChain jammed(config_with(1.0));
    for (int i = 0; i < 20; ++i) {
        auto x = jammed.submit_tx(payload(i), 1000.0);
        CHECK_FALSE(x.accepted);
        CHECK(x.tx_id.empty());
    }
    CHECK(jammed.accepted_count() == 0);
    CHECK(jammed.submissions() == 20);
}

TEST_CASE("gas schedule is piecewise constant in the submission ordinal")
{
    ChainConfig c = config_with(0.0);
    c.gas_schedule = {{0, 2.0}, {3, 1.0}};
    SimulatedChain chain(c);
    CHECK(chain.min_gas_price_at(0) == 2.0);
    CHECK(chain.min_gas_price_at(2) == 2.0);
    CHECK(chain.min_gas_price_at(3) == 1.0);
    std::vector<bool> accepted;
    for (int i = 0; i < 5; ++i) {
        accepted.push_back(chain.submit_tx(payload(i), 1.5).accepted);
    }
    CHECK(accepted == std::vector<bool>{false, false, false, true, true});
}

TEST_CASE("oversize data is an error, not a rejection")
{
    SimulatedChain chain(config_with(0.0));
    Bytes big(1025, 0xab);
    try {
        (void)chain.submit_tx(big, 1.0);
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::OversizeData);
    }
    CHECK(chain.submissions() == 0);
    CHECK(chain.submit_tx(Bytes(1024, 0xab), 1.0).accepted);
    CHECK_THROWS_AS(SimulatedChain(config_with(1.5)), Error);
}

TEST_CASE("get_tx returns the exact bytes; unknown ids are not located")
{
    SimulatedChain chain(config_with(0.0));
    Digest root = sha256(as_bytes("some root"));
    auto r = chain.submit_tx(root.view(), 1.0);
    REQUIRE(r.accepted);
    TxView v = chain.get_tx(r.tx_id);
    CHECK(v.data == Bytes(root.bytes.begin(), root.bytes.end()));
    CHECK(v.block_time == r.block_time);
    // Re-reading is stable.
    CHECK(chain.get_tx(r.tx_id).data == v.data);
    try {
        (void)chain.get_tx("0xdeadbeef");
        FAIL("expected error");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::TxNotFound);
        CHECK(std::string(e.what()).find("transaction not located") != std::string::npos);
    }
}

TEST_CASE("seed 42, rate 0.5: replay is byte-identical")
{
    auto run = [] {
        SimulatedChain chain(config_with(0.5, 42));
        std::vector<AnchorReceipt> receipts;
        for (int i = 0; i < 100; ++i) {
            receipts.push_back(chain.submit_tx(payload(i), 1.0));
        }
        return std::make_pair(receipts, chain.dump().dump());
    };
    auto [a, dump_a] = run();
    auto [b, dump_b] = run();
    CHECK(a == b);
    CHECK(dump_a == dump_b);

    std::size_t accepted = 0;
    Timestamp last = 0;
    std::set<std::string> ids;
    for (const auto& r : a) {
        CHECK(r.block_time > last);
        last = r.block_time;
        if (r.accepted) {
            ++accepted;
            ids.insert(r.tx_id);
        }
    }
    // A fair coin over 100 draws lands well inside this band.
    CHECK(accepted > 25);
    CHECK(accepted < 75);
    CHECK(ids.size() == accepted);

    SimulatedChain other(config_with(0.5, 43));
    std::vector<AnchorReceipt> c;
    for (int i = 0; i < 100; ++i) {
        c.push_back(other.submit_tx(payload(i), 1.0));
    }
    CHECK(c != a);
}

TEST_CASE("dump/restore continues the same draw sequence")
{
    SimulatedChain straight(config_with(0.5, 7));
    SimulatedChain first(config_with(0.5, 7));
    for (int i = 0; i < 30; ++i) {
        (void)straight.submit_tx(payload(i), 1.0);
        (void)first.submit_tx(payload(i), 1.0);
    }
    auto dir = std::filesystem::temp_directory_path() / "certkit_anchor_test";
    std::filesystem::create_directories(dir);
    first.save(dir / "state.chain.json");
    SimulatedChain resumed = SimulatedChain::load(dir / "state.chain.json");
    CHECK(resumed.dump() == first.dump());
    for (int i = 30; i < 60; ++i) {
        CHECK(straight.submit_tx(payload(i), 1.0) == resumed.submit_tx(payload(i), 1.0));
    }
    CHECK(straight.accepted_count() == resumed.accepted_count());
    std::filesystem::remove_all(dir);
}
