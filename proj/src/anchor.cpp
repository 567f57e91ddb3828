#include "certkit/anchor.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "certkit/errors.hpp"
#include "certkit/hasher.hpp"

namespace certkit {

namespace {

void validate_rate(double rate)
{
    if (!(rate >= 0.0 && rate <= 1.0)) {
        throw Error(Errc::InvalidArgument, "failure rate must lie in [0, 1]");
    }
}

void append_be64(Bytes& out, std::uint64_t v)
{
    for (int shift = 56; shift >= 0; shift -= 8) {
        out.push_back(static_cast<std::uint8_t>(v >> shift));
    }
}

// 53-bit uniform in [0, 1); std::bernoulli_distribution is not portable
// across standard libraries.
double unit_draw(std::mt19937_64& rng)
{
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

} // namespace

SimulatedChain::SimulatedChain(ChainConfig config)
    : config_(std::move(config)), rng_(config_.seed), clock_(config_.genesis_time)
{
    validate_rate(config_.extra_failure_rate);
    set_gas_schedule(config_.gas_schedule);
}

void SimulatedChain::set_extra_failure_rate(double rate)
{
    validate_rate(rate);
    config_.extra_failure_rate = rate;
}

void SimulatedChain::set_gas_schedule(std::vector<GasStep> schedule)
{
    for (const GasStep& s : schedule) {
        if (!(s.min_gas_price >= 0.0)) {
            throw Error(Errc::InvalidArgument, "gas prices must be non-negative");
        }
    }
    std::stable_sort(schedule.begin(), schedule.end(),
                     [](const GasStep& a, const GasStep& b) { return a.from_submission < b.from_submission; });
    config_.gas_schedule = std::move(schedule);
}

double SimulatedChain::min_gas_price_at(std::uint64_t ordinal) const noexcept
{
    double price = 0.0;
    for (const GasStep& s : config_.gas_schedule) {
        if (s.from_submission > ordinal) {
            break;
        }
        price = s.min_gas_price;
    }
    return price;
}

AnchorReceipt SimulatedChain::submit_tx(ByteView data, double gas_price)
{
    if (data.size() > config_.max_data_bytes) {
        throw Error(Errc::OversizeData, "transaction data of " + std::to_string(data.size()) +
                                            " bytes exceeds " + std::to_string(config_.max_data_bytes));
    }
    if (!(gas_price >= 0.0)) {
        throw Error(Errc::InvalidArgument, "gas price must be non-negative");
    }
    const std::uint64_t ordinal = submissions_++;
    const bool congested = unit_draw(rng_) < config_.extra_failure_rate;
    const bool underpriced = gas_price < min_gas_price_at(ordinal);
    clock_ += config_.block_interval;

    AnchorReceipt receipt;
    receipt.block_time = clock_;
    if (congested || underpriced) {
        return receipt;
    }

    Bytes preimage(data.begin(), data.end());
    append_be64(preimage, ordinal);
    append_be64(preimage, config_.seed);
    receipt.tx_id = "0x" + sha256(preimage).to_hex();
    receipt.accepted = true;
    receipt.gas_price_paid = gas_price;
    ledger_.emplace(receipt.tx_id, Entry{Bytes(data.begin(), data.end()), clock_, gas_price, ordinal});
    return receipt;
}

TxView SimulatedChain::get_tx(const std::string& tx_id) const
{
    auto it = ledger_.find(tx_id);
    if (it == ledger_.end()) {
        throw Error(Errc::TxNotFound, "transaction not located: " + tx_id);
    }
    return TxView{it->second.data, it->second.block_time};
}

Json SimulatedChain::dump() const
{
    Json schedule = Json::array();
    for (const GasStep& s : config_.gas_schedule) {
        schedule.push_back(Json{{"from", s.from_submission}, {"min_gas_price", s.min_gas_price}});
    }
    // Ledger in submission order.
    std::vector<std::pair<std::uint64_t, const std::string*>> order;
    for (const auto& [id, e] : ledger_) {
        order.emplace_back(e.ordinal, &id);
    }
    std::sort(order.begin(), order.end());
    Json ledger = Json::array();
    for (const auto& [ordinal, id] : order) {
        const Entry& e = ledger_.at(*id);
        ledger.push_back(Json{{"tx_id", *id},
                              {"data", to_hex(e.data)},
                              {"block_time", e.block_time},
                              {"gas_price", e.gas_price},
                              {"ordinal", e.ordinal}});
    }
    return Json{{"config",
                 {{"seed", config_.seed},
                  {"gas_schedule", schedule},
                  {"extra_failure_rate", config_.extra_failure_rate},
                  {"max_data_bytes", config_.max_data_bytes},
                  {"genesis_time", config_.genesis_time},
                  {"block_interval", config_.block_interval}}},
                {"submissions", submissions_},
                {"clock", clock_},
                {"ledger", ledger}};
}

SimulatedChain SimulatedChain::restore(const Json& j)
{
    using namespace json_detail;
    const Json& c = field(j, "config", "");
    ChainConfig config;
    config.seed = get_uint(c, "seed", "/config");
    config.extra_failure_rate = get_number(c, "extra_failure_rate", "/config");
    config.max_data_bytes = get_uint(c, "max_data_bytes", "/config");
    config.genesis_time = get_int(c, "genesis_time", "/config");
    config.block_interval = get_int(c, "block_interval", "/config");
    config.gas_schedule.clear();
    const Json& schedule = field(c, "gas_schedule", "/config");
    if (!schedule.is_array()) {
        throw Error(Errc::Parse, "parse error at /config/gas_schedule: expected array");
    }
    for (std::size_t i = 0; i < schedule.size(); ++i) {
        const std::string at = "/config/gas_schedule/" + std::to_string(i);
        config.gas_schedule.push_back(
            GasStep{get_uint(schedule[i], "from", at), get_number(schedule[i], "min_gas_price", at)});
    }

    SimulatedChain chain(config);
    chain.submissions_ = get_uint(j, "submissions", "");
    chain.rng_.discard(chain.submissions_);
    chain.clock_ = get_int(j, "clock", "");
    const Json& ledger = field(j, "ledger", "");
    if (!ledger.is_array()) {
        throw Error(Errc::Parse, "parse error at /ledger: expected array");
    }
    for (std::size_t i = 0; i < ledger.size(); ++i) {
        const std::string at = "/ledger/" + std::to_string(i);
        Entry e;
        e.data = from_hex(get_string(ledger[i], "data", at));
        e.block_time = get_int(ledger[i], "block_time", at);
        e.gas_price = get_number(ledger[i], "gas_price", at);
        e.ordinal = get_uint(ledger[i], "ordinal", at);
        chain.ledger_.emplace(get_string(ledger[i], "tx_id", at), std::move(e));
    }
    return chain;
}

void SimulatedChain::save(const std::filesystem::path& path) const
{
    const auto tmp = path.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error(Errc::Io, "cannot write " + tmp);
        }
        out << dump().dump(2) << '\n';
    }
    std::filesystem::rename(tmp, path);
}

SimulatedChain SimulatedChain::load(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::Io, "cannot read " + path.string());
    }
    std::stringstream ss;
    ss << in.rdbuf();
    return restore(parse_json(ss.str()));
}

} // namespace certkit
