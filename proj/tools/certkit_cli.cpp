// certkit: certify data with Merkle batching against a simulated chain.
//
// Exit codes: 0 ok / verified, 1 verification mismatch, 2 input error,
// 3 empty batch, 4 anchor or transaction lookup failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "certkit/anchor.hpp"
#include "certkit/bench.hpp"
#include "certkit/cost_model.hpp"
#include "certkit/errors.hpp"
#include "certkit/pipeline.hpp"
#include "certkit/poa.hpp"

namespace fs = std::filesystem;
using namespace certkit;

namespace {

enum Exit { kOk = 0, kMismatch = 1, kInput = 2, kEmpty = 3, kAnchor = 4 };

struct Globals {
    std::string store = ".certkit";
    std::uint64_t seed = 42;
    double gas_price = 1.0;
    double failure_rate = 0.1;
    double min_gas = 1.0;
    bool json = false;
    bool deterministic = false;
    std::string approach;
};

int exit_code_for(Errc code)
{
    switch (code) {
    case Errc::EmptyBatch:
    case Errc::NoData: return kEmpty;
    case Errc::TxNotFound:
    case Errc::OversizeData: return kAnchor;
    default: return kInput;
    }
}

std::string fmt(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

std::string read_all(std::istream& in)
{
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Bytes read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error(Errc::Io, "cannot read " + path.string());
    }
    return to_bytes(read_all(in));
}

template <class T>
std::vector<T> parse_list(const std::string& text, const char* what)
{
    std::vector<T> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        std::istringstream one(part);
        T v{};
        if (!(one >> v) || !one.eof()) {
            throw Error(Errc::InvalidArgument, std::string("bad ") + what + " value '" + part + "'");
        }
        out.push_back(v);
    }
    if (out.empty()) {
        throw Error(Errc::InvalidArgument, std::string("empty ") + what + " list");
    }
    return out;
}

/// Chain and pipeline for one invocation; the chain state lives in the store.
class Session {
public:
    Session(const Globals& g, const CLI::App& app, bool must_exist)
    {
        const fs::path dir = g.store;
        if (must_exist && !fs::exists(dir / "state.json")) {
            throw Error(Errc::Io, "no store at " + dir.string());
        }
        PipelineConfig config;
        config.gas_price = g.gas_price;
        if (!g.approach.empty()) {
            config.approach = approach_from_string(g.approach);
        }
        Clock clock;
        if (g.deterministic) {
            clock = [] { return Timestamp{0}; };
        }
        pipeline_.emplace(dir, config, clock);

        chain_path_ = dir / "chain.json";
        if (fs::exists(chain_path_)) {
            chain_.emplace(SimulatedChain::load(chain_path_));
            if (app.count("--failure-rate") > 0) {
                chain_->set_extra_failure_rate(g.failure_rate);
            }
            if (app.count("--min-gas") > 0) {
                chain_->set_gas_schedule({{0, g.min_gas}});
            }
        } else {
            ChainConfig c;
            c.seed = g.seed;
            c.extra_failure_rate = g.failure_rate;
            c.gas_schedule = {{0, g.min_gas}};
            chain_.emplace(c);
            chain_->save(chain_path_);
        }
    }

    Pipeline& pipeline() { return *pipeline_; }
    SimulatedChain& chain() { return *chain_; }
    void save_chain() const { chain_->save(chain_path_); }

private:
    std::optional<Pipeline> pipeline_;
    std::optional<SimulatedChain> chain_;
    fs::path chain_path_;
};

int cmd_submit(const Globals& g, const CLI::App& app, const std::vector<std::string>& files,
               const std::string& id)
{
    Session s(g, app, false);
    Pipeline& pl = s.pipeline();
    std::vector<std::pair<std::string, Bytes>> items;
    if (files.empty()) {
        std::string line;
        while (std::getline(std::cin, line)) {
            if (!line.empty()) {
                items.emplace_back("", to_bytes(line));
            }
        }
    } else {
        if (!id.empty() && files.size() != 1) {
            throw Error(Errc::InvalidArgument, "--id needs exactly one file");
        }
        for (const std::string& f : files) {
            items.emplace_back(id.empty() ? fs::path(f).filename().string() : id, read_file(f));
        }
    }
    if (items.empty()) {
        throw Error(Errc::InvalidArgument, "nothing to submit");
    }
    for (auto& [item_id, payload] : items) {
        if (item_id.empty()) {
            item_id = "item-" + std::to_string(pl.item_count() + 1);
        }
        const SubmitAck ack = pl.submit(item_id, std::move(payload));
        Json out{{"id", ack.item_id}, {"digest", ack.digest.to_hex()}};
        if (ack.ref) {
            out["batch"] = *ack.batch;
            out["ref"] = leaf_ref_to_json(*ack.ref);
        }
        std::cout << out.dump() << '\n';
    }
    return kOk;
}

int cmd_certify(const Globals& g, const CLI::App& app, bool retry)
{
    Session s(g, app, true);
    Pipeline& pl = s.pipeline();
    SimulatedChain& chain = s.chain();

    if (pl.approach() == Approach::Merkle) {
        if (pl.batch_rejected() && !retry) {
            throw Error(Errc::RetryRequired, "batch " + std::to_string(pl.current_batch().number) +
                                                 " was rejected; rerun with --retry to resubmit it");
        }
        const std::vector<CertificationRecord> recs = pl.certify_batch(Trigger::Manual, chain);
        s.save_chain();
        const bool accepted = recs.front().status == RecordStatus::Anchored;
        const Batch batch = pl.current_batch();
        const Digest root = pl.resolve_proof(recs.front()).expected_root;
        if (g.json) {
            Json out{{"approach", "merkle"},
                     {"transactions", 1},
                     {"accepted", accepted ? 1 : 0},
                     {"rejected", accepted ? 0 : 1},
                     {"root", root.to_hex()},
                     {"items", recs.size()},
                     {"attempts", recs.front().attempts}};
            if (accepted) {
                out["tx_id"] = recs.front().tx_id;
            }
            std::cout << out.dump() << '\n';
        } else {
            std::cout << "1 transaction, " << (accepted ? "accepted" : "rejected") << ", root " << root.to_hex()
                      << '\n'
                      << recs.size() << " items, attempt " << recs.front().attempts << '\n';
            if (accepted) {
                std::cout << "tx " << recs.front().tx_id << '\n';
            } else {
                std::cout << "batch " << batch.number << " kept; rerun with --retry\n";
            }
        }
        return accepted ? kOk : kAnchor;
    }

    std::vector<std::string> todo;
    bool skipped_failed = false;
    for (const std::string& id : pl.pending_items()) {
        const auto rec = pl.record(id);
        if (rec->status == RecordStatus::Failed && !retry) {
            skipped_failed = true;
            continue;
        }
        todo.push_back(id);
    }
    if (todo.empty()) {
        if (skipped_failed) {
            throw Error(Errc::RetryRequired, "only rejected items remain; rerun with --retry");
        }
        throw Error(Errc::EmptyBatch, "no data to certify");
    }
    std::size_t accepted = 0;
    for (const std::string& id : todo) {
        accepted += pl.certify_single(id, chain).status == RecordStatus::Anchored ? 1 : 0;
    }
    s.save_chain();
    const std::size_t rejected = todo.size() - accepted;
    if (g.json) {
        std::cout << Json{{"approach", "single"},
                          {"transactions", todo.size()},
                          {"accepted", accepted},
                          {"rejected", rejected}}
                         .dump()
                  << '\n';
    } else {
        std::cout << todo.size() << (todo.size() == 1 ? " transaction" : " transactions") << ", " << accepted
                  << " accepted, " << rejected << " rejected\n";
    }
    return rejected == 0 ? kOk : kAnchor;
}

int cmd_verify(const Globals& g, const CLI::App& app, const std::string& id, const std::string& payload_file)
{
    Session s(g, app, true);
    Pipeline& pl = s.pipeline();
    const auto rec = pl.record(id);
    if (!rec) {
        throw Error(Errc::UnknownItem, "unknown item '" + id + "'");
    }
    if (rec->status != RecordStatus::Anchored) {
        throw Error(Errc::InvalidArgument, "item '" + id + "' is " + to_string(rec->status) + ", not anchored");
    }
    const bool ok = payload_file.empty() ? pl.verify_record(*rec, s.chain())
                                         : pl.verify_payload(*rec, read_file(payload_file), s.chain());
    if (g.json) {
        std::cout << Json{{"id", id}, {"tx_id", rec->tx_id}, {"verified", ok}}.dump() << '\n';
    } else {
        std::cout << id << ": " << (ok ? "verified" : "MISMATCH") << " (tx " << rec->tx_id << ")\n";
    }
    return ok ? kOk : kMismatch;
}

int cmd_cost(const Globals& g, const std::string& n_list, double c_hash, double p, double d, bool csv)
{
    const auto ns = parse_list<std::uint64_t>(n_list, "N");
    const auto rows = cost_table(ns, CostParams{1, c_hash, p, d});
    if (g.json) {
        Json out = Json::array();
        for (const CostRow& r : rows) {
            for (const auto& [name, b] : {std::pair{"single", &r.single}, std::pair{"merkle", &r.merkle}}) {
                out.push_back(Json{{"approach", name},
                                   {"N", r.n},
                                   {"generation", b->generation},
                                   {"storage", b->storage},
                                   {"transaction", b->transaction},
                                   {"verification", b->verification},
                                   {"total", b->total}});
            }
        }
        std::cout << out.dump() << '\n';
    } else if (csv) {
        write_cost_csv(std::cout, rows);
    } else {
        write_cost_text(std::cout, rows);
    }
    return kOk;
}

int cmd_bench(const Globals& g, const std::string& sizes, BenchConfig config, const std::string& op,
              const std::string& out_path)
{
    if (!sizes.empty()) {
        config.leaf_sizes = parse_list<std::uint64_t>(sizes, "size");
    }
    std::vector<BenchRow> rows;
    if (op == "gen" || op == "both") {
        rows = bench_generation(config);
    }
    if (op == "proof" || op == "both") {
        const auto more = bench_proof_extraction(config);
        rows.insert(rows.end(), more.begin(), more.end());
    }
    if (g.deterministic) {
        for (BenchRow& r : rows) {
            r.trimmed_mean_ms = 0.0;
        }
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path, std::ios::trunc);
        if (!out) {
            throw Error(Errc::Io, "cannot write " + out_path);
        }
        write_bench_csv(out, rows);
    }
    if (g.json) {
        Json arr = Json::array();
        for (const BenchRow& r : rows) {
            arr.push_back(Json{{"op", r.op}, {"N", r.n}, {"trimmed_mean_ms", r.trimmed_mean_ms},
                               {"iterations", r.raw_count}});
        }
        std::cout << arr.dump() << '\n';
    } else if (out_path.empty()) {
        write_bench_csv(std::cout, rows);
    } else {
        std::cout << rows.size() << " rows written to " << out_path << '\n';
    }
    return kOk;
}

int cmd_poa(const Globals& g, std::size_t attractions, const std::string& failures, double p,
            std::size_t per_round)
{
    PoaScenario s;
    s.failures = parse_list<std::uint32_t>(failures, "failure");
    if (s.failures.size() == 1 && attractions > 1) {
        s.failures.assign(attractions, s.failures.front());
    }
    if (attractions != 0 && s.failures.size() != attractions) {
        throw Error(Errc::InvalidArgument, "--failures must list one value per attraction");
    }
    s.p = p;
    s.seed = g.seed;
    s.attendances_per_round = per_round;
    const PoaOutcome o = simulate_poa(s);
    const double in_p_naive = p > 0 ? o.naive.spend / p : 0.0;
    const double in_p_multi = p > 0 ? o.multilevel.spend / p : 0.0;
    if (g.json) {
        auto side = [](const PoaSpend& x) {
            return Json{{"submitted", x.submitted}, {"accepted", x.accepted}, {"rejected", x.rejected},
                        {"spend", x.spend},         {"attendances", x.attendances}, {"verified", x.verified}};
        };
        std::cout << Json{{"p", p},
                          {"failures", s.failures},
                          {"naive", side(o.naive)},
                          {"multilevel", side(o.multilevel)},
                          {"naive_formula", o.naive_formula},
                          {"multilevel_formula", o.multilevel_formula},
                          {"root", o.anchored_root.to_hex()}}
                         .dump()
                  << '\n';
    } else {
        std::cout << "naive:      spend " << fmt(o.naive.spend) << " = " << fmt(in_p_naive) << "p ("
                  << o.naive.accepted << " accepted, " << o.naive.rejected << " rejected), formula "
                  << fmt(o.naive_formula) << '\n'
                  << "multilevel: spend " << fmt(o.multilevel.spend) << " = " << fmt(in_p_multi) << "p ("
                  << o.multilevel.accepted << " accepted, " << o.multilevel.rejected << " rejected), formula "
                  << fmt(o.multilevel_formula) << '\n'
                  << "attendances verified: " << o.multilevel.verified << '/' << o.multilevel.attendances
                  << ", root " << o.anchored_root.to_hex() << '\n';
    }
    const bool all_ok = o.naive.verified == o.naive.attendances && o.multilevel.verified == o.multilevel.attendances;
    return all_ok ? kOk : kMismatch;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Certify data items by anchoring Merkle roots on a simulated chain"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--store", g.store, "Store directory")->capture_default_str();
    app.add_option("--seed", g.seed, "Chain and simulation seed")->capture_default_str();
    app.add_option("--gas-price", g.gas_price, "Gas price offered per transaction")->capture_default_str();
    app.add_option("--failure-rate", g.failure_rate, "Congestion failure probability")
        ->check(CLI::Range(0.0, 1.0))
        ->capture_default_str();
    app.add_option("--min-gas", g.min_gas, "Minimum gas price accepted by the chain")->capture_default_str();
    app.add_option("--approach", g.approach, "single or merkle (fixed when the store is created)")
        ->check(CLI::IsMember({"single", "merkle"}));
    app.add_flag("--json", g.json, "Machine-readable output");
    app.add_flag("--deterministic", g.deterministic, "Logical timestamps; timing fields zeroed");

    std::vector<std::string> files;
    std::string id;
    auto* submit = app.add_subcommand("submit", "Add items (files, or stdin lines)");
    submit->add_option("files", files, "Files to submit");
    submit->add_option("--id", id, "Item id (single file only)");

    bool retry = false;
    auto* certify = app.add_subcommand("certify", "Anchor pending items");
    certify->add_flag("--retry", retry, "Resubmit after a rejection");

    std::string verify_id;
    std::string payload_file;
    auto* verify = app.add_subcommand("verify", "Check an item against its anchored transaction");
    verify->add_option("id", verify_id, "Item id")->required();
    verify->add_option("--payload", payload_file, "Verify this file instead of the stored payload");

    std::string n_list = "1,16,128,1024";
    double c_hash = 1.0;
    double p = 1.0;
    double d = 0.0;
    bool csv = false;
    auto* cost = app.add_subcommand("cost", "Compare the cost of both approaches");
    cost->add_option("--n-list", n_list, "Comma-separated N values")->capture_default_str();
    cost->add_option("--c-hash", c_hash, "Cost of one digest")->capture_default_str();
    cost->add_option("--p", p, "Cost of one transaction")->capture_default_str();
    cost->add_option("--d", d, "Stored size of one node")->capture_default_str();
    cost->add_flag("--csv", csv, "CSV instead of a table");

    BenchConfig bench_config;
    std::string sizes;
    std::string op = "both";
    std::string out_path;
    auto* bench = app.add_subcommand("bench", "Time tree generation and proof extraction");
    bench->add_option("--sizes", sizes, "Comma-separated leaf counts (default: full schedule)");
    bench->add_option("--iterations", bench_config.iterations)->capture_default_str();
    bench->add_option("--trim", bench_config.trim_fraction)->capture_default_str();
    bench->add_option("--warmup", bench_config.warmup)->capture_default_str();
    bench->add_option("--op", op)->check(CLI::IsMember({"gen", "proof", "both"}))->capture_default_str();
    bench->add_option("--out", out_path, "CSV report path");

    std::size_t attractions = 2;
    std::string failures = "1,1";
    double poa_p = 1.0;
    std::size_t per_round = 3;
    auto* poa = app.add_subcommand("poa-sim", "Proof-of-Attendance spend, naive vs multi-level");
    poa->add_option("--attractions", attractions)->capture_default_str();
    poa->add_option("--failures", failures, "Failed rounds per attraction")->capture_default_str();
    poa->add_option("--p", poa_p, "Gas price per transaction")->capture_default_str();
    poa->add_option("--per-round", per_round, "Attendances per attraction and round")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kInput;
    }

    try {
        if (bench->parsed()) {
            // The bench seed follows the global one.
            bench_config.rng_seed = g.seed;
        }
        if (submit->parsed()) {
            return cmd_submit(g, app, files, id);
        }
        if (certify->parsed()) {
            return cmd_certify(g, app, retry);
        }
        if (verify->parsed()) {
            return cmd_verify(g, app, verify_id, payload_file);
        }
        if (cost->parsed()) {
            return cmd_cost(g, n_list, c_hash, p, d, csv);
        }
        if (bench->parsed()) {
            return cmd_bench(g, sizes, bench_config, op, out_path);
        }
        if (poa->parsed()) {
            return cmd_poa(g, attractions, failures, poa_p, per_round);
        }
    } catch (const Error& e) {
        std::cerr << "certkit: " << e.what() << '\n';
        return exit_code_for(e.code());
    } catch (const std::exception& e) {
        std::cerr << "certkit: " << e.what() << '\n';
        return kInput;
    }
    return kInput;
}
