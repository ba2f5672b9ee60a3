// Command-line surface for the library: exact CM fibers, least CM degrees,
// sporadic classification scans, and volcano dumps.
//
// Exit codes: 0 success, 2 input error, 3 mathematical precondition failure
// (the CM field does not split the quaternion algebra), 4 I/O failure.
// Progress goes to stderr; stdout carries data only.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <memory>
#include <thread>

#include "shimcm/serialize.hpp"

namespace {

struct Config {
    shimcm::i64 table_bound = 4'000'000;
    shimcm::i64 h_max = 100;
    std::string cache_dir;
    std::string data_dir;
    std::string format = "text";
    int jobs = 1;
};

std::string default_cache_dir()
{
    if (char const * env = std::getenv("SHIMCM_CACHE_DIR"))
        return env;
    return ".shimcm-cache";
}

std::string default_data_dir()
{
    if (char const * env = std::getenv("SHIMCM_DATA_DIR"))
        return env;
#ifdef SHIMCM_DATA_DIR
    return SHIMCM_DATA_DIR;
#else
    return "data";
#endif
}

struct TableHandle {
    shimcm::OrderTable table;
    shimcm::OrderScanIndex index;
};

TableHandle open_table(Config const & cfg)
{
    std::cerr << "order table: bound " << cfg.table_bound << ", cache "
              << cfg.cache_dir << "\n";
    shimcm::OrderTable t = shimcm::load_or_build_order_table(cfg.table_bound,
                                                             cfg.cache_dir);
    shimcm::OrderScanIndex index(t, cfg.h_max);
    std::cerr << "order table ready\n";
    return {std::move(t), std::move(index)};
}

int cmd_fiber(shimcm::i64 D, shimcm::i64 N, shimcm::i64 delta)
{
    auto fd = shimcm::fiber_general(D, N, delta);
    std::cout << shimcm::fiber_to_json(fd).dump(2) << "\n";
    return 0;
}

int cmd_least_degree(shimcm::i64 D, shimcm::i64 N, Config const & cfg)
{
    auto th = open_table(cfg);
    shimcm::ClassNumberCache cache;
    auto ld = shimcm::least_degree(D, N, th.index, cache);
    shimcm::i64 x1 = shimcm::x1_least_degree(D, N, ld.degree);
    if (cfg.format == "json") {
        nlohmann::ordered_json j;
        j["D"] = D;
        j["N"] = N;
        j["d_cm_x0"] = ld.degree;
        j["witness_delta"] = ld.witness_delta;
        j["d_cm_x1"] = x1;
        j["conditional"] = ld.conditional;
        std::cout << j.dump(2) << "\n";
    } else {
        std::cout << "d_CM(X_0^" << D << "(" << N << ")) = " << ld.degree
                  << "  witness delta = " << ld.witness_delta << "\n"
                  << "d_CM(X_1^" << D << "(" << N << ")) = " << x1 << "\n"
                  << "conditional = " << (ld.conditional ? "true" : "false") << "\n";
    }
    return 0;
}

int cmd_sporadic_scan(shimcm::i64 dn_max, Config const & cfg)
{
    auto th = open_table(cfg);
    auto tables = shimcm::KnownTables::load(cfg.data_dir);
    for (auto const & w : tables.warnings)
        std::cerr << "warning: " << w << "\n";
    auto pairs = shimcm::valid_pairs_up_to(dn_max);
    std::cerr << "scanning " << pairs.size() << " pairs with " << cfg.jobs
              << " worker(s)\n";

    std::vector<shimcm::SporadicVerdict> rows(pairs.size());
    int jobs = std::max(1, cfg.jobs);
    std::vector<std::thread> workers;
    for (int w = 0; w < jobs; w++)
        workers.emplace_back([&, w] {
            shimcm::ClassNumberCache cache;
            for (std::size_t i = w; i < pairs.size(); i += jobs)
                rows[i] = shimcm::classify(pairs[i].first, pairs[i].second,
                                           th.index, cache, tables);
        });
    for (auto & t : workers)
        t.join();

    std::cout << shimcm::scan_csv_header() << "\n";
    std::size_t counts[3] = {0, 0, 0};
    for (auto const & row : rows) {
        std::cout << shimcm::scan_csv_row(row) << "\n";
        counts[static_cast<int>(row.verdict)]++;
    }
    std::cerr << "summary: no_sporadic=" << counts[0]
              << " sporadic_cm=" << counts[1] << " unknown=" << counts[2] << "\n";
    if (!std::cout)
        throw std::runtime_error("write failure on stdout");
    return 0;
}

int cmd_volcano_dump(shimcm::VolcanoSpec const & spec)
{
    shimcm::MarkedComponent mc(spec);
    std::cout << shimcm::volcano_to_json(mc).dump(2) << "\n";
    return 0;
}

int cmd_build_table(Config const & cfg)
{
    auto th = open_table(cfg);
    std::cout << "bound=" << th.table.bound() << "\n";
    return 0;
}

} // namespace

int main(int argc, char ** argv)
{
    CLI::App app{"CM loci, least CM degrees and sporadic-point classification "
                 "for Shimura curves X_0^D(N)"};
    app.require_subcommand(1);
    app.fallthrough();

    Config cfg;
    cfg.cache_dir = default_cache_dir();
    cfg.data_dir = default_data_dir();
    app.add_option("--table-bound", cfg.table_bound, "order table bound |delta| <= X");
    app.add_option("--h-max", cfg.h_max, "class number cap for order scans");
    app.add_option("--cache-dir", cfg.cache_dir, "order table cache directory");
    app.add_option("--data-dir", cfg.data_dir, "published table data directory");
    app.add_option("--format", cfg.format, "output format: json, csv, text")
        ->check(CLI::IsMember({"json", "csv", "text"}));
    app.add_option("--jobs", cfg.jobs, "scan worker count")->check(CLI::PositiveNumber);

    shimcm::i64 D = 0, N = 1, delta = 0, dn_max = 6;
    auto * fiber = app.add_subcommand("fiber", "delta-CM fiber of X_0^D(N) as JSON");
    fiber->add_option("--D", D)->required();
    fiber->add_option("--N", N)->required();
    fiber->add_option("--delta", delta)->required();

    auto * least = app.add_subcommand("least-degree",
                                      "least CM degree on X_0^D(N) and X_1^D(N)");
    least->add_option("--D", D)->required();
    least->add_option("--N", N)->required();

    auto * scan = app.add_subcommand("sporadic-scan",
                                     "classify all coprime pairs with DN <= dn-max");
    scan->add_option("--dn-max", dn_max)->required()->check(CLI::Range(6, 1 << 30));

    shimcm::VolcanoSpec vspec;
    int sigma_flag = 0;
    auto * vol = app.add_subcommand("volcano-dump",
                                    "marked isogeny-volcano component as JSON");
    vol->add_option("--ell", vspec.ell)->required();
    vol->add_option("--delta-K", vspec.delta_K)->required();
    vol->add_option("--f0", vspec.f0);
    vol->add_option("--depth", vspec.depth)->required();
    vol->add_flag("--sigma", sigma_flag, "apply the involution marking");

    auto * build = app.add_subcommand("build-table", "build or refresh the order table cache");
    (void)build;

    CLI11_PARSE(app, argc, argv);

    try {
        if (fiber->parsed())
            return cmd_fiber(D, N, delta);
        if (least->parsed())
            return cmd_least_degree(D, N, cfg);
        if (scan->parsed())
            return cmd_sporadic_scan(dn_max, cfg);
        if (vol->parsed()) {
            vspec.sigma = sigma_flag != 0;
            return cmd_volcano_dump(vspec);
        }
        return cmd_build_table(cfg);
    } catch (shimcm::splitting_error const & e) {
        nlohmann::ordered_json err{{"error", {{"code", 3}, {"message", e.what()}}}};
        std::cout << err.dump(2) << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (std::invalid_argument const & e) {
        nlohmann::ordered_json err{{"error", {{"code", 2}, {"message", e.what()}}}};
        std::cout << err.dump(2) << "\n";
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (std::exception const & e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
    }
}
