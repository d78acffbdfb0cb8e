// Command-line front end: run a case, build scaling tables, run the
// invariant suite.
//
// Transport is chosen from the environment: HYDRO_TRANSPORT=inproc (default)
// runs every worker as a thread of this process; HYDRO_TRANSPORT=socket runs
// one rank per process, with HYDRO_ADDRESSES=host:port,... in rank order and
// HYDRO_RANK naming this process.

#include "hydro/config.hpp"
#include "hydro/harness.hpp"
#include "hydro/selftest.hpp"
#include "hydro/socket_transport.hpp"

#include "CLI11.hpp"

#include <cstdlib>
#include <iostream>
#include <sstream>

namespace {

hydro::Index3 parse_triple(const std::string& text, const char* what)
{
    hydro::Index3 v{};
    std::stringstream ss(text);
    std::string item;
    int n = 0;
    while (std::getline(ss, item, ',')) {
        if (n == 3) break;
        try {
            v[static_cast<std::size_t>(n++)] = std::stoi(item);
        } catch (const std::exception&) {
            n = 4;
            break;
        }
    }
    if (n != 3) {
        throw hydro::Error(hydro::ErrorCode::InvalidArgument, std::string(what) + " must be three integers a,b,c");
    }
    return v;
}

std::string env_or(const char* name, const std::string& fallback)
{
    const char* v = std::getenv(name);
    return v != nullptr ? std::string(v) : fallback;
}

struct RunArgs
{
    std::string case_id = "cavity";
    std::string grid = "32,32,32";
    std::string topology = "1,1,1";
    std::string scheme;
    int steps = 50;
    int window = 40;
    std::string config;
    std::string out = "out";
};

int do_run(const RunArgs& a)
{
    hydro::CaseSetup c = hydro::make_case(a.case_id, parse_triple(a.grid, "--grid"));
    if (!a.config.empty()) {
        hydro::apply_json(hydro::load_json(a.config), c.config);
    }
    if (!a.scheme.empty()) {
        c.config.scheme = hydro::parse_scheme(a.scheme);
    }
    const hydro::Index3 topo = parse_triple(a.topology, "--topology");
    const std::string transport = env_or("HYDRO_TRANSPORT", "inproc");

    hydro::TimingReport report;
    if (transport == "inproc") {
        report = hydro::run_benchmark(c, topo, a.steps, a.window);
    } else if (transport == "socket") {
        const auto peers = hydro::parse_addresses(env_or("HYDRO_ADDRESSES", ""));
        const int rank = std::stoi(env_or("HYDRO_RANK", "0"));
        const hydro::CaseSetup run = hydro::with_protocol(c, a.steps, a.window);
        const hydro::DecompositionPlan plan = hydro::plan_for(run, topo);
        if (plan.worker_count() != static_cast<int>(peers.size())) {
            throw hydro::Error(hydro::ErrorCode::InvalidArgument, "topology needs " +
                                                                      std::to_string(plan.worker_count()) +
                                                                      " ranks but the address list has " +
                                                                      std::to_string(peers.size()));
        }
        hydro::SocketTransport t(peers, rank);
        hydro::Communicator comm(t);
        report = hydro::report_header(run, plan, a.window, 0);
        hydro::run_rank(run, plan, comm, a.steps, rank == 0 ? &report.records : nullptr);
        comm.barrier();
        if (rank != 0) return 0;
        hydro::summarise(report);
    } else {
        throw hydro::Error(hydro::ErrorCode::InvalidArgument, "HYDRO_TRANSPORT must be inproc or socket");
    }
    const auto path = hydro::write_report(report, a.out);
    const auto f = report.fractions();
    std::cout << "case " << report.case_id << " grid " << report.grid[0] << "x" << report.grid[1] << "x"
              << report.grid[2] << " workers " << report.workers << "\n"
              << "T_TT " << report.average.T_TT << " s (stddev " << report.stddev_total << ")\n"
              << "fractions " << f.dump() << "\n"
              << "report " << path.string() << "\n";
    return 0;
}

int do_scale(const std::vector<std::string>& inputs, const std::string& baseline)
{
    std::vector<hydro::TimingReport> reports;
    for (const auto& p : inputs) reports.push_back(hydro::read_report(p));
    const auto rows = hydro::scaling_table(std::move(reports), baseline == "serial" ? hydro::Baseline::Serial
                                                                                   : hydro::Baseline::First);
    std::cout << hydro::scaling_csv(rows);
    return 0;
}

int do_selftest()
{
    int failed = 0;
    for (const auto& r : hydro::run_selftest()) {
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name;
        if (!r.detail.empty()) std::cout << " (" << r.detail << ")";
        std::cout << "\n";
        failed += r.pass ? 0 : 1;
    }
    return failed == 0 ? 0 : 1;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Staggered-grid LES solver with level-set free surface"};
    app.require_subcommand(1);

    RunArgs ra;
    auto* run = app.add_subcommand("run", "run one case and write a timing report");
    run->add_option("--case", ra.case_id, "cavity | tgv | wave")->check(CLI::IsMember({"cavity", "tgv", "wave"}));
    run->add_option("--grid", ra.grid, "global cells nx,ny,nz");
    run->add_option("--topology", ra.topology, "workers per direction tx,ty,tz");
    run->add_option("--scheme", ra.scheme, "cd2 | cd4 | weno5")->check(CLI::IsMember({"cd2", "cd4", "weno5"}));
    run->add_option("--steps", ra.steps, "time steps");
    run->add_option("--window", ra.window, "steps averaged at the end of the run");
    run->add_option("--config", ra.config, "JSON file with SimConfig overrides");
    run->add_option("--out", ra.out, "output directory");

    std::vector<std::string> inputs;
    std::string baseline = "first";
    auto* scale = app.add_subcommand("scale", "build a scaling table from reports");
    scale->add_option("--inputs", inputs, "report JSON files")->required();
    scale->add_option("--baseline", baseline, "first | serial")->check(CLI::IsMember({"first", "serial"}));

    auto* self = app.add_subcommand("selftest", "run the invariant suite");

    CLI11_PARSE(app, argc, argv);
    try {
        if (*run) return do_run(ra);
        if (*scale) return do_scale(inputs, baseline);
        if (*self) return do_selftest();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
