#pragma once

/**
 * @file harness.hpp
 * @brief Worker launch, benchmark protocol, timing reports and scaling
 *        tables.
 */

#include "hydro/cases.hpp"
#include "hydro/exchange.hpp"
#include "hydro/profiler.hpp"
#include "hydro/stepper.hpp"

#include "json.hpp"

#include <cmath>
#include <algorithm>
#include <exception>
#include <functional>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace hydro {

/**
 * Runs fn(comm) on `workers` threads joined by an in-process hub. The first
 * exception aborts the hub (waking blocked peers) and is rethrown.
 */
template <class Fn>
void run_inproc(int workers, Fn&& fn, std::chrono::seconds timeout = std::chrono::seconds(600))
{
    if (workers < 1) {
        throw Error(ErrorCode::InvalidArgument, "need at least one worker");
    }
    InprocHub hub(workers, timeout);
    std::exception_ptr first;
    std::mutex m;
    auto body = [&](int r) {
        try {
            InprocTransport t(hub, r);
            Communicator comm(t);
            fn(comm);
        } catch (...) {
            {
                std::lock_guard lock(m);
                if (!first) first = std::current_exception();
            }
            hub.abort("worker " + std::to_string(r) + " failed");
        }
    };
    if (workers == 1) {
        body(0);
    } else {
        std::vector<std::thread> threads;
        threads.reserve(static_cast<std::size_t>(workers));
        for (int r = 0; r < workers; ++r) threads.emplace_back(body, r);
        for (auto& t : threads) t.join();
    }
    if (first) std::rethrow_exception(first);
}

using StepObserver = std::function<void(Solver&)>;

/// Builds the per-rank solver for a case on the given plan.
inline Solver make_solver(const CaseSetup& c, const DecompositionPlan& plan, Communicator& comm)
{
    const SubdomainSpec& sub = plan.subdomain(comm.rank());
    RankContext ctx{&plan, &sub, &comm};
    SimState st(sub.local_dims, plan.ghost_width());
    c.init(st, ctx);
    return Solver(ctx, c.config, c.bc, std::move(st));
}

inline DecompositionPlan plan_for(const CaseSetup& c, const Index3& topology)
{
    int ghost = ghost_width_for(c.config.scheme);
    if (c.config.enable_lsm) ghost = std::max(ghost, ghost_width_for(Scheme::WENO5));
    return build_decomposition(c.grid, topology, ghost, c.boundaries);
}

struct TimingReport
{
    std::string case_id;
    std::string scheme;
    Index3 grid{};
    Index3 topology{1, 1, 1};
    int workers = 1;
    double node_equivalent = 1.0;
    int window = 40;
    std::vector<StepRecord> records;
    StepRecord average;
    double stddev_total = 0.0;

    /// Phase shares of the averaged total, plus communication share.
    nlohmann::json fractions() const
    {
        const double tt = average.T_TT > 0.0 ? average.T_TT : 1.0;
        return {{"T_LS", average.T_LS / tt},
                {"T_CD", average.T_CD / tt},
                {"T_P", average.T_P / tt},
                {"T_up", average.T_up / tt},
                {"other", std::max(0.0, 1.0 - (average.T_LS + average.T_CD + average.T_P + average.T_up) / tt)},
                {"comm", average.comm / tt}};
    }

    bool phases_within_total(double slack = 1.02) const
    {
        return average.T_LS + average.T_CD + average.T_P + average.T_up <= slack * average.T_TT;
    }
};

/// Mean of the last `window` records and the standard deviation of T_TT.
inline void summarise(TimingReport& r)
{
    const int n = static_cast<int>(r.records.size());
    if (n == 0 || r.window < 1 || r.window > n) {
        throw Error(ErrorCode::ReportIncomplete, "not enough step records for the averaging window");
    }
    StepRecord a;
    const int first = n - r.window;
    for (int s = first; s < n; ++s) {
        const StepRecord& x = r.records[static_cast<std::size_t>(s)];
        a.T_TT += x.T_TT;
        a.T_LS += x.T_LS;
        a.T_CD += x.T_CD;
        a.T_P += x.T_P;
        a.T_up += x.T_up;
        a.comm += x.comm;
        a.dt += x.dt;
    }
    const double w = r.window;
    a.T_TT /= w;
    a.T_LS /= w;
    a.T_CD /= w;
    a.T_P /= w;
    a.T_up /= w;
    a.comm /= w;
    a.dt /= w;
    a.step = r.records.back().step;
    a.t = r.records.back().t;
    double var = 0.0;
    for (int s = first; s < n; ++s) {
        const double d = r.records[static_cast<std::size_t>(s)].T_TT - a.T_TT;
        var += d * d;
    }
    r.average = a;
    r.stddev_total = r.window > 1 ? std::sqrt(var / (w - 1.0)) : 0.0;
}

/// Fills the metadata fields of a report for a case on a plan.
inline TimingReport report_header(const CaseSetup& c, const DecompositionPlan& plan, int window, int cores_per_node)
{
    TimingReport report;
    report.case_id = c.id;
    report.scheme = to_string(c.config.scheme);
    report.grid = c.grid.dims;
    report.topology = plan.topology();
    report.workers = plan.worker_count();
    const int cpn = cores_per_node > 0 ? cores_per_node : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    report.node_equivalent = static_cast<double>(report.workers) / cpn;
    report.window = window;
    return report;
}

/**
 * Body of one rank: builds the solver and advances `steps` steps. Rank 0
 * appends one record per step to `records` (other ranks may pass null).
 */
inline void run_rank(const CaseSetup& c, const DecompositionPlan& plan, Communicator& comm, int steps,
                     std::vector<StepRecord>* records, const StepObserver& observer = {})
{
    Solver solver = make_solver(c, plan, comm);
    Profiler prof;
    const bool master = comm.rank() == 0 && records != nullptr;
    for (int s = 0; s < steps; ++s) {
        prof.reset();
        const double comm0 = comm.stats().seconds;
        solver.step(master ? &prof : nullptr);
        if (master) {
            StepRecord rec;
            rec.step = solver.state().step;
            rec.t = solver.state().t;
            rec.dt = solver.state().dt;
            rec.T_TT = prof.seconds(Phase::Total);
            rec.T_LS = prof.seconds(Phase::LevelSet);
            rec.T_CD = prof.seconds(Phase::ConvDiff);
            rec.T_P = prof.seconds(Phase::Pressure);
            rec.T_up = prof.seconds(Phase::Update);
            rec.comm = comm.stats().seconds - comm0;
            records->push_back(rec);
        }
        if (observer) observer(solver);
    }
}

inline CaseSetup with_protocol(CaseSetup c, int steps, int window)
{
    c.config.steps = steps;
    c.config.window = window;
    c.config.validate();
    return c;
}

/**
 * Runs `steps` steps of a case on the given topology with the in-process
 * transport; every rank calls `observer` after each step (collectives are
 * allowed there). Timings are taken on rank 0.
 */
inline TimingReport run_benchmark(const CaseSetup& c, const Index3& topology, int steps, int window,
                                  const StepObserver& observer = {}, int cores_per_node = 0)
{
    const CaseSetup run = with_protocol(c, steps, window);
    const DecompositionPlan plan = plan_for(run, topology);
    TimingReport report = report_header(run, plan, window, cores_per_node);
    try {
        run_inproc(plan.worker_count(), [&](Communicator& comm) {
            run_rank(run, plan, comm, steps, comm.rank() == 0 ? &report.records : nullptr, observer);
        });
    } catch (const Error& e) {
        if (e.code() == ErrorCode::TransportFailure) {
            throw Error(ErrorCode::ReportIncomplete, std::string("run aborted: ") + e.what());
        }
        throw;
    }
    summarise(report);
    return report;
}

inline double speedup(double t1, double tn)
{
    if (!(t1 > 0.0) || !(tn > 0.0)) {
        throw Error(ErrorCode::NonPositiveTime, "times must be positive");
    }
    return t1 / tn;
}

/// E = (P T_p) / (Q T_q) as written; exceeds one for ideal scaling when P > Q.
inline double efficiency(double p, double tp, double q, double tq)
{
    if (!(tp > 0.0) || !(tq > 0.0) || !(p > 0.0) || !(q > 0.0)) {
        throw Error(ErrorCode::NonPositiveTime, "times and counts must be positive");
    }
    return (p * tp) / (q * tq);
}

/// Conventional reading: (T_q Q) / (T_p P), 1 for ideal scaling.
inline double efficiency_normalized(double p, double tp, double q, double tq)
{
    return 1.0 / efficiency(p, tp, q, tq);
}

inline const char* kCsvHeader = "step,t,dt,T_TT,T_LS,T_CD,T_P,T_up,comm";

inline nlohmann::json to_json(const StepRecord& r)
{
    return {{"step", r.step}, {"t", r.t},       {"dt", r.dt},     {"T_TT", r.T_TT}, {"T_LS", r.T_LS},
            {"T_CD", r.T_CD}, {"T_P", r.T_P}, {"T_up", r.T_up}, {"comm", r.comm}};
}

inline StepRecord step_from_json(const nlohmann::json& j)
{
    StepRecord r;
    r.step = j.at("step").get<long>();
    r.t = j.at("t").get<double>();
    r.dt = j.at("dt").get<double>();
    r.T_TT = j.at("T_TT").get<double>();
    r.T_LS = j.at("T_LS").get<double>();
    r.T_CD = j.at("T_CD").get<double>();
    r.T_P = j.at("T_P").get<double>();
    r.T_up = j.at("T_up").get<double>();
    r.comm = j.at("comm").get<double>();
    return r;
}

inline nlohmann::json to_json(const TimingReport& r)
{
    nlohmann::json steps = nlohmann::json::array();
    for (const auto& s : r.records) steps.push_back(to_json(s));
    return {{"case", r.case_id},
            {"scheme", r.scheme},
            {"grid", r.grid},
            {"topology", r.topology},
            {"workers", r.workers},
            {"node_equivalent", r.node_equivalent},
            {"window", r.window},
            {"average", to_json(r.average)},
            {"stddev_T_TT", r.stddev_total},
            {"fractions", r.fractions()},
            {"steps", steps}};
}

inline TimingReport report_from_json(const nlohmann::json& j)
{
    TimingReport r;
    try {
        r.case_id = j.at("case").get<std::string>();
        r.scheme = j.at("scheme").get<std::string>();
        r.grid = j.at("grid").get<Index3>();
        r.topology = j.at("topology").get<Index3>();
        r.workers = j.at("workers").get<int>();
        r.node_equivalent = j.at("node_equivalent").get<double>();
        r.window = j.at("window").get<int>();
        r.average = step_from_json(j.at("average"));
        r.stddev_total = j.at("stddev_T_TT").get<double>();
        for (const auto& s : j.at("steps")) r.records.push_back(step_from_json(s));
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, std::string("malformed report: ") + e.what());
    }
    return r;
}

inline std::string to_csv(const TimingReport& r)
{
    std::ostringstream os;
    os.precision(17);
    os << kCsvHeader << '\n';
    for (const auto& s : r.records) {
        os << s.step << ',' << s.t << ',' << s.dt << ',' << s.T_TT << ',' << s.T_LS << ',' << s.T_CD << ',' << s.T_P
           << ',' << s.T_up << ',' << s.comm << '\n';
    }
    return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& text)
{
    std::ofstream out(p);
    if (!out) {
        throw Error(ErrorCode::IoError, "cannot open " + p.string() + " for writing");
    }
    out << text;
    if (!out) {
        throw Error(ErrorCode::IoError, "write to " + p.string() + " failed");
    }
}

/// Writes <stem>.csv and <stem>.json into `dir`; returns the JSON path.
inline std::filesystem::path write_report(const TimingReport& r, const std::filesystem::path& dir,
                                          const std::string& stem = "report")
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) {
        throw Error(ErrorCode::IoError, "cannot create " + dir.string());
    }
    write_text(dir / (stem + ".csv"), to_csv(r));
    const auto json_path = dir / (stem + ".json");
    write_text(json_path, to_json(r).dump(2) + "\n");
    return json_path;
}

inline TimingReport read_report(const std::filesystem::path& p)
{
    std::ifstream in(p);
    if (!in) {
        throw Error(ErrorCode::IoError, "cannot open " + p.string());
    }
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::IoError, std::string("cannot parse ") + p.string() + ": " + e.what());
    }
    return report_from_json(j);
}

struct ScalingRow
{
    int n = 1;
    double T_n = 0.0;
    double S_n = 0.0;
    double E_literal = 0.0;
    double E = 0.0;
    double comm_fraction = 0.0;
};

enum class Baseline { First, Serial };

/// Rows sorted by worker count. Reports must share case and grid.
inline std::vector<ScalingRow> scaling_table(std::vector<TimingReport> reports, Baseline baseline)
{
    if (reports.empty()) {
        throw Error(ErrorCode::InvalidArgument, "no reports");
    }
    for (const auto& r : reports) {
        if (r.case_id != reports.front().case_id || r.grid != reports.front().grid) {
            throw Error(ErrorCode::InvalidArgument, "reports mix cases or grids");
        }
    }
    std::stable_sort(reports.begin(), reports.end(),
                     [](const TimingReport& a, const TimingReport& b) { return a.workers < b.workers; });
    const TimingReport* base = &reports.front();
    if (baseline == Baseline::Serial) {
        base = nullptr;
        for (const auto& r : reports) {
            if (r.workers == 1) base = &r;
        }
        if (base == nullptr) {
            throw Error(ErrorCode::InvalidArgument, "serial baseline requested but no single-worker report");
        }
    }
    std::vector<ScalingRow> rows;
    for (const auto& r : reports) {
        ScalingRow row;
        row.n = r.workers;
        row.T_n = r.average.T_TT;
        row.S_n = speedup(base->average.T_TT, r.average.T_TT);
        row.E_literal = efficiency(r.workers, r.average.T_TT, base->workers, base->average.T_TT);
        row.E = efficiency_normalized(r.workers, r.average.T_TT, base->workers, base->average.T_TT);
        row.comm_fraction = r.average.T_TT > 0.0 ? r.average.comm / r.average.T_TT : 0.0;
        rows.push_back(row);
    }
    return rows;
}

inline std::string scaling_csv(const std::vector<ScalingRow>& rows)
{
    std::ostringstream os;
    os.precision(10);
    os << "n,T_n,S_n,E_literal,E,comm_fraction\n";
    for (const auto& r : rows) {
        os << r.n << ',' << r.T_n << ',' << r.S_n << ',' << r.E_literal << ',' << r.E << ',' << r.comm_fraction << '\n';
    }
    return os.str();
}

/// Gathers the owned velocity and pressure of every rank onto rank 0.
struct GlobalFields
{
    Array3 u, v, w, p, phi;
};

inline GlobalFields gather_fields(const Solver& s)
{
    const RankContext& ctx = s.context();
    const StaggeredField& f = s.state().fields;
    GlobalFields g;
    g.u = gather_interior(f.u, *ctx.plan, *ctx.comm);
    g.v = gather_interior(f.v, *ctx.plan, *ctx.comm);
    g.w = gather_interior(f.w, *ctx.plan, *ctx.comm);
    g.p = gather_interior(f.p, *ctx.plan, *ctx.comm);
    g.phi = gather_interior(f.phi, *ctx.plan, *ctx.comm);
    return g;
}

} // namespace hydro
