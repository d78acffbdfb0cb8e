#pragma once

/**
 * @file cases.hpp
 * @brief Benchmark definitions: lid-driven cavity, Taylor-Green vortex and
 *        solitary wave, with their initial states and diagnostics.
 */

#include "hydro/boundary.hpp"
#include "hydro/exchange.hpp"
#include "hydro/levelset.hpp"
#include "hydro/stepper.hpp"

#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

namespace hydro {

struct CavitySpec
{
    double re = 400.0;
    double lid = 1.0;
    double cfl = 0.8;
    double nu() const { return lid * 1.0 / re; }
};

struct TgvSpec
{
    double u0 = 1.0;
    double length = 1.0;
    double re = 1600.0;
    double cfl = 0.3;
    double nu() const { return length * u0 / re; }
    double extent() const { return 2.0 * std::numbers::pi * length; }
};

struct WaveSpec
{
    double depth = 0.2;
    double height = 0.02; // amplitude H
    double g = 9.81;
    double dt = 0.001;
    double cfl_lsm = 0.10;
    double dx = 0.01;

    double wavenumber() const { return std::sqrt(3.0 * height / (4.0 * depth * depth * depth)); }
    double celerity() const { return std::sqrt(g * (height + depth)); }
    double eps() const { return height / depth; }
};

/// Reference resolution rows per case (cells per direction).
inline const std::vector<int>& cavity_table_rows()
{
    static const std::vector<int> rows{160, 200, 320, 400, 800, 1000};
    return rows;
}
inline const std::vector<int>& tgv_table_rows()
{
    static const std::vector<int> rows{200, 320, 640, 1000};
    return rows;
}
inline const std::vector<Index3>& wave_table_rows()
{
    static const std::vector<Index3> rows{{1280, 40, 30}, {2560, 80, 60}, {5120, 160, 120}};
    return rows;
}

/// eta at x = 0 and its first three time derivatives, all divided by H.
struct WaveInflowState
{
    double eta_h = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
    double d3 = 0.0;
};

inline WaveInflowState wave_state(double t, const WaveSpec& s)
{
    const double k = s.wavenumber();
    const double c = s.celerity();
    const double th = k * (0.0 - c * t);
    const double sech = 1.0 / std::cosh(th);
    const double S = sech * sech;
    const double T = std::tanh(th);
    const double s1 = -2.0 * S * T;
    const double s2 = 4.0 * S * T * T - 2.0 * S * S;
    const double s3 = -8.0 * S * T * T * T + 16.0 * S * S * T;
    const double r = -k * c; // d(theta)/dt
    return {S, r * s1, r * r * s2, r * r * r * s3};
}

/// Elevation at the inflow plane x = 0.
inline double wave_elevation(double t, const WaveSpec& s)
{
    return s.height * wave_state(t, s).eta_h;
}

/// Boussinesq inflow velocity at height z above the bed; zero in the air.
inline Vec3 wave_inflow(double z, double t, const WaveSpec& s)
{
    const WaveInflowState w = wave_state(t, s);
    const double eta = s.height * w.eta_h;
    if (z > s.depth + eta) {
        return {0.0, 0.0, 0.0};
    }
    const double e = s.eps();
    const double d = s.depth;
    const double c = s.celerity();
    const double sgd = std::sqrt(s.g * d);
    const double disp = d * d / (3.0 * c * c);
    const double u = e * sgd * (w.eta_h - e * w.eta_h * w.eta_h / 4.0 + disp * (1.0 - 1.5 * z * z / (d * d)) * w.d2);
    const double wv = z * (e / c) * sgd *
                      ((1.0 - e * w.eta_h / 2.0) * w.d1 + disp * (1.0 - 0.5 * z * z / (d * d)) * w.d3);
    return {u, 0.0, wv};
}

/// Everything needed to start one benchmark on any topology.
struct CaseSetup
{
    std::string id;
    GlobalGrid grid;
    BoundaryMap boundaries{};
    SimConfig config;
    BoundarySetup bc;
    std::function<void(SimState&, const RankContext&)> init;
};

inline void init_cavity(SimState& s, const RankContext&)
{
    s.fields.u.fill(0.0);
    s.fields.v.fill(0.0);
    s.fields.w.fill(0.0);
    s.fields.p.fill(0.0);
}

inline void init_tgv(SimState& s, const RankContext& ctx, const TgvSpec& spec = {})
{
    const GlobalGrid& g = ctx.grid();
    const SubdomainSpec& sub = *ctx.sub;
    const double L = spec.length;
    StaggeredField& f = s.fields;
    f.u.for_each_interior([&](int i, int j, int k) {
        const Vec3 x = sample_position(g, sub, Location::XFace, i, j, k);
        f.u(i, j, k) = spec.u0 * std::sin(x[0] / L) * std::cos(x[1] / L) * std::cos(x[2] / L);
        const Vec3 y = sample_position(g, sub, Location::YFace, i, j, k);
        f.v(i, j, k) = -spec.u0 * std::cos(y[0] / L) * std::sin(y[1] / L) * std::cos(y[2] / L);
        f.w(i, j, k) = 0.0;
    });
}

/// Still water of depth d with discretely hydrostatic pressure.
inline void init_wave(SimState& s, const RankContext& ctx, const WaveSpec& spec, const FluidPair& fluids,
                      double gravity)
{
    const GlobalGrid& g = ctx.grid();
    const SubdomainSpec& sub = *ctx.sub;
    StaggeredField& f = s.fields;
    const int ng = f.phi.ghost();
    for (int k = -ng; k < f.phi.n(2) + ng; ++k)
        for (int j = -ng; j < f.phi.n(1) + ng; ++j)
            for (int i = -ng; i < f.phi.n(0) + ng; ++i) {
                const Vec3 x = sample_position(g, sub, Location::Cell, i, j, k);
                f.phi(i, j, k) = spec.depth - x[2];
            }
    material_fields(f.phi, fluids, f.rho, f.mu);
    // Column pressure from the top cell (p = 0) down, balancing
    // (p_k - p_{k+1}) / dz = g rho_face exactly as the predictor sees it.
    const int nz = g.dims[2];
    const double dz = g.spacing[2];
    auto rho_at = [&](int kg) {
        const double z = g.origin[2] + (kg + 0.5) * dz;
        return fluids.rho_a + (fluids.rho_w - fluids.rho_a) * heaviside(spec.depth - z, fluids.eps);
    };
    std::vector<double> column(static_cast<std::size_t>(nz), 0.0);
    for (int kg = nz - 2; kg >= 0; --kg) {
        const double rf = 0.5 * (rho_at(kg) + rho_at(kg + 1));
        column[static_cast<std::size_t>(kg)] = column[static_cast<std::size_t>(kg + 1)] + gravity * dz * rf;
    }
    f.p.for_each_interior([&](int i, int j, int k) {
        f.p(i, j, k) = column[static_cast<std::size_t>(sub.offset[2] + k)];
    });
    f.u.fill(0.0);
    f.v.fill(0.0);
    f.w.fill(0.0);
}

inline CaseSetup make_cavity(const Index3& dims, const CavitySpec& spec = {})
{
    CaseSetup c;
    c.id = "cavity";
    c.grid = GlobalGrid::uniform(dims, {1.0, 1.0, 1.0});
    c.boundaries = {BoundaryKind::NoSlipWall, BoundaryKind::NoSlipWall, BoundaryKind::Periodic,
                    BoundaryKind::Periodic,   BoundaryKind::NoSlipWall, BoundaryKind::MovingLid};
    c.config.case_id = "cavity";
    c.config.scheme = Scheme::CD4;
    c.config.cfl = spec.cfl;
    c.config.nu = spec.nu();
    c.config.fallback_dt = spec.cfl * c.grid.min_spacing() / spec.lid;
    c.bc.lid_velocity = {spec.lid, 0.0, 0.0};
    c.init = init_cavity;
    return c;
}

inline CaseSetup make_tgv(const Index3& dims, const TgvSpec& spec = {})
{
    CaseSetup c;
    c.id = "tgv";
    const double e = spec.extent();
    c.grid = GlobalGrid::uniform(dims, {e, e, e});
    c.boundaries = all_periodic();
    c.config.case_id = "tgv";
    c.config.scheme = Scheme::WENO5;
    c.config.cfl = spec.cfl;
    c.config.nu = spec.nu();
    c.config.fallback_dt = spec.cfl * c.grid.min_spacing() / spec.u0;
    c.init = [spec](SimState& s, const RankContext& ctx) { init_tgv(s, ctx, spec); };
    return c;
}

inline CaseSetup make_wave(const Index3& dims, const WaveSpec& spec = {})
{
    CaseSetup c;
    c.id = "wave";
    c.grid = GlobalGrid::uniform(dims, {dims[0] * spec.dx, dims[1] * spec.dx, dims[2] * spec.dx});
    c.boundaries = {BoundaryKind::Inflow,    BoundaryKind::Outflow,   BoundaryKind::SlipWall,
                    BoundaryKind::SlipWall,  BoundaryKind::SlipWall,  BoundaryKind::SlipWall};
    c.config.case_id = "wave";
    c.config.scheme = Scheme::WENO5;
    c.config.fixed_dt = spec.dt;
    c.config.enable_lsm = true;
    c.config.cfl_lsm = spec.cfl_lsm;
    c.config.fluids = FluidPair::water_air(c.grid.max_spacing());
    c.config.nu = c.config.fluids.mu_w / c.config.fluids.rho_w;
    c.config.source = {0.0, 0.0, -spec.g};
    c.bc.inflow_velocity = [spec](int comp, const Vec3& x, double t) { return wave_inflow(x[2], t, spec)[comp]; };
    c.bc.inflow_phi = [spec](const Vec3& x, double t) { return spec.depth + wave_elevation(t, spec) - x[2]; };
    const FluidPair fluids = c.config.fluids;
    c.init = [spec, fluids](SimState& s, const RankContext& ctx) { init_wave(s, ctx, spec, fluids, spec.g); };
    return c;
}

inline CaseSetup make_case(const std::string& id, const Index3& dims)
{
    if (id == "cavity") return make_cavity(dims);
    if (id == "tgv") return make_tgv(dims);
    if (id == "wave") return make_wave(dims);
    throw Error(ErrorCode::InvalidArgument, "unknown case '" + id + "'");
}

/// Volume-mean 1/2 (u^2 + v^2 + w^2) over the staggered samples.
inline double kinetic_energy(const StaggeredField& f, const RankContext& ctx)
{
    ExactAccumulator acc;
    for (int c = 0; c < 3; ++c) {
        const Array3& a = f.velocity(c);
        a.for_each_interior([&](int i, int j, int k) { acc.add(a(i, j, k) * a(i, j, k)); });
    }
    return 0.5 * ctx.comm->exact_sum(acc) / static_cast<double>(ctx.grid().cell_count());
}

/// Volume-mean velocity component.
inline double mean_velocity(const StaggeredField& f, int c, const RankContext& ctx)
{
    ExactAccumulator acc;
    const Array3& a = f.velocity(c);
    a.for_each_interior([&](int i, int j, int k) { acc.add(a(i, j, k)); });
    return ctx.comm->exact_sum(acc) / static_cast<double>(ctx.grid().cell_count());
}

/// Free-surface elevation per x column from phi zero crossings (global,
/// ghost-free phi; y-averaged). NaN where a column has no crossing.
inline std::vector<double> surface_profile(const Array3& phi_global, const GlobalGrid& g)
{
    std::vector<double> eta(static_cast<std::size_t>(g.dims[0]), 0.0);
    for (int i = 0; i < g.dims[0]; ++i) {
        double sum = 0.0;
        int count = 0;
        for (int j = 0; j < g.dims[1]; ++j) {
            for (int k = 0; k + 1 < g.dims[2]; ++k) {
                const double a = phi_global(i, j, k);
                const double b = phi_global(i, j, k + 1);
                if (a > 0.0 && b <= 0.0) {
                    const double z = g.origin[2] + (k + 0.5 + a / (a - b)) * g.spacing[2];
                    sum += z;
                    ++count;
                    break;
                }
            }
        }
        eta[static_cast<std::size_t>(i)] = count > 0 ? sum / count : std::nan("");
    }
    return eta;
}

/// x of the highest surface point, refined by a parabola through the
/// maximum and its neighbours.
inline double wave_crest_position(const Array3& phi_global, const GlobalGrid& g)
{
    const std::vector<double> z = surface_profile(phi_global, g);
    int best = -1;
    for (int i = 0; i < static_cast<int>(z.size()); ++i) {
        if (std::isnan(z[static_cast<std::size_t>(i)])) continue;
        if (best < 0 || z[static_cast<std::size_t>(i)] > z[static_cast<std::size_t>(best)]) best = i;
    }
    if (best < 0) {
        return std::nan("");
    }
    double offset = 0.0;
    if (best > 0 && best + 1 < static_cast<int>(z.size())) {
        const double a = z[static_cast<std::size_t>(best - 1)], b = z[static_cast<std::size_t>(best)],
                     c = z[static_cast<std::size_t>(best + 1)];
        const double den = a - 2.0 * b + c;
        if (!std::isnan(a) && !std::isnan(c) && den < 0.0) {
            offset = 0.5 * (a - c) / den;
        }
    }
    return g.origin[0] + (best + 0.5 + offset) * g.spacing[0];
}

} // namespace hydro
