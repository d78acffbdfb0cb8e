#pragma once

/**
 * @file stepper.hpp
 * @brief One fractional step: time-step selection, level-set update, eddy
 *        viscosity, RK3 predictor, pressure solve and projection.
 */

#include "hydro/boundary.hpp"
#include "hydro/exchange.hpp"
#include "hydro/levelset.hpp"
#include "hydro/pressure.hpp"
#include "hydro/profiler.hpp"
#include "hydro/schemes.hpp"
#include "hydro/turbulence.hpp"

#include <array>
#include <cmath>
#include <optional>
#include <string>

namespace hydro {

struct SimConfig
{
    std::string case_id = "cavity";
    Scheme scheme = Scheme::CD4;
    Cd4Coefficients cd4 = Cd4Coefficients::Standard;
    bool mirrored_weno_weights = false;
    double cfl = 0.8;
    std::optional<double> fixed_dt;
    double fallback_dt = 1e-3;
    bool viscous_limit = true;
    double cfl_lsm = 0.10;
    bool enable_lsm = false;
    bool enable_sgs = true;
    double nu = 1.0 / 400.0;
    Vec3 source{0.0, 0.0, 0.0};
    int steps = 50;
    int window = 40;
    int output_every = 0;
    double pressure_tolerance = 1e-6;
    int max_cycles = 100;
    FluidPair fluids;
    int reinit_iterations = 15;
    double reinit_tolerance = 5e-3;

    void validate() const
    {
        if (steps < 1) {
            throw Error(ErrorCode::InvalidArgument, "step count must be >= 1");
        }
        if (window < 1 || window > steps) {
            throw Error(ErrorCode::InvalidArgument, "averaging window must lie in [1, steps]");
        }
        if (fixed_dt) {
            if (!(*fixed_dt > 0.0)) {
                throw Error(ErrorCode::InvalidArgument, "fixed time step must be positive");
            }
        } else if (!(cfl > 0.0 && cfl <= 1.0)) {
            throw Error(ErrorCode::InvalidArgument, "CFL must lie in (0, 1]");
        }
        if (!(nu >= 0.0)) {
            throw Error(ErrorCode::InvalidArgument, "viscosity must be non-negative");
        }
        if (enable_lsm) {
            fluids.validate();
        }
    }

    SchemeOptions scheme_options() const
    {
        return {scheme, cd4, mirrored_weno_weights ? WenoParams::mirrored() : WenoParams::standard()};
    }

    ReinitConfig reinit_config() const
    {
        ReinitConfig r;
        r.cfl = cfl_lsm;
        r.max_iterations = reinit_iterations;
        r.tolerance = reinit_tolerance;
        r.weno = mirrored_weno_weights ? WenoParams::mirrored() : WenoParams::standard();
        return r;
    }
};

struct SimState
{
    StaggeredField fields;
    Array3 p_hat; // last pressure increment, ghosts current
    double t = 0.0;
    long step = 0;
    double dt = 0.0;
    SolveStats last_solve;
    ReinitResult last_reinit;

    SimState() = default;
    SimState(const Index3& local, int ghost) : fields(local, ghost), p_hat(local, ghost) {}
};

/**
 * CFL-limited step: cfl / max over cells of sum_d |u_d| / dx_d with face
 * maxima per cell, reduced globally. Falls back to `fallback` when the flow
 * is at rest. With nu_max > 0 the explicit-diffusion bound
 * 2 / (nu_max (16/3) sum_d 1/dx_d^2) also applies.
 */
inline double compute_dt(const StaggeredField& f, const RankContext& ctx, double cfl, double fallback,
                         double nu_max = 0.0)
{
    const GlobalGrid& g = ctx.grid();
    double local = 0.0;
    const std::array<std::ptrdiff_t, 3> st{f.u.stride(0), f.u.stride(1), f.u.stride(2)};
    f.u.for_each_interior([&](int i, int j, int k) {
        const std::size_t idx = f.u.index(i, j, k);
        double s = 0.0;
        for (int d = 0; d < 3; ++d) {
            const double* p = f.velocity(d).data() + idx;
            s += std::max(std::abs(p[0]), std::abs(p[-st[d]])) / g.spacing[d];
        }
        local = std::max(local, s);
    });
    std::array<double, 2> red{local, nu_max};
    ctx.comm->allreduce(std::span<double>(red), ReductionKind::Max);
    double dt = red[0] < 1e-12 ? fallback : cfl / red[0];
    if (red[1] > 0.0) {
        double sum = 0.0;
        for (int d = 0; d < 3; ++d) sum += 1.0 / (g.spacing[d] * g.spacing[d]);
        dt = std::min(dt, 2.0 / (red[1] * (16.0 / 3.0) * sum));
    }
    return dt;
}

/// Fills velocity ghosts (and boundary faces) plus p and nu_t mirror ghosts.
inline void apply_boundary_conditions(StaggeredField& f, const RankContext& ctx, const BoundarySetup& bc, double t)
{
    fill_velocity(f, ctx, bc, t, true);
    fill_scalar(f.p, static_cast<int>(FieldTag::P), ctx, ScalarBoundary::Mirror);
    fill_scalar(f.nu_t, static_cast<int>(FieldTag::NuT), ctx, ScalarBoundary::Mirror);
}

/// phi ghosts: linear extrapolation, prescribed values on inflow faces.
inline void fill_phi(Array3& phi, const RankContext& ctx, const BoundarySetup& bc, double t)
{
    fill_scalar(phi, static_cast<int>(FieldTag::Phi), ctx, ScalarBoundary::Extrapolate, [&](Array3& a, Face f) {
        if (ctx.plan->boundary(f) != BoundaryKind::Inflow || !bc.inflow_phi) {
            return false;
        }
        const int d = axis_of(f);
        detail::for_each_face_ghost(a, f, [&](const Index3& tr) {
            for (int m = 1; m <= a.ghost(); ++m) {
                const Index3 gi = detail::shifted(tr, d, is_high(f) ? a.n(d) - 1 + m : -m);
                a.at(gi) = bc.inflow_phi(sample_position(ctx.grid(), *ctx.sub, Location::Cell, gi[0], gi[1], gi[2]), t);
            }
        });
        return true;
    });
}

/// Net outward volume flux through the physical faces (exact global sum)
/// and the global outflow area.
inline std::pair<double, double> boundary_flux(const StaggeredField& f, const RankContext& ctx)
{
    const GlobalGrid& g = ctx.grid();
    const SubdomainSpec& sub = *ctx.sub;
    ExactAccumulator flux;
    ExactAccumulator area;
    for (Face face : kAllFaces) {
        if (!sub.physical(face)) continue;
        const BoundaryKind kind = ctx.plan->boundary(face);
        const int d = axis_of(face);
        const int t1 = (d + 1) % 3, t2 = (d + 2) % 3;
        const double a = g.spacing[t1] * g.spacing[t2];
        const Array3& u = f.velocity(d);
        const int wall = is_high(face) ? u.n(d) - 1 : -1;
        const double sign = is_high(face) ? 1.0 : -1.0;
        Index3 idx{};
        idx[d] = wall;
        for (int b = 0; b < u.n(t2); ++b) {
            for (int c = 0; c < u.n(t1); ++c) {
                idx[t1] = c;
                idx[t2] = b;
                flux.add(sign * u.at(idx) * a);
                if (kind == BoundaryKind::Outflow) area.add(a);
            }
        }
    }
    auto fd = flux.digits();
    auto ad = area.digits();
    std::array<double, 2 * ExactAccumulator::kLimbs> both{};
    std::copy(fd.begin(), fd.end(), both.begin());
    std::copy(ad.begin(), ad.end(), both.begin() + ExactAccumulator::kLimbs);
    ctx.comm->allreduce(std::span<double>(both), ReductionKind::Sum);
    const double q = ExactAccumulator::from_digits(std::span<const double>(both).first(ExactAccumulator::kLimbs)).value();
    const double ar = ExactAccumulator::from_digits(std::span<const double>(both).last(ExactAccumulator::kLimbs)).value();
    return {q, ar};
}

/// Shifts outflow normal velocities uniformly so the net boundary flux is zero.
inline void balance_outflow(StaggeredField& f, const RankContext& ctx)
{
    bool any = false;
    for (Face face : kAllFaces) any = any || ctx.plan->boundary(face) == BoundaryKind::Outflow;
    if (!any) return;
    const auto [q, area] = boundary_flux(f, ctx);
    if (area <= 0.0) return;
    const double delta = -q / area;
    for (Face face : kAllFaces) {
        if (!ctx.sub->physical(face) || ctx.plan->boundary(face) != BoundaryKind::Outflow) continue;
        const int d = axis_of(face);
        Array3& u = f.velocity(d);
        const int wall = is_high(face) ? u.n(d) - 1 : -1;
        const double sign = is_high(face) ? 1.0 : -1.0;
        detail::for_each_face_ghost(u, face, [&](const Index3& tr) {
            u.at(detail::shifted(tr, d, wall)) += sign * delta;
        });
    }
}

/// Right-hand side R = -C + D - (1/rho_f) grad p + S for component c.
inline void momentum_rhs(const StaggeredField& f, const GlobalGrid& g, const SimConfig& cfg, int c, Array3& conv,
                         Array3& out)
{
    convective_term(f, g, cfg.scheme_options(), c, conv);
    diffusive_term(f, g, cfg.nu, cfg.enable_lsm, c, out);
    const std::ptrdiff_t st = f.p.stride(c);
    const double h = g.spacing[c];
    const double s = cfg.source[c];
    out.for_each_interior([&](int i, int j, int k) {
        const std::size_t idx = f.p.index(i, j, k);
        const double* p = f.p.data() + idx;
        const double grad = face_inverse_density(f.rho, idx, st) * (p[st] - p[0]) / h;
        out(i, j, k) = (out(i, j, k) - conv(i, j, k)) - grad + s;
    });
}

/**
 * Low-storage RK3 with stage fractions 1/3, 1/2, 1 applied to u^t:
 * u^(k) = u^t + a_k dt R(u^(k-1)). Ghosts are refreshed after each stage
 * and the pressure stays frozen at p^t.
 */
inline void predictor(SimState& s, const RankContext& ctx, const SimConfig& cfg, const BoundarySetup& bc)
{
    static constexpr std::array<double, 3> kFractions{1.0 / 3.0, 0.5, 1.0};
    StaggeredField& f = s.fields;
    const GlobalGrid& g = ctx.grid();
    std::array<Array3, 3> base{f.u, f.v, f.w};
    std::array<Array3, 3> rhs;
    Array3 conv(f.u.interior(), 0);
    for (auto& r : rhs) r = Array3(f.u.interior(), 0);
    for (double a : kFractions) {
        for (int c = 0; c < 3; ++c) {
            momentum_rhs(f, g, cfg, c, conv, rhs[c]);
        }
        for (int c = 0; c < 3; ++c) {
            Array3& u = f.velocity(c);
            const Array3& b = base[c];
            const Array3& r = rhs[c];
            u.for_each_interior([&](int i, int j, int k) { u(i, j, k) = b(i, j, k) + a * s.dt * r(i, j, k); });
        }
        fill_velocity(f, ctx, bc, s.t + a * s.dt, true);
    }
}

/// Per-rank solver: owns the state and the multigrid hierarchy.
class Solver
{
public:
    Solver(const RankContext& ctx, SimConfig cfg, BoundarySetup bc, SimState state)
        : ctx_(ctx), cfg_(std::move(cfg)), bc_(std::move(bc)), state_(std::move(state)),
          mg_(ctx, MultigridOptions{2, 2, 50, cfg_.max_cycles, cfg_.pressure_tolerance})
    {
        cfg_.validate();
        if (state_.fields.u.ghost() < stencil_reach(cfg_.scheme) ||
            (cfg_.enable_lsm && state_.fields.u.ghost() < stencil_reach(Scheme::WENO5))) {
            throw Error(ErrorCode::SchemeStencilOverflow, "ghost width too small for the selected schemes");
        }
        refresh();
    }

    const SimState& state() const { return state_; }
    SimState& state() { return state_; }
    const SimConfig& config() const { return cfg_; }
    const RankContext& context() const { return ctx_; }
    const BoundarySetup& boundary() const { return bc_; }

    /// Brings every ghost layer and the material fields up to date.
    void refresh()
    {
        StaggeredField& f = state_.fields;
        if (cfg_.enable_lsm) {
            fill_phi(f.phi, ctx_, bc_, state_.t);
            material_fields(f.phi, cfg_.fluids, f.rho, f.mu);
        }
        apply_boundary_conditions(f, ctx_, bc_, state_.t);
        fill_scalar(state_.p_hat, static_cast<int>(FieldTag::P), ctx_, ScalarBoundary::Mirror);
    }

    double molecular_nu_max() const
    {
        if (!cfg_.enable_lsm) return cfg_.nu;
        return std::max(cfg_.fluids.mu_w / cfg_.fluids.rho_w, cfg_.fluids.mu_a / cfg_.fluids.rho_a);
    }

    double next_dt()
    {
        if (cfg_.fixed_dt) return *cfg_.fixed_dt;
        double nu_max = 0.0;
        if (cfg_.viscous_limit) {
            nu_max = molecular_nu_max() + max_abs_interior(state_.fields.nu_t);
        }
        return compute_dt(state_.fields, ctx_, cfg_.cfl, cfg_.fallback_dt, nu_max);
    }

    void step(Profiler* prof = nullptr)
    {
        PhaseScope total(prof, Phase::Total);
        StaggeredField& f = state_.fields;
        {
            PhaseScope ph(prof, Phase::TimeStep);
            state_.dt = next_dt();
        }
        const double t1 = state_.t + state_.dt;
        if (cfg_.enable_lsm) {
            PhaseScope ph(prof, Phase::LevelSet);
            const GhostFill fill = [&](Array3& a) { fill_phi(a, ctx_, bc_, t1); };
            lsm_advect(f.phi, f, ctx_.grid(), state_.dt, fill, cfg_.reinit_config().weno);
            state_.last_reinit = reinitialize(f.phi, ctx_.grid(), cfg_.reinit_config(), fill, *ctx_.comm);
            material_fields(f.phi, cfg_.fluids, f.rho, f.mu);
        }
        if (cfg_.enable_sgs) {
            PhaseScope ph(prof, Phase::Sgs);
            eddy_viscosity_field(f, ctx_.grid());
            fill_scalar(f.nu_t, static_cast<int>(FieldTag::NuT), ctx_, ScalarBoundary::Mirror);
        }
        {
            PhaseScope ph(prof, Phase::ConvDiff);
            predictor(state_, ctx_, cfg_, bc_);
        }
        Array3 p_prev;
        DensitySplit split;
        {
            PhaseScope ph(prof, Phase::Pressure);
            balance_outflow(f, ctx_);
            fill_velocity(f, ctx_, bc_, t1, false);
            if (cfg_.enable_lsm) {
                p_prev = state_.p_hat;
                split = {&f.rho, &p_prev, cfg_.fluids.rho_a};
            }
            state_.last_solve = solve_pressure(f, state_.dt, mg_, ctx_, state_.p_hat, split);
        }
        {
            PhaseScope ph(prof, Phase::Update);
            project(f, state_.p_hat, state_.dt, cfg_.enable_lsm ? cfg_.fluids.mu_w / cfg_.fluids.rho_w : cfg_.nu,
                    ctx_.grid(), split);
            fill_velocity(f, ctx_, bc_, t1, false);
            fill_scalar(f.p, static_cast<int>(FieldTag::P), ctx_, ScalarBoundary::Mirror);
        }
        state_.t = t1;
        ++state_.step;
    }

private:
    RankContext ctx_;
    SimConfig cfg_;
    BoundarySetup bc_;
    SimState state_;
    Multigrid mg_;
};

} // namespace hydro
