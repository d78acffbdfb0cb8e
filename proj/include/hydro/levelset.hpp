#pragma once

/**
 * @file levelset.hpp
 * @brief Level-set interface capturing: smoothed Heaviside, material
 *        properties, TVD-RK3 advection and pseudo-time reinitialisation.
 */

#include "hydro/exchange.hpp"
#include "hydro/mesh.hpp"
#include "hydro/schemes.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <vector>

namespace hydro {

struct FluidPair
{
    double rho_w = 1000.0;
    double mu_w = 1.0e-3;
    double rho_a = 1.25;
    double mu_a = 1.8e-5;
    double eps = 0.015; // interface half thickness, 1.5 dx

    static FluidPair water_air(double dx)
    {
        FluidPair p;
        p.eps = 1.5 * dx;
        return p;
    }

    void validate() const
    {
        if (!(rho_w > 0 && rho_a > 0 && mu_w > 0 && mu_a > 0 && eps > 0)) {
            throw Error(ErrorCode::InvalidArgument, "fluid properties must be positive");
        }
        if (!(rho_w > rho_a)) {
            throw Error(ErrorCode::InvalidArgument, "water must be denser than air");
        }
    }
};

inline double heaviside(double phi, double eps)
{
    if (phi <= -eps) return 0.0;
    if (phi >= eps) return 1.0;
    return 0.5 * (1.0 + phi / eps + std::sin(std::numbers::pi * phi / eps) / std::numbers::pi);
}

/// rho and mu from phi at every stored sample, ghosts included.
inline void material_fields(const Array3& phi, const FluidPair& fp, Array3& rho, Array3& mu)
{
    auto ph = phi.values();
    auto r = rho.values();
    auto m = mu.values();
    for (std::size_t n = 0; n < ph.size(); ++n) {
        const double h = heaviside(ph[n], fp.eps);
        r[n] = fp.rho_a + (fp.rho_w - fp.rho_a) * h;
        m[n] = fp.mu_a + (fp.mu_w - fp.mu_a) * h;
    }
}

/// Refreshes every ghost layer of a cell-centred array.
using GhostFill = std::function<void(Array3&)>;

/// -u . grad(phi) at owned cells, velocities averaged to the centre and
/// WENO5 derivatives upwinded by their sign.
inline void level_set_rate(const Array3& phi, const StaggeredField& f, const GlobalGrid& g, const WenoParams& w,
                           Array3& out)
{
    detail::require_reach(phi, Scheme::WENO5);
    const std::array<std::ptrdiff_t, 3> st{phi.stride(0), phi.stride(1), phi.stride(2)};
    phi.for_each_interior([&](int i, int j, int k) {
        const std::size_t idx = phi.index(i, j, k);
        const double* p = phi.data() + idx;
        double sum = 0.0;
        for (int d = 0; d < 3; ++d) {
            const double* v = f.velocity(d).data() + idx;
            const double vel = 0.5 * (v[0] + v[-st[d]]);
            if (vel != 0.0) {
                sum += vel * weno5_derivative(p, st[d], vel, g.spacing[d], w.c);
            }
        }
        out(i, j, k) = -sum;
    });
}

namespace detail {

/// One TVD-RK3 step in increment form: phi1 = phi + dt L, phi2 = phi + (phi1-phi)/4 + dt L/4,
/// phi3 = phi + 2(phi2-phi)/3 + 2 dt L/3. Zero rates leave phi bit-identical.
template <class Rate>
void tvd_rk3(Array3& phi, double dt, const GhostFill& fill, Rate&& rate)
{
    Array3 base = phi;
    Array3 r(phi.interior(), phi.ghost());
    rate(phi, r);
    phi.for_each_interior([&](int i, int j, int k) { phi(i, j, k) = base(i, j, k) + dt * r(i, j, k); });
    fill(phi);
    rate(phi, r);
    phi.for_each_interior([&](int i, int j, int k) {
        const double b = base(i, j, k);
        phi(i, j, k) = b + 0.25 * (phi(i, j, k) - b) + 0.25 * dt * r(i, j, k);
    });
    fill(phi);
    rate(phi, r);
    phi.for_each_interior([&](int i, int j, int k) {
        const double b = base(i, j, k);
        phi(i, j, k) = b + (2.0 / 3.0) * (phi(i, j, k) - b) + (2.0 / 3.0) * dt * r(i, j, k);
    });
    fill(phi);
}

} // namespace detail

/// Advances phi by dt with u . grad(phi) = 0. Ghosts of phi and of the
/// velocities must be current; `fill` refreshes phi ghosts after each stage.
inline void lsm_advect(Array3& phi, const StaggeredField& f, const GlobalGrid& g, double dt, const GhostFill& fill,
                       const WenoParams& w = WenoParams::standard())
{
    detail::tvd_rk3(phi, dt, fill, [&](const Array3& a, Array3& r) { level_set_rate(a, f, g, w, r); });
}

inline double signed_function(double d0, double grad, double eps_r)
{
    return d0 / std::sqrt(d0 * d0 + (grad * eps_r) * (grad * eps_r));
}

/// Godunov |grad d| from one-sided WENO5 derivatives, upwinded by `sign`.
inline double godunov_gradient(const Array3& d, std::size_t idx, const GlobalGrid& g, double sign,
                               const std::array<double, 3>& cw)
{
    const double* p = d.data() + idx;
    double sum = 0.0;
    for (int ax = 0; ax < 3; ++ax) {
        const std::ptrdiff_t s = d.stride(ax);
        const double a = weno5_derivative(p, s, 1.0, g.spacing[ax], cw);  // backward
        const double b = weno5_derivative(p, s, -1.0, g.spacing[ax], cw); // forward
        if (sign >= 0.0) {
            const double am = std::max(a, 0.0), bm = std::min(b, 0.0);
            sum += std::max(am * am, bm * bm);
        } else {
            const double am = std::min(a, 0.0), bm = std::max(b, 0.0);
            sum += std::max(am * am, bm * bm);
        }
    }
    return std::sqrt(sum);
}

struct ReinitConfig
{
    double cfl = 0.10;
    int max_iterations = 15;
    double tolerance = 5e-3;
    double eps_r = 0.0;      // <= 0 selects the largest grid spacing
    double band_cells = 3.0; // residual measured where |phi| <= band_cells * dx
    bool reject_increase = true; // discard an iteration that raises the residual and stop
    WenoParams weno = WenoParams::standard();
};

struct ReinitResult
{
    int iterations = 0;
    double residual = 0.0;
    bool converged = false;
    std::vector<double> history; // residual before the first and after each accepted iteration
};

/// Global max | |grad phi| - 1 | over cells near the interface (all cells
/// when no cell lies in the band).
inline double reinit_residual(const Array3& phi, const GlobalGrid& g, const ReinitConfig& cfg, Communicator& comm)
{
    const double band = cfg.band_cells * g.max_spacing();
    double in_band = 0.0;
    double all = 0.0;
    double count = 0.0;
    phi.for_each_interior([&](int i, int j, int k) {
        const std::size_t idx = phi.index(i, j, k);
        const double v = phi.data()[idx];
        const double r = std::abs(godunov_gradient(phi, idx, g, v, cfg.weno.c) - 1.0);
        all = std::max(all, r);
        if (std::abs(v) <= band) {
            in_band = std::max(in_band, r);
            count += 1.0;
        }
    });
    std::array<double, 2> mx{in_band, all};
    comm.allreduce(std::span<double>(mx), ReductionKind::Max);
    count = comm.allreduce_sum(count);
    return count > 0.0 ? mx[0] : mx[1];
}

/**
 * Pseudo-time iteration of d_tau = s(d)(1 - |grad d|) with TVD-RK3 and
 * tau = cfl * max dx. Stops once the residual is within tolerance or at the
 * iteration cap; an iteration that would raise the residual is discarded
 * and ends the loop. Every rank takes the same decisions.
 */
inline ReinitResult reinitialize(Array3& phi, const GlobalGrid& g, const ReinitConfig& cfg, const GhostFill& fill,
                                 Communicator& comm)
{
    if (!(cfg.cfl > 0.0 && cfg.cfl <= 1.0) || cfg.tolerance <= 0.0 || cfg.max_iterations < 1) {
        throw Error(ErrorCode::InvalidArgument, "invalid reinitialisation settings");
    }
    const double dx = g.max_spacing();
    const double eps_r = cfg.eps_r > 0.0 ? cfg.eps_r : dx;
    const double tau = cfg.cfl * dx;
    ReinitResult res;
    res.residual = reinit_residual(phi, g, cfg, comm);
    res.history.push_back(res.residual);
    if (res.residual <= cfg.tolerance) {
        res.converged = true;
        return res;
    }
    auto rate = [&](const Array3& d, Array3& r) {
        d.for_each_interior([&](int i, int j, int k) {
            const std::size_t idx = d.index(i, j, k);
            const double v = d.data()[idx];
            const double grad = godunov_gradient(d, idx, g, v, cfg.weno.c);
            r(i, j, k) = signed_function(v, grad, eps_r) * (1.0 - grad);
        });
    };
    for (int m = 1; m <= cfg.max_iterations; ++m) {
        Array3 trial = phi;
        detail::tvd_rk3(trial, tau, fill, rate);
        const double r = reinit_residual(trial, g, cfg, comm);
        if (cfg.reject_increase && !(r <= res.residual)) {
            break;
        }
        phi = std::move(trial);
        res.iterations = m;
        res.residual = r;
        res.history.push_back(r);
        if (r <= cfg.tolerance) {
            res.converged = true;
            break;
        }
    }
    return res;
}

} // namespace hydro
