#pragma once

/**
 * @file pressure.hpp
 * @brief Divergence, geometric multigrid for the cell-centred Poisson
 *        equation, and the projection step.
 *
 * Boundaries are periodic or homogeneous Neumann (mirror ghosts), so the
 * operator is singular; right-hand sides are made mean-free and solutions
 * are returned mean-free. Global sums use ExactAccumulator, and red-black
 * colouring uses global index parity, so results do not depend on the
 * worker topology.
 */

#include "hydro/boundary.hpp"
#include "hydro/exchange.hpp"
#include "hydro/mesh.hpp"

#include <cmath>
#include <memory>
#include <vector>

namespace hydro {

/// Staggered divergence at owned cells: (u_i - u_{i-1})/dx + ...
inline void divergence(const StaggeredField& f, const GlobalGrid& g, Array3& out)
{
    const std::array<std::ptrdiff_t, 3> st{f.u.stride(0), f.u.stride(1), f.u.stride(2)};
    out.for_each_interior([&](int i, int j, int k) {
        const std::size_t idx = f.u.index(i, j, k);
        double s = 0.0;
        for (int d = 0; d < 3; ++d) {
            const double* p = f.velocity(d).data() + idx;
            s += (p[0] - p[-st[d]]) / g.spacing[d];
        }
        out(i, j, k) = s;
    });
}

inline double max_abs_interior(const Array3& a)
{
    double m = 0.0;
    a.for_each_interior([&](int i, int j, int k) { m = std::max(m, std::abs(a(i, j, k))); });
    return m;
}

/// Global max |div u| over owned cells.
inline double max_divergence(const StaggeredField& f, const RankContext& ctx)
{
    Array3 div(f.u.interior(), 0);
    divergence(f, ctx.grid(), div);
    return ctx.comm->allreduce_max(max_abs_interior(div));
}

/// Exact global mean of the owned cells.
inline double global_mean(const Array3& a, const RankContext& ctx)
{
    ExactAccumulator acc;
    a.for_each_interior([&](int i, int j, int k) { acc.add(a(i, j, k)); });
    return ctx.comm->exact_sum(acc) / static_cast<double>(ctx.grid().cell_count());
}

inline void subtract_mean(Array3& a, const RankContext& ctx)
{
    const double m = global_mean(a, ctx);
    a.for_each_interior([&](int i, int j, int k) { a(i, j, k) -= m; });
}

/// 7-point Laplacian at one cell; needs one ghost layer.
inline double laplacian_at(const Array3& a, int i, int j, int k, const Vec3& h)
{
    const std::size_t idx = a.index(i, j, k);
    const double* p = a.data() + idx;
    double s = 0.0;
    for (int d = 0; d < 3; ++d) {
        const std::ptrdiff_t st = a.stride(d);
        s += ((p[st] + p[-st]) - 2.0 * p[0]) / (h[d] * h[d]);
    }
    return s;
}

/// Average of the 2^m children of each coarse cell (m = coarsened axes).
inline void restrict_average(const Array3& fine, Array3& coarse, const std::array<bool, 3>& coarsen)
{
    Index3 r{};
    int kids = 1;
    for (int d = 0; d < 3; ++d) {
        r[d] = coarsen[d] ? 2 : 1;
        kids *= r[d];
        if (coarsen[d] && fine.n(d) % 2 != 0) {
            throw Error(ErrorCode::DimensionNotEven, "cannot restrict an odd dimension");
        }
        if (coarse.n(d) * r[d] != fine.n(d)) {
            throw Error(ErrorCode::InvalidArgument, "coarse shape does not match fine shape");
        }
    }
    coarse.for_each_interior([&](int I, int J, int K) {
        double s = 0.0;
        for (int c = 0; c < r[2]; ++c)
            for (int b = 0; b < r[1]; ++b)
                for (int a = 0; a < r[0]; ++a)
                    s += fine(r[0] * I + a, r[1] * J + b, r[2] * K + c);
        coarse(I, J, K) = s / kids;
    });
}

/// Trilinear interpolation of the coarse field added to (or stored in) the
/// fine field. Coarse ghosts must be current.
inline void prolong_trilinear(const Array3& coarse, Array3& fine, const std::array<bool, 3>& coarsen, bool add)
{
    for (int d = 0; d < 3; ++d) {
        if (coarsen[d] && fine.n(d) % 2 != 0) {
            throw Error(ErrorCode::DimensionNotEven, "cannot prolong to an odd dimension");
        }
    }
    fine.for_each_interior([&](int i, int j, int k) {
        const Index3 f{i, j, k};
        std::array<std::array<int, 2>, 3> idx{};
        std::array<std::array<double, 2>, 3> w{};
        for (int d = 0; d < 3; ++d) {
            if (coarsen[d]) {
                const int parent = f[d] >> 1;
                idx[d] = {parent, (f[d] & 1) ? parent + 1 : parent - 1};
                w[d] = {0.75, 0.25};
            } else {
                idx[d] = {f[d], f[d]};
                w[d] = {1.0, 0.0};
            }
        }
        double v = 0.0;
        for (int c = 0; c < 2; ++c)
            for (int b = 0; b < 2; ++b)
                for (int a = 0; a < 2; ++a) {
                    const double wt = w[0][a] * w[1][b] * w[2][c];
                    if (wt != 0.0) {
                        v += wt * coarse(idx[0][a], idx[1][b], idx[2][c]);
                    }
                }
        fine(i, j, k) = add ? fine(i, j, k) + v : v;
    });
}

struct MultigridOptions
{
    int pre_sweeps = 2;
    int post_sweeps = 2;
    int coarse_sweeps = 50;
    int max_cycles = 100;
    double tolerance = 1e-6;
    int max_levels = 64;
    int gamma = 2; // coarse visits per level: 1 = V-cycle, 2 = W-cycle
};

struct MultigridLevel
{
    Index3 global{};
    Vec3 h{};
    SubdomainSpec sub;   // local dims and offset at this level, ghost width 1
    std::array<bool, 3> coarsened{}; // relative to the next finer level
    Array3 x, b, r;
};

struct SolveStats
{
    int cycles = 0;
    double residual = 0.0;
};

/**
 * Cell-centred multigrid for L x = b (W-cycle by default; the V-cycle
 * rate degrades with depth on elongated domains). A direction is halved
 * while its global and local sizes are even and the global half keeps at
 * least 2 cells; among those, only the directions with the finest spacing
 * (within 1.5x) are halved, which keeps coarse cells near-isotropic. The
 * coarsest level is solved by CG.
 */
class Multigrid
{
public:
    Multigrid(const RankContext& ctx, const MultigridOptions& opt = {}) : ctx_(ctx), opt_(opt)
    {
        const GlobalGrid& g = ctx.grid();
        for (int d = 0; d < 3; ++d) {
            if (g.dims[d] % 2 != 0) {
                throw Error(ErrorCode::DimensionNotEven, "multigrid needs even global dimensions");
            }
        }
        MultigridLevel l0;
        l0.global = g.dims;
        l0.h = g.spacing;
        l0.sub = *ctx.sub;
        l0.sub.ghost_width = 1;
        levels_.push_back(std::move(l0));
        for (;;) {
            const MultigridLevel& f = levels_.back();
            std::array<bool, 3> can{};
            double hmin = 0.0;
            bool any = false;
            for (int d = 0; d < 3; ++d) {
                can[d] = f.global[d] % 2 == 0 && f.global[d] / 2 >= 2 && f.sub.local_dims[d] % 2 == 0;
                if (can[d] && (!any || f.h[d] < hmin)) {
                    hmin = f.h[d];
                    any = true;
                }
            }
            if (!any || static_cast<int>(levels_.size()) >= opt_.max_levels) {
                break;
            }
            MultigridLevel c;
            c.sub = f.sub;
            for (int d = 0; d < 3; ++d) {
                c.coarsened[d] = can[d] && f.h[d] <= 1.5 * hmin;
                const int r = c.coarsened[d] ? 2 : 1;
                c.global[d] = f.global[d] / r;
                c.h[d] = f.h[d] * r;
                c.sub.local_dims[d] = f.sub.local_dims[d] / r;
                c.sub.offset[d] = f.sub.offset[d] / r;
            }
            levels_.push_back(std::move(c));
        }
        for (auto& l : levels_) {
            l.x = Array3(l.sub.local_dims, 1);
            l.b = Array3(l.sub.local_dims, 1);
            l.r = Array3(l.sub.local_dims, 1);
        }
    }

    int level_count() const { return static_cast<int>(levels_.size()); }
    const MultigridLevel& level(int l) const { return levels_.at(static_cast<std::size_t>(l)); }
    MultigridLevel& level(int l) { return levels_.at(static_cast<std::size_t>(l)); }

    /// Ghost refresh of a level array: exchange plus Neumann mirror.
    void fill(int l, Array3& a)
    {
        MultigridLevel& lv = level(l);
        exchange_halos(a, channel::kMultigridBase + l, lv.sub, *ctx_.comm, [&](int axis) {
            for (bool high : {false, true}) {
                const Face f = face_of(axis, high);
                if (lv.sub.physical(f)) {
                    apply_scalar_face(a, f, ScalarBoundary::Mirror);
                }
            }
        });
    }

    /// Red-black Gauss-Seidel sweeps on level l.
    void smooth(int l, int sweeps)
    {
        MultigridLevel& lv = level(l);
        Array3& x = lv.x;
        const Array3& b = lv.b;
        const Vec3 ih2{1.0 / (lv.h[0] * lv.h[0]), 1.0 / (lv.h[1] * lv.h[1]), 1.0 / (lv.h[2] * lv.h[2])};
        const double diag = 2.0 * (ih2[0] + ih2[1] + ih2[2]);
        const std::array<std::ptrdiff_t, 3> st{x.stride(0), x.stride(1), x.stride(2)};
        const Index3 n = x.interior();
        const Index3 off = lv.sub.offset;
        for (int s = 0; s < sweeps; ++s) {
            for (int colour = 0; colour < 2; ++colour) {
                for (int k = 0; k < n[2]; ++k) {
                    for (int j = 0; j < n[1]; ++j) {
                        const int start = ((colour - (off[0] + j + off[1] + k + off[2])) % 2 + 2) % 2;
                        for (int i = start; i < n[0]; i += 2) {
                            const std::size_t idx = x.index(i, j, k);
                            double* p = x.data() + idx;
                            const double nb = (p[st[0]] + p[-st[0]]) * ih2[0] + (p[st[1]] + p[-st[1]]) * ih2[1] +
                                              (p[st[2]] + p[-st[2]]) * ih2[2];
                            p[0] = (nb - b.data()[idx]) / diag;
                        }
                    }
                }
                fill(l, x);
            }
        }
    }

    /// r = b - L x on level l (x ghosts current); returns the local max |r|.
    double residual(int l)
    {
        MultigridLevel& lv = level(l);
        double m = 0.0;
        lv.r.for_each_interior([&](int i, int j, int k) {
            const double v = lv.b(i, j, k) - laplacian_at(lv.x, i, j, k, lv.h);
            lv.r(i, j, k) = v;
            m = std::max(m, std::abs(v));
        });
        return m;
    }

    /**
     * Conjugate gradients on the coarsest level (L is symmetric negative
     * semi-definite with the mirror ghosts). Dot products are exact sums so
     * the iterates do not depend on the decomposition. x starts at zero.
     */
    void coarse_solve(int l)
    {
        MultigridLevel& lv = level(l);
        const double cells = static_cast<double>(lv.global[0]) * lv.global[1] * lv.global[2];
        auto dot = [&](const Array3& a, const Array3& b) {
            ExactAccumulator acc;
            a.for_each_interior([&](int i, int j, int k) { acc.add(a(i, j, k) * b(i, j, k)); });
            return ctx_.comm->exact_sum(acc);
        };
        auto remove_mean = [&](Array3& a) {
            ExactAccumulator acc;
            a.for_each_interior([&](int i, int j, int k) { acc.add(a(i, j, k)); });
            const double m = ctx_.comm->exact_sum(acc) / cells;
            a.for_each_interior([&](int i, int j, int k) { a(i, j, k) -= m; });
        };
        Array3& x = lv.x;
        Array3& r = lv.r;
        Array3 p(lv.sub.local_dims, 1);
        Array3 q(lv.sub.local_dims, 1);
        x.fill(0.0);
        r.for_each_interior([&](int i, int j, int k) { r(i, j, k) = lv.b(i, j, k); });
        remove_mean(r);
        r.for_each_interior([&](int i, int j, int k) { p(i, j, k) = r(i, j, k); });
        double rr = dot(r, r);
        const double stop = rr * 1e-24;
        const int cap = std::max(opt_.coarse_sweeps, static_cast<int>(2.0 * cells));
        for (int it = 0; it < cap && rr > stop && rr > 0.0; ++it) {
            fill(l, p);
            q.for_each_interior([&](int i, int j, int k) { q(i, j, k) = laplacian_at(p, i, j, k, lv.h); });
            const double pq = dot(p, q);
            if (pq == 0.0) break;
            const double alpha = rr / pq;
            x.for_each_interior([&](int i, int j, int k) {
                x(i, j, k) += alpha * p(i, j, k);
                r(i, j, k) -= alpha * q(i, j, k);
            });
            remove_mean(r);
            const double rr_new = dot(r, r);
            const double beta = rr_new / rr;
            rr = rr_new;
            p.for_each_interior([&](int i, int j, int k) { p(i, j, k) = r(i, j, k) + beta * p(i, j, k); });
        }
        fill(l, x);
    }

    void vcycle(int l)
    {
        if (l == level_count() - 1) {
            coarse_solve(l);
            return;
        }
        smooth(l, opt_.pre_sweeps);
        residual(l);
        MultigridLevel& c = level(l + 1);
        restrict_average(level(l).r, c.b, c.coarsened);
        c.x.fill(0.0);
        const int visits = l + 1 == level_count() - 1 ? 1 : opt_.gamma;
        for (int v = 0; v < visits; ++v) vcycle(l + 1);
        prolong_trilinear(c.x, level(l).x, c.coarsened, true);
        fill(l, level(l).x);
        smooth(l, opt_.post_sweeps);
    }

    /**
     * Solves L x = b. `x` and `b` are finest-level arrays with at least one
     * ghost layer; b is made mean-free in place. Cycles stop once
     * max |scale (b - L x)| <= tolerance. x keeps its initial guess.
     */
    SolveStats solve(Array3& x, Array3& b, double scale)
    {
        subtract_mean(b, ctx_);
        MultigridLevel& f = level(0);
        f.b.for_each_interior([&](int i, int j, int k) {
            f.b(i, j, k) = b(i, j, k);
            f.x(i, j, k) = x(i, j, k);
        });
        fill(0, f.x);
        SolveStats st;
        st.residual = ctx_.comm->allreduce_max(residual(0)) * scale;
        while (st.residual > opt_.tolerance) {
            if (st.cycles >= opt_.max_cycles) {
                throw Error(ErrorCode::NoConvergence, "pressure solve did not converge in " +
                                                          std::to_string(opt_.max_cycles) + " cycles (residual " +
                                                          std::to_string(st.residual) + ")");
            }
            vcycle(0);
            subtract_mean(f.x, ctx_);
            fill(0, f.x);
            ++st.cycles;
            st.residual = ctx_.comm->allreduce_max(residual(0)) * scale;
        }
        f.x.for_each_interior([&](int i, int j, int k) { x(i, j, k) = f.x(i, j, k); });
        return st;
    }

    const MultigridOptions& options() const { return opt_; }

private:
    RankContext ctx_;
    MultigridOptions opt_;
    std::vector<MultigridLevel> levels_;
};

/**
 * Optional density split for two-phase flow. With reference density rho0
 * the correction is (1/rho0) grad p_hat + (1/rho_f - 1/rho0) grad p_est,
 * so the Poisson operator keeps constant coefficients. Without it rho = 1.
 */
struct DensitySplit
{
    const Array3* rho = nullptr;   // cell densities, ghosts current
    const Array3* p_est = nullptr; // previous increment, ghosts current
    double rho0 = 1.0;
};

inline double face_inverse_density(const Array3& rho, std::size_t idx, std::ptrdiff_t st)
{
    return 2.0 / (rho.data()[idx] + rho.data()[idx + st]);
}

/**
 * Builds the right-hand side, solves for the pressure increment p_hat
 * (written to owned cells and ghosts of `p_hat`) and returns the cycle count.
 * The stopping test bounds the divergence the projection will leave.
 */
inline SolveStats solve_pressure(const StaggeredField& ustar, double dt, Multigrid& mg, const RankContext& ctx,
                                 Array3& p_hat, const DensitySplit& split = {})
{
    const GlobalGrid& g = ctx.grid();
    Array3 b(ustar.u.interior(), 1);
    divergence(ustar, g, b);
    const double inv0 = 1.0 / split.rho0;
    b.for_each_interior([&](int i, int j, int k) { b(i, j, k) /= dt; });
    if (split.rho != nullptr) {
        const Array3& rho = *split.rho;
        const Array3& pe = *split.p_est;
        b.for_each_interior([&](int i, int j, int k) {
            const std::size_t idx = rho.index(i, j, k);
            double s = 0.0;
            for (int d = 0; d < 3; ++d) {
                const std::ptrdiff_t st = rho.stride(d);
                const double* p = pe.data() + idx;
                const double hi = (face_inverse_density(rho, idx, st) - inv0) * (p[st] - p[0]);
                const double lo = (face_inverse_density(rho, idx - st, st) - inv0) * (p[0] - p[-st]);
                s += (hi - lo) / (g.spacing[d] * g.spacing[d]);
            }
            b(i, j, k) -= s;
        });
    }
    b.for_each_interior([&](int i, int j, int k) { b(i, j, k) *= split.rho0; });
    Array3 x(b.interior(), 1, 0.0);
    const SolveStats st = mg.solve(x, b, dt * inv0);
    p_hat.fill(0.0);
    x.for_each_interior([&](int i, int j, int k) { p_hat(i, j, k) = x(i, j, k); });
    fill_scalar(p_hat, static_cast<int>(FieldTag::P), ctx, ScalarBoundary::Mirror);
    return st;
}

/**
 * u = u* - dt (1/rho0) grad p_hat (plus the split term), applied to owned
 * faces whose both cells are known; p += p_hat - nu dt Lap(p_hat) / 2.
 * Boundary faces are unaffected because mirror ghosts give zero gradient.
 */
inline void project(StaggeredField& f, const Array3& p_hat, double dt, double nu, const GlobalGrid& g,
                    const DensitySplit& split = {})
{
    const double inv0 = 1.0 / split.rho0;
    for (int c = 0; c < 3; ++c) {
        Array3& u = f.velocity(c);
        const std::ptrdiff_t st = u.stride(c);
        const double h = g.spacing[c];
        u.for_each_interior([&](int i, int j, int k) {
            const std::size_t idx = u.index(i, j, k);
            const double* p = p_hat.data() + idx;
            double corr = inv0 * (p[st] - p[0]) / h;
            if (split.rho != nullptr) {
                const double* pe = split.p_est->data() + idx;
                corr += (face_inverse_density(*split.rho, idx, st) - inv0) * (pe[st] - pe[0]) / h;
            }
            u.data()[idx] -= dt * corr;
        });
    }
    f.p.for_each_interior([&](int i, int j, int k) {
        f.p(i, j, k) += p_hat(i, j, k) - 0.5 * nu * dt * laplacian_at(p_hat, i, j, k, g.spacing);
    });
}

} // namespace hydro
