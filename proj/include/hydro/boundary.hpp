#pragma once

/**
 * @file boundary.hpp
 * @brief Ghost filling: halo exchange followed, axis by axis, by the
 *        physical boundary rule of each non-periodic face.
 */

#include "hydro/exchange.hpp"
#include "hydro/mesh.hpp"

#include <functional>

namespace hydro {

enum class ScalarBoundary { Mirror, Extrapolate };

/// Prescribed inflow data. Values are evaluated at physical positions.
struct BoundarySetup
{
    Vec3 lid_velocity{1.0, 0.0, 0.0};
    std::function<double(int component, const Vec3& x, double t)> inflow_velocity;
    std::function<double(const Vec3& x, double t)> inflow_phi;
};

namespace detail {

/// Calls fn(a, b, m) for every ghost layer m = 1..g of `face`, where a is the
/// flat index of the ghost and b the flat index m cells back across the face
/// plane, over the full transverse extent.
template <class Fn>
void for_each_face_ghost(Array3& arr, Face face, Fn&& fn)
{
    const int d = axis_of(face);
    const int g = arr.ghost();
    const int t1 = (d + 1) % 3, t2 = (d + 2) % 3;
    Index3 idx{};
    for (int b = -g; b < arr.n(t2) + g; ++b) {
        for (int a = -g; a < arr.n(t1) + g; ++a) {
            idx[t1] = a;
            idx[t2] = b;
            fn(idx);
        }
    }
}

inline Index3 shifted(Index3 c, int d, int v)
{
    c[d] = v;
    return c;
}

} // namespace detail

/// Neumann mirror or linear extrapolation on one physical face.
inline void apply_scalar_face(Array3& a, Face face, ScalarBoundary rule)
{
    const int d = axis_of(face);
    const int n = a.n(d);
    const int g = a.ghost();
    const bool high = is_high(face);
    detail::for_each_face_ghost(a, face, [&](const Index3& t) {
        const double v0 = a.at(detail::shifted(t, d, high ? n - 1 : 0));
        const double v1 = a.at(detail::shifted(t, d, high ? n - 2 : 1));
        for (int m = 1; m <= g; ++m) {
            const int gi = high ? n - 1 + m : -m;
            double v = 0.0;
            if (rule == ScalarBoundary::Mirror) {
                v = a.at(detail::shifted(t, d, high ? n - m : m - 1));
            } else {
                v = v0 + m * (v0 - v1);
            }
            a.at(detail::shifted(t, d, gi)) = v;
        }
    });
}

/// Exchange plus scalar rule on physical faces. `special` may take over a
/// face (returns true when it handled it).
inline void fill_scalar(Array3& a, int chan, const RankContext& ctx, ScalarBoundary rule,
                        const std::function<bool(Array3&, Face)>& special = {})
{
    const SubdomainSpec& sub = *ctx.sub;
    exchange_halos(a, chan, sub, *ctx.comm, [&](int axis) {
        for (bool high : {false, true}) {
            const Face f = face_of(axis, high);
            if (!sub.physical(f)) {
                continue;
            }
            if (special && special(a, f)) {
                continue;
            }
            apply_scalar_face(a, f, rule);
        }
    });
}

/**
 * Physical boundary rule for velocity component c on one face.
 * The normal component's boundary face is ghost index -1 on a low face and
 * owned index n-1 on a high face; it is written only when `set_faces`.
 */
inline void apply_velocity_face(Array3& a, int c, Face face, BoundaryKind kind, const BoundarySetup& bc,
                                const GlobalGrid& grid, const SubdomainSpec& sub, double t, bool set_faces)
{
    const int d = axis_of(face);
    const int n = a.n(d);
    const int g = a.ghost();
    const bool high = is_high(face);
    const Location loc = face_location(c);
    const double wall_x = high ? grid.origin[d] + grid.extent(d) : grid.origin[d];

    auto prescribed = [&](const Index3& idx) {
        if (kind == BoundaryKind::MovingLid) {
            return bc.lid_velocity[c];
        }
        if (kind == BoundaryKind::Inflow) {
            if (!bc.inflow_velocity) {
                throw Error(ErrorCode::InvalidArgument, "inflow face without an inflow profile");
            }
            Vec3 x = sample_position(grid, sub, loc, idx[0], idx[1], idx[2]);
            x[d] = wall_x;
            return bc.inflow_velocity(c, x, t);
        }
        return 0.0;
    };

    detail::for_each_face_ghost(a, face, [&](const Index3& tr) {
        auto at = [&](int v) -> double& { return a.at(detail::shifted(tr, d, v)); };
        if (c == d) {
            const int wall = high ? n - 1 : -1;
            const int dir = high ? 1 : -1;
            switch (kind) {
            case BoundaryKind::NoSlipWall:
            case BoundaryKind::SlipWall:
            case BoundaryKind::MovingLid:
                if (set_faces || !high) at(wall) = 0.0;
                for (int m = 1; m < g + (high ? 1 : 0); ++m) {
                    if (wall + dir * m < -g || wall + dir * m >= n + g) break;
                    at(wall + dir * m) = -at(wall - dir * m);
                }
                break;
            case BoundaryKind::Inflow: {
                const double v = prescribed(detail::shifted(tr, d, wall));
                if (set_faces || !high) at(wall) = v;
                for (int m = 1; wall + dir * m >= -g && wall + dir * m < n + g; ++m) at(wall + dir * m) = v;
                break;
            }
            case BoundaryKind::Outflow:
                if (set_faces || !high) at(wall) = at(wall - dir);
                for (int m = 1; wall + dir * m >= -g && wall + dir * m < n + g; ++m) at(wall + dir * m) = at(wall);
                break;
            case BoundaryKind::Periodic:
                throw Error(ErrorCode::UnknownBoundaryKind, "periodic face reached the physical boundary rule");
            }
            return;
        }
        for (int m = 1; m <= g; ++m) {
            const int gi = high ? n - 1 + m : -m;
            const int ii = high ? n - m : m - 1;
            switch (kind) {
            case BoundaryKind::NoSlipWall: at(gi) = -at(ii); break;
            case BoundaryKind::SlipWall: at(gi) = at(ii); break;
            case BoundaryKind::MovingLid:
            case BoundaryKind::Inflow: at(gi) = 2.0 * prescribed(detail::shifted(tr, d, gi)) - at(ii); break;
            case BoundaryKind::Outflow: at(gi) = at(high ? n - 1 : 0); break;
            case BoundaryKind::Periodic:
                throw Error(ErrorCode::UnknownBoundaryKind, "periodic face reached the physical boundary rule");
            }
        }
    });
}

/// Exchanges all three velocity components and applies the boundary kinds
/// of the plan at time t.
inline void fill_velocity(StaggeredField& f, const RankContext& ctx, const BoundarySetup& bc, double t,
                          bool set_faces = true)
{
    const SubdomainSpec& sub = *ctx.sub;
    for (int c = 0; c < 3; ++c) {
        Array3& a = f.velocity(c);
        exchange_halos(a, c, sub, *ctx.comm, [&](int axis) {
            for (bool high : {false, true}) {
                const Face face = face_of(axis, high);
                if (sub.physical(face)) {
                    apply_velocity_face(a, c, face, ctx.plan->boundary(face), bc, ctx.grid(), sub, t, set_faces);
                }
            }
        });
    }
}

} // namespace hydro
