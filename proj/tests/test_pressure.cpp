#include "hydro/pressure.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <numbers>
#include <random>

using namespace hydro;
using hydro::test::on_ranks;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

BoundaryMap walls()
{
    BoundaryMap bm;
    bm.fill(BoundaryKind::NoSlipWall);
    return bm;
}

/// Smooth mean-free right-hand side.
double rhs(const Vec3& x)
{
    return std::sin(kTwoPi * x[0]) * std::cos(kTwoPi * x[1]) + 0.5 * std::cos(2 * kTwoPi * x[2]);
}

/// Cycles needed to cut the residual by 1e-8 from a zero guess.
int cycles_for_reduction(const GlobalGrid& g, const BoundaryMap& bm, Index3 topo, int gamma)
{
    const auto plan = build_decomposition(g, topo, 1, bm);
    int cycles = 0;
    on_ranks(plan, [&](RankContext& ctx) {
        Array3 b(ctx.sub->local_dims, 1), x(ctx.sub->local_dims, 1);
        hydro::test::sample(b, g, *ctx.sub, Location::Cell, rhs);
        subtract_mean(b, ctx);
        const double r0 = ctx.comm->allreduce_max(max_abs_interior(b));
        MultigridOptions opt;
        opt.gamma = gamma;
        opt.tolerance = 1e-8 * r0;
        Multigrid mg(ctx, opt);
        const auto st = mg.solve(x, b, 1.0);
        if (ctx.comm->rank() == 0) cycles = st.cycles;
    });
    return cycles;
}

} // namespace

TEST(Divergence, LinearField)
{
    const GlobalGrid g = GlobalGrid::uniform({8, 8, 8}, {1, 2, 4});
    const auto plan = build_decomposition(g, {1, 1, 1}, 1, walls());
    const auto& s = plan.subdomain(0);
    StaggeredField f(s.local_dims, 1);
    hydro::test::sample_all(f.u, g, s, Location::XFace, [](const Vec3& x) { return 2 * x[0]; });
    hydro::test::sample_all(f.v, g, s, Location::YFace, [](const Vec3& x) { return -0.5 * x[1] + x[0]; });
    hydro::test::sample_all(f.w, g, s, Location::ZFace, [](const Vec3& x) { return 0.25 * x[2]; });
    Array3 out(s.local_dims, 0);
    divergence(f, g, out);
    out.for_each_interior([&](int i, int j, int k) { EXPECT_NEAR(out(i, j, k), 1.75, 1e-12); });
}

TEST(Transfer, RestrictAverages)
{
    Array3 fine({4, 4, 2}, 1), coarse({2, 2, 2}, 1);
    fine.for_each_interior([&](int i, int j, int k) { fine(i, j, k) = i + 4 * j + 16 * k; });
    restrict_average(fine, coarse, {true, true, false});
    EXPECT_DOUBLE_EQ(coarse(0, 0, 0), (0 + 1 + 4 + 5) / 4.0);
    EXPECT_DOUBLE_EQ(coarse(1, 1, 1), (10 + 11 + 14 + 15) / 4.0 + 16);
}

TEST(Transfer, OddDimensionIsRejected)
{
    Array3 fine({5, 4, 4}, 1), coarse({2, 2, 2}, 1);
    try {
        restrict_average(fine, coarse, {true, true, true});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::DimensionNotEven);
    }
    EXPECT_THROW(prolong_trilinear(coarse, fine, {true, false, false}, false), Error);
}

TEST(Transfer, ProlongationReproducesLinearData)
{
    // cell centres: coarse I at 2I+1 (fine units), fine i at i+1/2 in coarse halves
    Array3 coarse({4, 4, 4}, 1), fine({8, 8, 8}, 1);
    for (int k = -1; k < 5; ++k)
        for (int j = -1; j < 5; ++j)
            for (int i = -1; i < 5; ++i) coarse(i, j, k) = 3.0 * (2 * i + 1) - (2 * j + 1) + 0.5 * (2 * k + 1);
    prolong_trilinear(coarse, fine, {true, true, true}, false);
    fine.for_each_interior([&](int i, int j, int k) {
        EXPECT_NEAR(fine(i, j, k), 3.0 * (i + 0.5) - (j + 0.5) + 0.5 * (k + 0.5), 1e-12);
    });
}

TEST(Multigrid, OddGlobalDimension)
{
    const GlobalGrid g = GlobalGrid::uniform({10, 8, 9}, {1, 1, 1});
    const auto plan = build_decomposition(g, {1, 1, 1}, 1);
    on_ranks(plan, [&](RankContext& ctx) {
        try {
            Multigrid mg(ctx);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::DimensionNotEven);
        }
    });
}

TEST(Multigrid, HierarchyHalvesOnlyTheFinestDirections)
{
    const GlobalGrid g = GlobalGrid::uniform({64, 8, 32}, {3.84, 0.08, 0.32});
    const auto plan = build_decomposition(g, {1, 1, 1}, 1);
    on_ranks(plan, [&](RankContext& ctx) {
        Multigrid mg(ctx);
        EXPECT_EQ(mg.level(mg.level_count() - 1).global, (Index3{2, 2, 2}));
        for (int l = 1; l < mg.level_count(); ++l) {
            const auto& prev = mg.level(l - 1);
            const auto& lv = mg.level(l);
            double hmin = 1e300;
            for (int d = 0; d < 3; ++d) {
                if (prev.global[d] / 2 >= 2) hmin = std::min(hmin, prev.h[d]);
            }
            for (int d = 0; d < 3; ++d) {
                if (lv.coarsened[d]) {
                    EXPECT_LE(prev.h[d], 1.5 * hmin);
                }
                EXPECT_GE(lv.global[d], 2);
            }
        }
    });
}

TEST(Multigrid, HierarchyMatchesAcrossTopologies)
{
    const GlobalGrid g = GlobalGrid::uniform({32, 32, 32}, {1, 1, 1});
    std::vector<Index3> single, split;
    on_ranks(build_decomposition(g, {1, 1, 1}, 1), [&](RankContext& ctx) {
        Multigrid mg(ctx);
        for (int l = 0; l < mg.level_count(); ++l) single.push_back(mg.level(l).global);
    });
    const auto plan = build_decomposition(g, {2, 2, 2}, 1);
    on_ranks(plan, [&](RankContext& ctx) {
        Multigrid mg(ctx);
        if (ctx.comm->rank() == 0) {
            for (int l = 0; l < mg.level_count(); ++l) split.push_back(mg.level(l).global);
        }
    });
    EXPECT_EQ(single, split);
}

TEST(Multigrid, VCycleFactorOnPeriodicCube)
{
    const GlobalGrid g = GlobalGrid::uniform({32, 32, 32}, {1, 1, 1});
    const int v = cycles_for_reduction(g, all_periodic(), {1, 1, 1}, 1);
    // 1e-8 in v cycles: mean factor 10^(-8/v)
    EXPECT_LT(std::pow(1e-8, 1.0 / v), 0.5) << v << " cycles";
}

TEST(Multigrid, WCycleFactorOnElongatedWallBoundedBox)
{
    const GlobalGrid g = GlobalGrid::uniform({96, 8, 32}, {0.96, 0.08, 0.32});
    BoundaryMap bm = walls();
    bm[static_cast<std::size_t>(Face::YLow)] = BoundaryKind::Periodic;
    bm[static_cast<std::size_t>(Face::YHigh)] = BoundaryKind::Periodic;
    const int w = cycles_for_reduction(g, bm, {1, 1, 1}, 2);
    EXPECT_LT(std::pow(1e-8, 1.0 / w), 0.25) << w << " cycles";
}

TEST(Multigrid, RecoversDiscreteSolution)
{
    const GlobalGrid g = GlobalGrid::uniform({16, 16, 16}, {1, 1, 1});
    const auto plan = build_decomposition(g, {1, 1, 1}, 1, walls());
    on_ranks(plan, [&](RankContext& ctx) {
        // exact: cos(pi x) cos(pi y), mirror-compatible and mean-free
        Array3 exact(ctx.sub->local_dims, 1);
        hydro::test::sample(exact, g, *ctx.sub, Location::Cell, [](const Vec3& x) {
            return std::cos(std::numbers::pi * x[0]) * std::cos(std::numbers::pi * x[1]);
        });
        fill_scalar(exact, 0, ctx, ScalarBoundary::Mirror);
        Array3 b(ctx.sub->local_dims, 1), x(ctx.sub->local_dims, 1);
        b.for_each_interior([&](int i, int j, int k) { b(i, j, k) = laplacian_at(exact, i, j, k, g.spacing); });
        MultigridOptions opt;
        opt.tolerance = 1e-11;
        Multigrid mg(ctx, opt);
        mg.solve(x, b, 1.0);
        subtract_mean(exact, ctx);
        x.for_each_interior([&](int i, int j, int k) { EXPECT_NEAR(x(i, j, k), exact(i, j, k), 1e-9); });
    });
}

TEST(Multigrid, SolutionIsBitIdenticalAcrossTopologies)
{
    const GlobalGrid g = GlobalGrid::uniform({16, 16, 16}, {1, 1, 1});
    std::vector<Array3> out;
    for (Index3 topo : {Index3{1, 1, 1}, Index3{2, 2, 2}, Index3{1, 2, 1}}) {
        const auto plan = build_decomposition(g, topo, 1, walls());
        on_ranks(plan, [&](RankContext& ctx) {
            Array3 b(ctx.sub->local_dims, 1), x(ctx.sub->local_dims, 1);
            hydro::test::sample(b, g, *ctx.sub, Location::Cell, rhs);
            Multigrid mg(ctx);
            mg.solve(x, b, 1e-3);
            Array3 full = gather_interior(x, plan, *ctx.comm);
            if (ctx.comm->rank() == 0) out.push_back(std::move(full));
        });
    }
    ASSERT_EQ(out.size(), 3u);
    EXPECT_TRUE(bit_identical(out[0], out[1]));
    EXPECT_TRUE(bit_identical(out[0], out[2]));
}

TEST(Multigrid, CycleCapRaisesNoConvergence)
{
    const GlobalGrid g = GlobalGrid::uniform({16, 16, 16}, {1, 1, 1});
    const auto plan = build_decomposition(g, {1, 1, 1}, 1);
    on_ranks(plan, [&](RankContext& ctx) {
        Array3 b(ctx.sub->local_dims, 1), x(ctx.sub->local_dims, 1);
        hydro::test::sample(b, g, *ctx.sub, Location::Cell, rhs);
        MultigridOptions opt;
        opt.max_cycles = 1;
        opt.tolerance = 1e-300;
        Multigrid mg(ctx, opt);
        try {
            mg.solve(x, b, 1.0);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.code(), ErrorCode::NoConvergence);
        }
    });
}

namespace {

/// Random u* with zero normal velocity on walls, projected once.
double projected_divergence(Index3 topo, bool split)
{
    const GlobalGrid g = GlobalGrid::uniform({16, 16, 16}, {1, 1, 1});
    const auto plan = build_decomposition(g, topo, 2, walls());
    double div = 0.0;
    on_ranks(plan, [&](RankContext& ctx) {
        const auto& s = *ctx.sub;
        StaggeredField f(s.local_dims, 2);
        for (int c = 0; c < 3; ++c) {
            Array3& a = f.velocity(c);
            a.for_each_interior([&](int i, int j, int k) {
                const Index3 gi{s.offset[0] + i, s.offset[1] + j, s.offset[2] + k};
                const bool wall = gi[c] == g.dims[c] - 1;
                // deterministic pseudo-random value of the global index
                std::mt19937 r(static_cast<unsigned>(c + 3 * (gi[0] + 17 * (gi[1] + 17 * gi[2]))));
                a(i, j, k) = wall ? 0.0 : std::uniform_real_distribution<double>(-1, 1)(r);
            });
            exchange_halos(a, c, s, *ctx.comm, [&](int axis) {
                if (axis == c && s.physical(face_of(c, false))) {
                    detail::for_each_face_ghost(a, face_of(c, false), [&](const Index3& t) {
                        a.at(detail::shifted(t, c, -1)) = 0.0;
                    });
                }
            });
        }
        const double dt = 0.01;
        MultigridOptions opt;
        Multigrid mg(ctx, opt);
        Array3 p_hat(s.local_dims, 2);
        DensitySplit ds;
        Array3 rho(s.local_dims, 2, 1.0), pe(s.local_dims, 2, 0.0);
        if (split) {
            hydro::test::sample_all(rho, g, s, Location::Cell,
                                    [](const Vec3& x) { return x[2] < 0.5 ? 1000.0 : 1.25; });
            ds = DensitySplit{&rho, &pe, 1.25};
        }
        solve_pressure(f, dt, mg, ctx, p_hat, ds);
        project(f, p_hat, dt, 0.0, g, ds);
        // wall ghosts are untouched by the exchange and stay zero
        for (int c = 0; c < 3; ++c) exchange_halos(f.velocity(c), c, s, *ctx.comm);
        div = max_divergence(f, ctx);
    });
    return div;
}

} // namespace

TEST(Projection, LeavesDivergenceBelowTolerance)
{
    for (Index3 topo : {Index3{1, 1, 1}, Index3{2, 2, 2}}) {
        EXPECT_LE(projected_divergence(topo, false), 1e-6);
        EXPECT_LE(projected_divergence(topo, true), 1e-6);
    }
}

TEST(Projection, PressureUpdateIncludesViscousTerm)
{
    const GlobalGrid g = GlobalGrid::uniform({8, 8, 8}, {1, 1, 1});
    const auto plan = build_decomposition(g, {1, 1, 1}, 1);
    const auto& s = plan.subdomain(0);
    StaggeredField f(s.local_dims, 1);
    Array3 p_hat(s.local_dims, 1);
    hydro::test::sample_all(p_hat, g, s, Location::Cell, [](const Vec3& x) { return x[0] * x[0]; });
    project(f, p_hat, 0.1, 0.5, g);
    // Lap(x^2) = 2 exactly with the 7-point stencil
    EXPECT_NEAR(f.p(3, 3, 3), p_hat(3, 3, 3) - 0.5 * 0.5 * 0.1 * 2.0, 1e-12);
}
