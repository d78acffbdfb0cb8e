#include "hydro/cases.hpp"
#include "hydro/harness.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

using namespace hydro;
using hydro::test::on_ranks;

TEST(Cases, SpecDerivedValues)
{
    EXPECT_DOUBLE_EQ(CavitySpec{}.nu(), 1.0 / 400.0);
    EXPECT_DOUBLE_EQ(TgvSpec{}.nu(), 1.0 / 1600.0);
    const WaveSpec w;
    EXPECT_NEAR(w.celerity(), 1.469, 5e-4);
    EXPECT_NEAR(w.wavenumber(), std::sqrt(0.06 / 0.032), 1e-15);
    EXPECT_EQ(cavity_table_rows().front(), 160);
    EXPECT_EQ(tgv_table_rows().back(), 1000);
    EXPECT_EQ(wave_table_rows()[0], (Index3{1280, 40, 30}));
}

TEST(Cases, UnknownIdIsRejected)
{
    EXPECT_THROW(make_case("channel", {8, 8, 8}), Error);
    EXPECT_EQ(make_case("tgv", {8, 8, 8}).config.scheme, Scheme::WENO5);
    EXPECT_EQ(make_case("cavity", {8, 8, 8}).config.scheme, Scheme::CD4);
    EXPECT_TRUE(make_case("wave", {8, 8, 8}).config.enable_lsm);
}

TEST(Cases, CavityBoundariesAndLid)
{
    const CaseSetup c = make_cavity({8, 8, 8});
    EXPECT_EQ(c.boundaries[static_cast<std::size_t>(Face::ZHigh)], BoundaryKind::MovingLid);
    EXPECT_EQ(c.boundaries[static_cast<std::size_t>(Face::YLow)], BoundaryKind::Periodic);
    EXPECT_EQ(c.bc.lid_velocity[0], 1.0);
}

TEST(Tgv, InitialKineticEnergy)
{
    for (int n : {32, 64}) {
        const CaseSetup c = make_tgv({n, n, n});
        for (Index3 topo : {Index3{1, 1, 1}, Index3{2, 2, 2}}) {
            const auto plan = plan_for(c, topo);
            on_ranks(plan, [&](RankContext& ctx) {
                SimState s(ctx.sub->local_dims, plan.subdomain(0).ghost_width);
                c.init(s, ctx);
                EXPECT_NEAR(kinetic_energy(s.fields, ctx), 0.125, 1e-12) << n;
                EXPECT_NEAR(mean_velocity(s.fields, 0, ctx), 0.0, 1e-14);
            });
        }
    }
}

TEST(Tgv, InitialFieldIsDiscretelyDivergenceFree)
{
    const CaseSetup c = make_tgv({16, 16, 16});
    const auto plan = plan_for(c, {1, 1, 1});
    on_ranks(plan, [&](RankContext& ctx) {
        SimState s(ctx.sub->local_dims, 4);
        c.init(s, ctx);
        for (int d = 0; d < 3; ++d) exchange_halos(s.fields.velocity(d), d, *ctx.sub, *ctx.comm);
        EXPECT_LT(max_divergence(s.fields, ctx), 1e-13);
    });
}

TEST(Wave, InflowAtTimeZero)
{
    const WaveSpec w;
    const auto st = wave_state(0.0, w);
    EXPECT_EQ(st.eta_h, 1.0);
    EXPECT_EQ(st.d1, 0.0);
    EXPECT_NEAR(wave_elevation(0.0, w), 0.02, 1e-15);
    // crest passes x = 0 at t = 0; elevation decays on both sides
    EXPECT_NEAR(wave_elevation(0.3, w), wave_elevation(-0.3, w), 1e-15);
    EXPECT_LT(wave_elevation(3.0, w), 1e-5);
    const Vec3 air = wave_inflow(0.25, 0.0, w);
    EXPECT_EQ(air, (Vec3{0, 0, 0}));
    const Vec3 bed = wave_inflow(0.0, 0.0, w);
    EXPECT_GT(bed[0], 0.0);
    EXPECT_EQ(bed[2], 0.0);
    // leading order u = eps sqrt(g d) eta/H
    EXPECT_NEAR(wave_inflow(0.1, 0.0, w)[0], 0.1 * std::sqrt(9.81 * 0.2), 0.02);
}

TEST(Wave, DerivativesMatchFiniteDifferences)
{
    const WaveSpec w;
    const double t = 0.17, h = 1e-4;
    auto eta = [&](double s) { return wave_state(s, w).eta_h; };
    const auto st = wave_state(t, w);
    EXPECT_NEAR(st.d1, (eta(t + h) - eta(t - h)) / (2 * h), 1e-6);
    EXPECT_NEAR(st.d2, (eta(t + h) - 2 * eta(t) + eta(t - h)) / (h * h), 1e-3);
    auto d1 = [&](double s) { return wave_state(s, w).d1; };
    EXPECT_NEAR(st.d3, (d1(t + h) - 2 * d1(t) + d1(t - h)) / (h * h), 1e-2);
}

TEST(Wave, StillWaterIsInDiscreteBalance)
{
    CaseSetup c = make_wave({32, 8, 32});
    const auto plan = plan_for(c, {1, 1, 1});
    on_ranks(plan, [&](RankContext& ctx) {
        SimState s(ctx.sub->local_dims, 4);
        c.init(s, ctx);
        fill_scalar(s.fields.p, static_cast<int>(FieldTag::P), ctx, ScalarBoundary::Mirror);
        Array3 conv(ctx.sub->local_dims, 0), rhs(ctx.sub->local_dims, 0);
        momentum_rhs(s.fields, c.grid, c.config, 2, conv, rhs);
        // interior faces only: the top face borders the mirror ghost
        double worst = 0.0;
        rhs.for_each_interior([&](int i, int j, int k) {
            if (k < 31) worst = std::max(worst, std::abs(rhs(i, j, k)));
        });
        EXPECT_LT(worst, 1e-10);
    });
}

TEST(Wave, SurfaceProfileAndCrest)
{
    const GlobalGrid g = GlobalGrid::uniform({64, 4, 32}, {0.64, 0.04, 0.32});
    Array3 phi(g.dims, 0);
    auto eta = [](double x) { return 0.2 + 0.02 / std::pow(std::cosh(8.0 * (x - 0.305)), 2); };
    phi.for_each_interior([&](int i, int j, int k) {
        const double x = (i + 0.5) * g.spacing[0];
        const double z = (k + 0.5) * g.spacing[2];
        phi(i, j, k) = eta(x) - z;
    });
    const auto prof = surface_profile(phi, g);
    ASSERT_EQ(prof.size(), 64u);
    EXPECT_NEAR(prof[10], eta(0.105), 1e-12);
    EXPECT_NEAR(wave_crest_position(phi, g), 0.305, 2e-3);
    Array3 dry(g.dims, 0, -1.0);
    EXPECT_TRUE(std::isnan(wave_crest_position(dry, g)));
}

TEST(Cavity, StartsAtRestAndLidDrivesFlow)
{
    const CaseSetup c = make_cavity({16, 16, 16});
    const auto plan = plan_for(c, {1, 1, 1});
    on_ranks(plan, [&](RankContext& ctx) {
        Solver solver = make_solver(c, plan, *ctx.comm);
        EXPECT_EQ(kinetic_energy(solver.state().fields, ctx), 0.0);
        EXPECT_DOUBLE_EQ(solver.next_dt(), std::min(0.8 / 16.0, 2.0 / (c.config.nu * 16.0 / 3.0 * 3 * 256)));
        solver.step();
        EXPECT_GT(kinetic_energy(solver.state().fields, ctx), 0.0);
        EXPECT_LE(max_divergence(solver.state().fields, ctx), 1e-6);
    });
}
