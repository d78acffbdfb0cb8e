#include "hydro/mesh.hpp"

#include <gtest/gtest.h>

#include <set>

using namespace hydro;

namespace {

GlobalGrid unit_grid(Index3 dims)
{
    return GlobalGrid::uniform(dims, {1.0, 1.0, 1.0});
}

} // namespace

TEST(Grid, RejectsSmallDimensions)
{
    EXPECT_THROW(unit_grid({3, 8, 8}), Error);
    EXPECT_NO_THROW(unit_grid({4, 4, 4}));
}

TEST(Decomposition, CavityTableGridOnSixtyFourWorkers)
{
    const auto plan = build_decomposition(unit_grid({160, 160, 160}), {4, 4, 4}, 3);
    EXPECT_EQ(plan.worker_count(), 64);
    for (const auto& s : plan.subdomains()) {
        EXPECT_EQ(s.local_dims, (Index3{40, 40, 40}));
    }
}

TEST(Decomposition, SingleWorkerFacesAreBoundaries)
{
    BoundaryMap walls;
    walls.fill(BoundaryKind::NoSlipWall);
    const auto plan = build_decomposition(unit_grid({8, 8, 8}), {1, 1, 1}, 2, walls);
    ASSERT_EQ(plan.worker_count(), 1);
    for (Face f : kAllFaces) {
        EXPECT_TRUE(plan.subdomain(0).physical(f));
        EXPECT_EQ(plan.subdomain(0).neighbor(f).kind, BoundaryKind::NoSlipWall);
    }
}

TEST(Decomposition, SingleWorkerPeriodicWrapsToItself)
{
    const auto plan = build_decomposition(unit_grid({8, 8, 8}), {1, 1, 1}, 2);
    for (Face f : kAllFaces) {
        EXPECT_EQ(plan.subdomain(0).neighbor(f).rank, 0);
    }
}

TEST(Decomposition, NonDivisible)
{
    try {
        build_decomposition(unit_grid({10, 10, 10}), {3, 1, 1}, 2);
        FAIL() << "expected NonDivisible";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::NonDivisible);
    }
}

TEST(Decomposition, GhostTooWide)
{
    try {
        build_decomposition(unit_grid({8, 8, 8}), {2, 1, 1}, 3);
        FAIL() << "expected GhostTooWide";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::GhostTooWide);
    }
}

TEST(Decomposition, PartitionIsExactAndDisjoint)
{
    const GlobalGrid g = unit_grid({12, 8, 16});
    const auto plan = build_decomposition(g, {3, 2, 4}, 1);
    std::set<std::array<int, 3>> seen;
    for (const auto& s : plan.subdomains()) {
        for (int k = 0; k < s.local_dims[2]; ++k)
            for (int j = 0; j < s.local_dims[1]; ++j)
                for (int i = 0; i < s.local_dims[0]; ++i) {
                    const bool fresh = seen.insert({s.offset[0] + i, s.offset[1] + j, s.offset[2] + k}).second;
                    EXPECT_TRUE(fresh);
                }
    }
    EXPECT_EQ(static_cast<long long>(seen.size()), g.cell_count());
}

TEST(Decomposition, NeighboursAreReciprocal)
{
    const auto plan = build_decomposition(unit_grid({16, 16, 16}), {2, 4, 2}, 2);
    for (const auto& s : plan.subdomains()) {
        for (Face f : kAllFaces) {
            const int r = s.neighbor(f).rank;
            ASSERT_GE(r, 0);
            EXPECT_EQ(plan.subdomain(r).neighbor(opposite(f)).rank, s.rank);
        }
    }
}

TEST(MessageCount, FormulaExamples)
{
    const auto a = build_decomposition(unit_grid({160, 160, 160}), {4, 4, 4}, 3);
    EXPECT_EQ(message_cell_count(a, Face::XLow), 4800);
    const auto b = build_decomposition(unit_grid({16, 8, 8}), {2, 2, 2}, 2);
    EXPECT_EQ(b.local_dims(), (Index3{8, 4, 4}));
    EXPECT_EQ(message_cell_count(b, Face::XHigh), 32);
}

TEST(MessageCount, PeriodicWrapMatchesInteriorFace)
{
    const auto plan = build_decomposition(unit_grid({8, 16, 16}), {1, 2, 2}, 2);
    EXPECT_EQ(message_cell_count(plan, Face::YLow), message_cell_count(plan, Face::ZLow));
    EXPECT_EQ(message_cell_count(plan, Face::YLow), 2 * 8 * 8);
}

TEST(MessageCount, TotalGrowsWhileMessagesShrink)
{
    const GlobalGrid g = unit_grid({32, 32, 32});
    long long prev_total = 0;
    long long prev_msg = 1LL << 40;
    for (int t : {1, 2, 4}) {
        const auto plan = build_decomposition(g, {t, t, t}, 2);
        const long long msg = message_cell_count(plan, Face::XLow);
        const long long total = msg * 6 * plan.worker_count();
        EXPECT_LT(msg, prev_msg);
        EXPECT_GT(total, prev_total);
        prev_msg = msg;
        prev_total = total;
    }
}

TEST(Array3, IndexRoundTripXFastest)
{
    Array3 a({5, 4, 3}, 2);
    EXPECT_EQ(a.extent(), (Index3{9, 8, 7}));
    EXPECT_EQ(a.index(-2, -2, -2), 0u);
    EXPECT_EQ(a.index(-1, -2, -2), 1u);
    EXPECT_EQ(a.index(-2, -1, -2), 9u);
    EXPECT_EQ(a.index(-2, -2, -1), 72u);
    for (int k = -2; k < 5; ++k)
        for (int j = -2; j < 6; ++j)
            for (int i = -2; i < 7; ++i)
                a(i, j, k) = 100 * k + 10 * j + i;
    EXPECT_EQ(a.data()[a.index(3, 1, 2)], 213.0);
    EXPECT_EQ(a.stride(1), 9);
    EXPECT_EQ(a.stride(2), 72);
}

TEST(StaggeredField, SamplesSitOnFacesAndCentres)
{
    const GlobalGrid g = unit_grid({4, 4, 4});
    const auto plan = build_decomposition(g, {1, 1, 1}, 1);
    const auto& s = plan.subdomain(0);
    EXPECT_DOUBLE_EQ(sample_position(g, s, Location::Cell, 0, 0, 0)[0], 0.125);
    EXPECT_DOUBLE_EQ(sample_position(g, s, Location::XFace, 0, 0, 0)[0], 0.25);
    EXPECT_DOUBLE_EQ(sample_position(g, s, Location::XFace, 0, 0, 0)[1], 0.125);
    EXPECT_DOUBLE_EQ(sample_position(g, s, Location::ZFace, 3, 3, 3)[2], 1.0);
    StaggeredField f({4, 4, 4}, 2);
    EXPECT_EQ(f.u.ghost(), 2);
    EXPECT_EQ(&f.get(FieldTag::W), &f.w);
    EXPECT_EQ(location_of(FieldTag::V), Location::YFace);
    EXPECT_EQ(location_of(FieldTag::Phi), Location::Cell);
}

TEST(Array3, BitIdenticalDistinguishesSignedZero)
{
    Array3 a({4, 4, 4}, 1), b({4, 4, 4}, 1);
    EXPECT_TRUE(bit_identical(a, b));
    b(0, 0, 0) = -0.0;
    EXPECT_FALSE(bit_identical(a, b));
}
