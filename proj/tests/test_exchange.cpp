#include "hydro/exchange.hpp"
#include "hydro/socket_transport.hpp"
#include "support.hpp"

#include <gtest/gtest.h>

#include <random>
#include <thread>
#include <unistd.h>

using namespace hydro;
using hydro::test::on_ranks;

TEST(Frame, LayoutIsLittleEndianWithMagic)
{
    const std::vector<double> payload{1.0, -2.5};
    const auto bytes = encode_frame(0x01020304u, payload);
    ASSERT_EQ(bytes.size(), 12u + 16u);
    EXPECT_EQ(bytes[0], 0x52); // magic 0x48594452, little-endian
    EXPECT_EQ(bytes[3], 0x48);
    EXPECT_EQ(bytes[4], 0x04);
    EXPECT_EQ(bytes[7], 0x01);
    EXPECT_EQ(bytes[8], 16);
    const auto [tag, values] = decode_frame(bytes);
    EXPECT_EQ(tag, 0x01020304u);
    EXPECT_EQ(values, payload);
}

TEST(Frame, MalformedFramesAreTransportFailures)
{
    auto bytes = encode_frame(7u, std::vector<double>{3.0});
    auto bad_magic = bytes;
    bad_magic[0] ^= 0xFF;
    EXPECT_THROW(decode_frame(bad_magic), Error);
    auto truncated = bytes;
    truncated.pop_back();
    try {
        decode_frame(truncated);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::TransportFailure);
    }
}

TEST(Tag, FieldsRoundTrip)
{
    const auto t = make_tag(5, 3, 1234);
    EXPECT_EQ(tag_channel(t), 5);
    EXPECT_EQ(tag_face(t), 3);
    EXPECT_EQ(tag_source(t), 1234);
}

TEST(Halo, SplitCopiesNeighbourEdge)
{
    const GlobalGrid g = GlobalGrid::uniform({8, 4, 4}, {1, 1, 1});
    BoundaryMap walls;
    walls.fill(BoundaryKind::SlipWall);
    const auto plan = build_decomposition(g, {2, 1, 1}, 2, walls);
    on_ranks(plan, [&](RankContext& ctx) {
        Array3 a(ctx.sub->local_dims, 2, -1.0);
        a.for_each_interior([&](int i, int j, int k) { a(i, j, k) = ctx.comm->rank() == 0 && i == 3 ? 7.0 : 0.0; });
        exchange_halos(a, FieldTag::P, *ctx.sub, *ctx.comm);
        if (ctx.comm->rank() == 1) {
            for (int k = 0; k < 4; ++k)
                for (int j = 0; j < 4; ++j) EXPECT_EQ(a(-1, j, k), 7.0);
        } else {
            // physical face: untouched
            EXPECT_EQ(a(-1, 0, 0), -1.0);
        }
    });
}

TEST(Halo, SingleWorkerPeriodicWrap)
{
    const GlobalGrid g = GlobalGrid::uniform({6, 4, 4}, {1, 1, 1});
    const auto plan = build_decomposition(g, {1, 1, 1}, 2);
    on_ranks(plan, [&](RankContext& ctx) {
        Array3 a(ctx.sub->local_dims, 2);
        a.for_each_interior([&](int i, int j, int k) { a(i, j, k) = i + 10 * j + 100 * k; });
        exchange_halos(a, FieldTag::U, *ctx.sub, *ctx.comm);
        EXPECT_EQ(a(-1, 1, 1), a(5, 1, 1));
        EXPECT_EQ(a(-2, 1, 1), a(4, 1, 1));
        EXPECT_EQ(a(6, 2, 3), a(0, 2, 3));
        // corner via the per-axis passes
        EXPECT_EQ(a(-1, -1, -1), a(5, 3, 3));
    });
}

TEST(Halo, GhostsMatchGlobalFieldOnEveryDecomposition)
{
    const GlobalGrid g = GlobalGrid::uniform({8, 8, 8}, {1, 1, 1});
    for (Index3 topo : {Index3{2, 1, 1}, Index3{2, 2, 2}, Index3{1, 2, 1}}) {
        const auto plan = build_decomposition(g, topo, 2);
        on_ranks(plan, [&](RankContext& ctx) {
            const auto& s = *ctx.sub;
            auto global = [&](int i, int j, int k) {
                auto w = [](int v, int n) { return ((v % n) + n) % n; };
                return 1.0 * w(s.offset[0] + i, 8) + 8.0 * w(s.offset[1] + j, 8) + 64.0 * w(s.offset[2] + k, 8);
            };
            Array3 a(s.local_dims, 2);
            a.for_each_interior([&](int i, int j, int k) { a(i, j, k) = global(i, j, k); });
            Array3 before = a;
            exchange_halos(a, FieldTag::V, s, *ctx.comm);
            for (int k = -2; k < s.local_dims[2] + 2; ++k)
                for (int j = -2; j < s.local_dims[1] + 2; ++j)
                    for (int i = -2; i < s.local_dims[0] + 2; ++i) ASSERT_EQ(a(i, j, k), global(i, j, k));
            // interior untouched, second exchange idempotent
            a.for_each_interior([&](int i, int j, int k) { EXPECT_EQ(a(i, j, k), before(i, j, k)); });
            Array3 once = a;
            exchange_halos(a, FieldTag::V, s, *ctx.comm);
            EXPECT_TRUE(bit_identical(a, once));
        });
    }
}

TEST(Reduce, MaxAndSumExamples)
{
    const std::vector<double> mx{1.0, 5.0, 3.0};
    const std::vector<double> sm{0.25, 0.25, 0.5};
    run_inproc(3, [&](Communicator& comm) {
        EXPECT_EQ(comm.allreduce({ReductionKind::Max, mx[static_cast<std::size_t>(comm.rank())]}), 5.0);
        EXPECT_EQ(comm.allreduce({ReductionKind::Sum, sm[static_cast<std::size_t>(comm.rank())]}), 1.0);
    });
    run_inproc(1, [&](Communicator& comm) {
        EXPECT_EQ(comm.allreduce_max(-3.5), -3.5);
        EXPECT_EQ(comm.allreduce_sum(2.25), 2.25);
    });
}

TEST(Reduce, ExactSumIndependentOfWorkerCount)
{
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> d(-1e6, 1e6);
    std::vector<double> xs(4096);
    for (double& x : xs) x = d(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
    std::vector<double> results;
    for (int n : {1, 2, 3, 8}) {
        double out = 0.0;
        run_inproc(n, [&](Communicator& comm) {
            ExactAccumulator acc;
            for (std::size_t i = static_cast<std::size_t>(comm.rank()); i < xs.size(); i += static_cast<std::size_t>(n)) {
                acc.add(xs[i]);
            }
            const double s = comm.exact_sum(acc);
            if (comm.rank() == 0) out = s;
        });
        results.push_back(out);
    }
    for (double r : results) EXPECT_EQ(std::bit_cast<std::uint64_t>(r), std::bit_cast<std::uint64_t>(results[0]));
}

TEST(ExactSum, CancellationIsExact)
{
    ExactAccumulator acc;
    acc.add(1e300);
    acc.add(1.0);
    acc.add(-1e300);
    acc.add(1e-300);
    EXPECT_EQ(acc.value(), 1.0);
}

TEST(Gather, ReassemblesGlobalArray)
{
    const GlobalGrid g = GlobalGrid::uniform({8, 4, 8}, {1, 1, 1});
    const auto plan = build_decomposition(g, {2, 1, 2}, 1);
    on_ranks(plan, [&](RankContext& ctx) {
        Array3 a(ctx.sub->local_dims, 1);
        a.for_each_interior([&](int i, int j, int k) {
            a(i, j, k) = (ctx.sub->offset[0] + i) + 10.0 * (ctx.sub->offset[1] + j) + 100.0 * (ctx.sub->offset[2] + k);
        });
        const Array3 full = gather_interior(a, plan, *ctx.comm);
        if (ctx.comm->rank() == 0) {
            ASSERT_EQ(full.interior(), g.dims);
            full.for_each_interior([&](int i, int j, int k) { EXPECT_EQ(full(i, j, k), i + 10.0 * j + 100.0 * k); });
        }
    });
}

TEST(Transport, WorkerFailureAbortsPeers)
{
    EXPECT_THROW(run_inproc(2,
                            [](Communicator& comm) {
                                if (comm.rank() == 1) throw Error(ErrorCode::InvalidArgument, "boom");
                                comm.allreduce_sum(1.0); // would block forever without the abort
                            }),
                 Error);
}

TEST(Transport, CommTimerCountsNestedCallsOnce)
{
    run_inproc(2, [](Communicator& comm) {
        comm.reset_stats();
        comm.allreduce_sum(1.0);
        const auto s = comm.stats();
        EXPECT_GT(s.seconds, 0.0);
        EXPECT_GT(s.messages, 0);
    });
}

TEST(SocketTransport, TwoProcessesWorthOfRanksOverLoopback)
{
    const int base = 20000 + static_cast<int>(::getpid() % 20000);
    const std::string list = "127.0.0.1:" + std::to_string(base) + ",127.0.0.1:" + std::to_string(base + 1);
    std::vector<double> sums(2), maxes(2);
    std::vector<std::thread> threads;
    std::vector<std::exception_ptr> errors(2);
    for (int r = 0; r < 2; ++r) {
        threads.emplace_back([&, r] {
            try {
                SocketTransport t(parse_addresses(list), r, std::chrono::seconds(20));
                Communicator comm(t);
                sums[static_cast<std::size_t>(r)] = comm.allreduce_sum(r + 0.5);
                maxes[static_cast<std::size_t>(r)] = comm.allreduce_max(10.0 * r);
                comm.barrier();
            } catch (...) {
                errors[static_cast<std::size_t>(r)] = std::current_exception();
            }
        });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    EXPECT_EQ(sums[0], 2.0);
    EXPECT_EQ(sums[1], 2.0);
    EXPECT_EQ(maxes[0], 10.0);
}

TEST(SocketTransport, AddressParsing)
{
    const auto e = parse_addresses("a:1,b:22");
    ASSERT_EQ(e.size(), 2u);
    EXPECT_EQ(e[1].host, "b");
    EXPECT_EQ(e[1].port, 22);
    EXPECT_THROW(parse_addresses("nohost"), Error);
}
