#pragma once

#include "hydro/exchange.hpp"
#include "hydro/harness.hpp"
#include "hydro/mesh.hpp"

#include <functional>

namespace hydro::test {

/// Runs fn(ctx) on every rank of a plan with the in-process transport.
inline void on_ranks(const DecompositionPlan& plan, const std::function<void(RankContext&)>& fn)
{
    run_inproc(plan.worker_count(), [&](Communicator& comm) {
        RankContext ctx{&plan, &plan.subdomain(comm.rank()), &comm};
        fn(ctx);
    });
}

/// Fills owned samples of `a` from a function of global position.
template <class F>
void sample(Array3& a, const GlobalGrid& g, const SubdomainSpec& s, Location loc, F&& f)
{
    a.for_each_interior([&](int i, int j, int k) { a(i, j, k) = f(sample_position(g, s, loc, i, j, k)); });
}

/// Same, including ghost samples.
template <class F>
void sample_all(Array3& a, const GlobalGrid& g, const SubdomainSpec& s, Location loc, F&& f)
{
    const int ng = a.ghost();
    for (int k = -ng; k < a.n(2) + ng; ++k)
        for (int j = -ng; j < a.n(1) + ng; ++j)
            for (int i = -ng; i < a.n(0) + ng; ++i)
                a(i, j, k) = f(sample_position(g, s, loc, i, j, k));
}

/// Least-squares slope of log(err) against log(h), negated (observed order).
inline double observed_order(const std::vector<double>& h, const std::vector<double>& err)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(h.size());
    for (std::size_t i = 0; i < h.size(); ++i) {
        const double x = std::log(h[i]), y = std::log(err[i]);
        sx += x;
        sy += y;
        sxx += x * x;
        sxy += x * y;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

} // namespace hydro::test
