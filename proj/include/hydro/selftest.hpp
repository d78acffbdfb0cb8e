#pragma once

/**
 * @file selftest.hpp
 * @brief Quick invariant suite behind the `selftest` subcommand.
 */

#include "hydro/cases.hpp"
#include "hydro/harness.hpp"
#include "hydro/levelset.hpp"
#include "hydro/schemes.hpp"
#include "hydro/turbulence.hpp"

#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <random>
#include <string>
#include <vector>

namespace hydro {

inline std::string sci(double v)
{
    std::ostringstream os;
    os << std::scientific << std::setprecision(3) << v;
    return os.str();
}

struct CheckResult
{
    std::string name;
    bool pass = false;
    std::string detail;
};

inline std::vector<CheckResult> run_selftest()
{
    std::vector<CheckResult> out;
    auto check = [&](const std::string& name, const std::function<std::pair<bool, std::string>()>& fn) {
        try {
            auto [ok, detail] = fn();
            out.push_back({name, ok, detail});
        } catch (const std::exception& e) {
            out.push_back({name, false, e.what()});
        }
    };

    check("weno optimal weights on flat data", [] {
        const auto w = weno_weights({0.0, 0.0, 0.0}, WenoParams::mirrored());
        const bool ok = w[0] == 0.1 && w[1] == 0.3 && w[2] == 0.6;
        return std::pair{ok, std::string()};
    });

    check("weno weights convex", [] {
        std::mt19937_64 rng(7);
        std::uniform_real_distribution<double> d(-1.0, 1.0);
        double worst = 0.0;
        for (int n = 0; n < 10000; ++n) {
            Stencil5 s;
            for (double& v : s.f) v = d(rng);
            const auto w = weno_weights(weno_smoothness(s));
            worst = std::max(worst, std::abs(w[0] + w[1] + w[2] - 1.0));
        }
        return std::pair{worst <= 1e-14, "max |sum - 1| = " + sci(worst)};
    });

    check("heaviside end points", [] {
        const double e = 0.015;
        const bool ok = heaviside(0.0, e) == 0.5 && heaviside(e, e) == 1.0 && heaviside(-e, e) == 0.0;
        return std::pair{ok, std::string()};
    });

    check("wale vanishes in pure shear", [] {
        VelocityGradient g{};
        g[0][1] = 3.0;
        return std::pair{wale_viscosity(g, 0.1) == 0.0, std::string()};
    });

    check("speedup and efficiency", [] {
        const bool ok = speedup(100.0, 25.0) == 4.0 && efficiency(2.0, 50.0, 1.0, 100.0) == 1.0 &&
                        efficiency_normalized(2.0, 100.0, 1.0, 100.0) == 0.5;
        return std::pair{ok, std::string()};
    });

    check("tgv initial kinetic energy", [] {
        double ke = 0.0;
        const CaseSetup c = make_tgv({16, 16, 16});
        run_benchmark(c, {1, 1, 1}, 1, 1, [&](Solver& s) { ke = kinetic_energy(s.state().fields, s.context()); });
        // one step in; KE has decayed only slightly
        return std::pair{ke < 0.125 && ke > 0.12, "KE after one step = " + sci(ke)};
    });

    check("cavity projection divergence", [] {
        double worst = 0.0;
        const CaseSetup c = make_cavity({16, 16, 16});
        run_benchmark(c, {1, 1, 1}, 5, 5,
                      [&](Solver& s) { worst = std::max(worst, max_divergence(s.state().fields, s.context())); });
        return std::pair{worst <= 1e-6, "max |div u| = " + sci(worst)};
    });

    check("decomposition invariance", [] {
        const CaseSetup c = make_cavity({16, 16, 16});
        auto fields = [&](const Index3& topo) {
            GlobalFields g;
            run_benchmark(c, topo, 3, 3, [&](Solver& s) {
                if (s.state().step == 3) {
                    GlobalFields x = gather_fields(s);
                    if (s.context().comm->rank() == 0) g = std::move(x);
                }
            });
            return g;
        };
        const GlobalFields a = fields({1, 1, 1});
        const GlobalFields b = fields({2, 2, 2});
        const bool ok = a.u.size() > 0 && bit_identical(a.u, b.u) && bit_identical(a.v, b.v) &&
                        bit_identical(a.w, b.w) && bit_identical(a.p, b.p);
        return std::pair{ok, std::string()};
    });
    return out;
}

} // namespace hydro
