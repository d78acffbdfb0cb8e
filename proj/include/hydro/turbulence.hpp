#pragma once

/**
 * @file turbulence.hpp
 * @brief WALE subgrid-scale eddy viscosity.
 */

#include "hydro/mesh.hpp"

#include <array>
#include <cmath>

namespace hydro {

inline constexpr double kWaleConstant = 0.46;

/// g[i][j] = du_i/dx_j
using VelocityGradient = std::array<std::array<double, 3>, 3>;

inline double wale_viscosity(const VelocityGradient& g, double delta, double cw = kWaleConstant)
{
    VelocityGradient g2{};
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j)
            for (int k = 0; k < 3; ++k)
                g2[i][j] += g[i][k] * g[k][j];
    const double tr = (g2[0][0] + g2[1][1] + g2[2][2]) / 3.0;
    double ss = 0.0;
    double sd = 0.0;
    for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
            const double s = 0.5 * (g[i][j] + g[j][i]);
            const double d = 0.5 * (g2[i][j] + g2[j][i]) - (i == j ? tr : 0.0);
            ss += s * s;
            sd += d * d;
        }
    }
    const double denom = std::pow(ss, 2.5) + std::pow(sd, 1.25);
    if (denom < 1e-30) {
        return 0.0;
    }
    const double cd = cw * delta;
    return cd * cd * std::pow(sd, 1.5) / denom;
}

/// Velocity gradient at the centre of owned cell (i,j,k). Diagonal terms
/// are compact face differences; off-diagonal terms central differences of
/// centre-averaged components. Needs one valid ghost layer.
inline VelocityGradient cell_gradient(const StaggeredField& f, const GlobalGrid& g, int i, int j, int k)
{
    VelocityGradient out{};
    for (int c = 0; c < 3; ++c) {
        const Array3& a = f.velocity(c);
        const std::size_t idx = a.index(i, j, k);
        const double* p = a.data() + idx;
        const std::ptrdiff_t sc = a.stride(c);
        for (int d = 0; d < 3; ++d) {
            if (d == c) {
                out[c][d] = (p[0] - p[-sc]) / g.spacing[d];
                continue;
            }
            const std::ptrdiff_t sd = a.stride(d);
            const double hi = 0.5 * (p[sd] + p[sd - sc]);
            const double lo = 0.5 * (p[-sd] + p[-sd - sc]);
            out[c][d] = (hi - lo) / (2.0 * g.spacing[d]);
        }
    }
    return out;
}

/// Fills owned cells of f.nu_t; ghosts are left to the caller.
inline void eddy_viscosity_field(StaggeredField& f, const GlobalGrid& g)
{
    const double delta = g.filter_width();
    f.nu_t.for_each_interior([&](int i, int j, int k) {
        f.nu_t(i, j, k) = wale_viscosity(cell_gradient(f, g, i, j, k), delta);
    });
}

} // namespace hydro
