#pragma once

/**
 * @file schemes.hpp
 * @brief Spatial discretisation: central differences, midpoint interpolation,
 *        WENO5 reconstruction and the convective and diffusive operators on
 *        the staggered grid.
 */

#include "hydro/error.hpp"
#include "hydro/mesh.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <string>

namespace hydro {

enum class Scheme { CD2, CD4, WENO5 };

inline const char* to_string(Scheme s)
{
    switch (s) {
    case Scheme::CD2: return "cd2";
    case Scheme::CD4: return "cd4";
    case Scheme::WENO5: return "weno5";
    }
    return "unknown";
}

inline Scheme parse_scheme(const std::string& s)
{
    if (s == "cd2") return Scheme::CD2;
    if (s == "cd4") return Scheme::CD4;
    if (s == "weno5") return Scheme::WENO5;
    throw Error(ErrorCode::InvalidArgument, "unknown scheme '" + s + "'");
}

/// Ghost width the decomposition allocates for a scheme.
constexpr int ghost_width_for(Scheme s)
{
    return s == Scheme::CD2 ? 2 : (s == Scheme::CD4 ? 3 : 4);
}

/// Ghost layers the convective and diffusive kernels actually read.
constexpr int stencil_reach(Scheme s)
{
    return s == Scheme::WENO5 ? 3 : 2;
}

enum class Cd4Coefficients { Standard, NineSixteen };

/// f[0..4] = f_{i-2} .. f_{i+2}.
struct Stencil5
{
    std::array<double, 5> f{};
    double dx = 1.0;
};

/// Optimal weights c_k pair with candidate stencils k = left, centre, right
/// (the ordering of weno_combine). The default set (1/10, 3/10, 6/10) is the
/// mirrored assignment and gives only third order with that ordering; the
/// fifth-order pairing is standard() = (1/10, 6/10, 3/10).
struct WenoParams
{
    std::array<double, 3> c{0.1, 0.3, 0.6};
    double eps = 1e-6;
    int m = 2;

    static WenoParams mirrored() { return {}; }
    static WenoParams standard() { return {{0.1, 0.6, 0.3}, 1e-6, 2}; }
};

inline double cd2_derivative(double fm1, double fp1, double dx)
{
    return (fp1 - fm1) / (2.0 * dx);
}

inline double cd4_derivative(const Stencil5& s, Cd4Coefficients set = Cd4Coefficients::Standard)
{
    const auto& f = s.f;
    if (set == Cd4Coefficients::NineSixteen) {
        return (-f[4] + 9.0 * f[3] - 9.0 * f[1] + f[0]) / (16.0 * s.dx);
    }
    return (-f[4] + 8.0 * f[3] - 8.0 * f[1] + f[0]) / (12.0 * s.dx);
}

/// Value at i+1/2 from f_{i-1}, f_i, f_{i+1}, f_{i+2}.
inline double midpoint_interp4(double fm1, double f0, double fp1, double fp2)
{
    return (9.0 * (f0 + fp1) - (fm1 + fp2)) / 16.0;
}

inline std::array<double, 3> weno_smoothness(const Stencil5& s)
{
    const auto& f = s.f;
    const double a1 = f[0] - 2.0 * f[1] + f[2];
    const double b1 = f[0] - 4.0 * f[1] + 3.0 * f[2];
    const double a2 = f[1] - 2.0 * f[2] + f[3];
    const double b2 = f[1] - f[3];
    const double a3 = f[2] - 2.0 * f[3] + f[4];
    const double b3 = 3.0 * f[2] - 4.0 * f[3] + f[4];
    constexpr double k = 13.0 / 12.0;
    return {k * a1 * a1 + 0.25 * b1 * b1, k * a2 * a2 + 0.25 * b2 * b2, k * a3 * a3 + 0.25 * b3 * b3};
}

inline std::array<double, 3> weno_weights(const std::array<double, 3>& beta, const WenoParams& p = {})
{
    std::array<double, 3> alpha{};
    double sum = 0.0;
    for (int k = 0; k < 3; ++k) {
        const double base = beta[k] + p.eps;
        double denom = base;
        for (int e = 1; e < p.m; ++e) {
            denom *= base;
        }
        alpha[k] = p.c[k] / denom;
        sum += alpha[k];
    }
    return {alpha[0] / sum, alpha[1] / sum, alpha[2] / sum};
}

inline double weno_combine(const std::array<double, 3>& w, const Stencil5& s)
{
    const auto& f = s.f;
    return (1.0 / 3.0) * w[0] * f[0] - (1.0 / 6.0) * (7.0 * w[0] + w[1]) * f[1] +
           (1.0 / 6.0) * (11.0 * w[0] + 5.0 * w[1] + 2.0 * w[2]) * f[2] +
           (1.0 / 6.0) * (2.0 * w[1] + 5.0 * w[2]) * f[3] - (1.0 / 6.0) * w[2] * f[4];
}

/// Left-biased WENO5 value at i+1/2 from f_{i-2}..f_{i+2}, eps = 1e-6, m = 2.
inline double weno_left(double a, double b, double c, double d, double e, const std::array<double, 3>& cw)
{
    // Same algebra as weno_smoothness/weights/combine, unrolled for the hot loops.
    const double a1 = a - 2.0 * b + c, b1 = a - 4.0 * b + 3.0 * c;
    const double a2 = b - 2.0 * c + d, b2 = b - d;
    const double a3 = c - 2.0 * d + e, b3 = 3.0 * c - 4.0 * d + e;
    constexpr double k = 13.0 / 12.0;
    const double s1 = k * a1 * a1 + 0.25 * b1 * b1 + 1e-6;
    const double s2 = k * a2 * a2 + 0.25 * b2 * b2 + 1e-6;
    const double s3 = k * a3 * a3 + 0.25 * b3 * b3 + 1e-6;
    const double al1 = cw[0] / (s1 * s1), al2 = cw[1] / (s2 * s2), al3 = cw[2] / (s3 * s3);
    const double inv = 1.0 / (al1 + al2 + al3);
    const double w1 = al1 * inv, w2 = al2 * inv, w3 = al3 * inv;
    return (1.0 / 3.0) * w1 * a - (1.0 / 6.0) * (7.0 * w1 + w2) * b + (1.0 / 6.0) * (11.0 * w1 + 5.0 * w2 + 2.0 * w3) * c +
           (1.0 / 6.0) * (2.0 * w2 + 5.0 * w3) * d - (1.0 / 6.0) * w3 * e;
}

/**
 * Upwinded interface value at i+1/2. window = f_{i-2}..f_{i+3}; a positive
 * advecting sign uses f_{i-2}..f_{i+2}, a negative one the mirrored stencil
 * f_{i+3}..f_{i-1}.
 */
inline double weno5_face_flux(const std::array<double, 6>& w, double sign,
                              const WenoParams& p = WenoParams::standard())
{
    auto rec = [&](double a, double b, double c, double d, double e) {
        const Stencil5 s{{a, b, c, d, e}, 1.0};
        return weno_combine(weno_weights(weno_smoothness(s), p), s);
    };
    if (sign >= 0.0) {
        return rec(w[0], w[1], w[2], w[3], w[4]);
    }
    return rec(w[5], w[4], w[3], w[2], w[1]);
}

/// Upwind WENO5 derivative at the sample p points to (stride s).
inline double weno5_derivative(const double* p, std::ptrdiff_t s, double sign, double dx,
                               const std::array<double, 3>& cw)
{
    if (sign >= 0.0) {
        return (weno_left(p[-2 * s], p[-s], p[0], p[s], p[2 * s], cw) -
                weno_left(p[-3 * s], p[-2 * s], p[-s], p[0], p[s], cw)) / dx;
    }
    return (weno_left(p[3 * s], p[2 * s], p[s], p[0], p[-s], cw) -
            weno_left(p[2 * s], p[s], p[0], p[-s], p[-2 * s], cw)) / dx;
}

inline double cd4_derivative(const double* p, std::ptrdiff_t s, double dx, Cd4Coefficients set)
{
    if (set == Cd4Coefficients::NineSixteen) {
        return (-p[2 * s] + 9.0 * p[s] - 9.0 * p[-s] + p[-2 * s]) / (16.0 * dx);
    }
    return (-p[2 * s] + 8.0 * p[s] - 8.0 * p[-s] + p[-2 * s]) / (12.0 * dx);
}

/// Fourth-order second derivative. Grouped so constant data gives exactly 0.
inline double d2_fourth(const double* p, std::ptrdiff_t s, double dx)
{
    return (16.0 * (p[s] + p[-s]) - (p[2 * s] + p[-2 * s]) - 30.0 * p[0]) / (12.0 * dx * dx);
}

inline double d2_fourth(const Stencil5& s)
{
    return d2_fourth(s.f.data() + 2, 1, s.dx);
}

namespace detail {

/// Velocity component a (a != c) at the location of component c, relative
/// to the sample p of array a at the same (i,j,k): +1/2 along c, -1/2 along a.
inline double advecting(const double* p, std::ptrdiff_t sc, std::ptrdiff_t sa, bool fourth)
{
    if (!fourth) {
        return 0.25 * ((p[0] + p[sc]) + (p[-sa] + p[sc - sa]));
    }
    auto row = [&](std::ptrdiff_t off) {
        const double* q = p + off;
        return midpoint_interp4(q[-sc], q[0], q[sc], q[2 * sc]);
    };
    return midpoint_interp4(row(-2 * sa), row(-sa), row(0), row(sa));
}

inline void require_reach(const Array3& a, Scheme s)
{
    if (a.ghost() < stencil_reach(s)) {
        throw Error(ErrorCode::SchemeStencilOverflow,
                    std::string("ghost width ") + std::to_string(a.ghost()) + " too small for " + to_string(s));
    }
}

} // namespace detail

struct SchemeOptions
{
    Scheme scheme = Scheme::CD4;
    Cd4Coefficients cd4 = Cd4Coefficients::Standard;
    WenoParams weno = WenoParams::standard();
};

/**
 * Advective-form convection C_c = sum_d a_d d(u_c)/dx_d at every owned
 * sample of component c. Advecting velocities are interpolated to the
 * component's location (4-point midpoint rule per direction for CD4/WENO5,
 * 4-sample average for CD2).
 */
inline void convective_term(const StaggeredField& f, const GlobalGrid& g, const SchemeOptions& opt, int c,
                            Array3& out)
{
    const Array3& uc = f.velocity(c);
    detail::require_reach(uc, opt.scheme);
    const bool fourth = opt.scheme != Scheme::CD2;
    const Index3 n = uc.interior();
    std::array<std::ptrdiff_t, 3> st{uc.stride(0), uc.stride(1), uc.stride(2)};
    for (int k = 0; k < n[2]; ++k) {
        for (int j = 0; j < n[1]; ++j) {
            for (int i = 0; i < n[0]; ++i) {
                const std::size_t idx = uc.index(i, j, k);
                const double* p = uc.data() + idx;
                double sum = 0.0;
                for (int d = 0; d < 3; ++d) {
                    const double a = d == c ? p[0] : detail::advecting(f.velocity(d).data() + idx, st[c], st[d], fourth);
                    const double dx = g.spacing[d];
                    double der = 0.0;
                    switch (opt.scheme) {
                    case Scheme::CD2: der = cd2_derivative(p[-st[d]], p[st[d]], dx); break;
                    case Scheme::CD4: der = cd4_derivative(p, st[d], dx, opt.cd4); break;
                    case Scheme::WENO5: der = weno5_derivative(p, st[d], a, dx, opt.weno.c); break;
                    }
                    sum += a * der;
                }
                out(i, j, k) = sum;
            }
        }
    }
}

/**
 * Diffusion D_c = nu_total * Laplacian(u_c) with the fourth-order stencil.
 * nu_total at the face is molecular viscosity (nu, or mu/rho averaged to the
 * face when `two_phase`) plus the face average of nu_t.
 */
inline void diffusive_term(const StaggeredField& f, const GlobalGrid& g, double nu, bool two_phase, int c,
                           Array3& out)
{
    const Array3& uc = f.velocity(c);
    if (uc.ghost() < 2) {
        throw Error(ErrorCode::SchemeStencilOverflow, "diffusion needs two ghost layers");
    }
    const Index3 n = uc.interior();
    const std::ptrdiff_t sc = uc.stride(c);
    std::array<std::ptrdiff_t, 3> st{uc.stride(0), uc.stride(1), uc.stride(2)};
    for (int k = 0; k < n[2]; ++k) {
        for (int j = 0; j < n[1]; ++j) {
            for (int i = 0; i < n[0]; ++i) {
                const std::size_t idx = uc.index(i, j, k);
                const double* p = uc.data() + idx;
                double visc = 0.0;
                if (two_phase) {
                    const double* mu = f.mu.data() + idx;
                    const double* rho = f.rho.data() + idx;
                    visc = (mu[0] + mu[sc]) / (rho[0] + rho[sc]);
                } else {
                    visc = nu;
                }
                const double* nt = f.nu_t.data() + idx;
                visc += 0.5 * (nt[0] + nt[sc]);
                const double lap = d2_fourth(p, st[0], g.spacing[0]) + d2_fourth(p, st[1], g.spacing[1]) +
                                   d2_fourth(p, st[2], g.spacing[2]);
                out(i, j, k) = visc * lap;
            }
        }
    }
}

} // namespace hydro
