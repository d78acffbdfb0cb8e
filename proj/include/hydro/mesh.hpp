#pragma once

/**
 * @file mesh.hpp
 * @brief Global Cartesian grid, balanced domain decomposition and ghosted
 *        storage for the staggered (MAC) field layout.
 *
 * Staggering convention: u(i,j,k) sits on the x-face between cells i and i+1,
 * v(i,j,k) on the y-face between j and j+1, w(i,j,k) on the z-face between k
 * and k+1. Pressure, level set and material fields sit at cell centres. All
 * arrays of a subdomain share the same ghosted shape (local dims + 2 n_g per
 * direction), stored contiguously with x fastest.
 */

#include "hydro/error.hpp"

#include <algorithm>
#include <array>
#include <cstring>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace hydro {

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

struct GlobalGrid
{
    Index3 dims{};    // cells per direction
    Vec3 spacing{};   // uniform spacing per direction
    Vec3 origin{};    // coordinate of the first cell corner

    static GlobalGrid uniform(const Index3& dims, const Vec3& extent, const Vec3& origin = {0.0, 0.0, 0.0})
    {
        GlobalGrid g;
        g.dims = dims;
        g.origin = origin;
        for (int d = 0; d < 3; ++d) {
            g.spacing[d] = dims[d] > 0 ? extent[d] / dims[d] : 0.0;
        }
        g.validate();
        return g;
    }

    void validate() const
    {
        for (int d = 0; d < 3; ++d) {
            if (dims[d] < 4) {
                throw Error(ErrorCode::InvalidArgument, "grid dimension must be >= 4");
            }
            if (!(spacing[d] > 0.0)) {
                throw Error(ErrorCode::InvalidArgument, "grid spacing must be positive");
            }
        }
    }

    double extent(int d) const { return spacing[d] * dims[d]; }
    long long cell_count() const { return 1LL * dims[0] * dims[1] * dims[2]; }
    double max_spacing() const { return std::max({spacing[0], spacing[1], spacing[2]}); }
    double min_spacing() const { return std::min({spacing[0], spacing[1], spacing[2]}); }
    /// LES filter width: geometric mean of the spacings.
    double filter_width() const { return std::cbrt(spacing[0] * spacing[1] * spacing[2]); }
};

enum class Face : int { XLow = 0, XHigh, YLow, YHigh, ZLow, ZHigh };

constexpr int axis_of(Face f) { return static_cast<int>(f) / 2; }
constexpr bool is_high(Face f) { return (static_cast<int>(f) % 2) == 1; }
constexpr Face face_of(int axis, bool high) { return static_cast<Face>(2 * axis + (high ? 1 : 0)); }
constexpr Face opposite(Face f) { return face_of(axis_of(f), !is_high(f)); }

inline constexpr std::array<Face, 6> kAllFaces{Face::XLow, Face::XHigh, Face::YLow,
                                               Face::YHigh, Face::ZLow, Face::ZHigh};

enum class BoundaryKind { Periodic, NoSlipWall, SlipWall, MovingLid, Inflow, Outflow };

inline const char* to_string(BoundaryKind k)
{
    switch (k) {
    case BoundaryKind::Periodic: return "periodic";
    case BoundaryKind::NoSlipWall: return "noslip";
    case BoundaryKind::SlipWall: return "slip";
    case BoundaryKind::MovingLid: return "lid";
    case BoundaryKind::Inflow: return "inflow";
    case BoundaryKind::Outflow: return "outflow";
    }
    return "unknown";
}

using BoundaryMap = std::array<BoundaryKind, 6>;

inline BoundaryMap all_periodic()
{
    BoundaryMap m;
    m.fill(BoundaryKind::Periodic);
    return m;
}

/// Neighbor across one subdomain face: a rank (possibly this one, through a
/// periodic wrap) or a physical boundary.
struct Neighbor
{
    int rank = -1;
    BoundaryKind kind = BoundaryKind::Periodic;

    bool exchanges() const { return rank >= 0; }
};

struct SubdomainSpec
{
    int rank = 0;
    Index3 coords{};      // position in the worker topology
    Index3 local_dims{};  // owned cells per direction
    Index3 offset{};      // global index of the first owned cell
    std::array<Neighbor, 6> neighbors{};
    int ghost_width = 0;

    const Neighbor& neighbor(Face f) const { return neighbors[static_cast<int>(f)]; }
    bool physical(Face f) const { return !neighbor(f).exchanges(); }
};

class DecompositionPlan
{
public:
    DecompositionPlan() = default;
    DecompositionPlan(GlobalGrid grid, Index3 topology, int ghost_width, BoundaryMap boundaries,
                      std::vector<SubdomainSpec> subdomains)
        : grid_(grid), topology_(topology), ghost_width_(ghost_width), boundaries_(boundaries),
          subdomains_(std::move(subdomains))
    {
    }

    const GlobalGrid& grid() const { return grid_; }
    const Index3& topology() const { return topology_; }
    int ghost_width() const { return ghost_width_; }
    const BoundaryMap& boundaries() const { return boundaries_; }
    BoundaryKind boundary(Face f) const { return boundaries_[static_cast<int>(f)]; }
    bool periodic(int axis) const { return boundary(face_of(axis, false)) == BoundaryKind::Periodic; }

    int worker_count() const { return static_cast<int>(subdomains_.size()); }
    const SubdomainSpec& subdomain(int rank) const { return subdomains_.at(static_cast<std::size_t>(rank)); }
    const std::vector<SubdomainSpec>& subdomains() const { return subdomains_; }
    Index3 local_dims() const { return subdomains_.front().local_dims; }

    int rank_of(const Index3& c) const { return c[0] + topology_[0] * (c[1] + topology_[1] * c[2]); }

private:
    GlobalGrid grid_{};
    Index3 topology_{1, 1, 1};
    int ghost_width_ = 0;
    BoundaryMap boundaries_{};
    std::vector<SubdomainSpec> subdomains_;
};

/**
 * Splits the grid into t_x*t_y*t_z equal boxes. Ranks are numbered with the
 * x coordinate fastest. Faces on a periodic global boundary wrap to the
 * opposite subdomain (which is the same rank when the topology count is 1).
 */
inline DecompositionPlan build_decomposition(const GlobalGrid& grid, const Index3& topology, int ghost_width,
                                             const BoundaryMap& boundaries = all_periodic())
{
    grid.validate();
    if (ghost_width < 1) {
        throw Error(ErrorCode::InvalidArgument, "ghost width must be >= 1");
    }
    Index3 local{};
    for (int d = 0; d < 3; ++d) {
        if (topology[d] < 1) {
            throw Error(ErrorCode::InvalidArgument, "topology counts must be >= 1");
        }
        if (grid.dims[d] % topology[d] != 0) {
            throw Error(ErrorCode::NonDivisible, "dimension " + std::to_string(grid.dims[d]) +
                                                     " not divisible by " + std::to_string(topology[d]));
        }
        local[d] = grid.dims[d] / topology[d];
        if (local[d] < 2 * ghost_width) {
            throw Error(ErrorCode::GhostTooWide, "local dimension " + std::to_string(local[d]) +
                                                     " smaller than twice the ghost width");
        }
        const bool lo_periodic = boundaries[2 * d] == BoundaryKind::Periodic;
        const bool hi_periodic = boundaries[2 * d + 1] == BoundaryKind::Periodic;
        if (lo_periodic != hi_periodic) {
            throw Error(ErrorCode::InvalidArgument, "periodic boundaries must come in pairs");
        }
    }

    std::vector<SubdomainSpec> subs;
    const int n = topology[0] * topology[1] * topology[2];
    subs.reserve(static_cast<std::size_t>(n));
    auto rank_of = [&](Index3 c) { return c[0] + topology[0] * (c[1] + topology[1] * c[2]); };
    for (int r = 0; r < n; ++r) {
        SubdomainSpec s;
        s.rank = r;
        s.coords = {r % topology[0], (r / topology[0]) % topology[1], r / (topology[0] * topology[1])};
        s.local_dims = local;
        s.ghost_width = ghost_width;
        for (int d = 0; d < 3; ++d) {
            s.offset[d] = s.coords[d] * local[d];
        }
        for (Face f : kAllFaces) {
            const int d = axis_of(f);
            const bool high = is_high(f);
            Neighbor nb;
            nb.kind = boundaries[static_cast<int>(f)];
            Index3 c = s.coords;
            c[d] += high ? 1 : -1;
            if (c[d] >= 0 && c[d] < topology[d]) {
                nb.rank = rank_of(c);
                nb.kind = BoundaryKind::Periodic; // interior face: plain exchange
            } else if (nb.kind == BoundaryKind::Periodic) {
                c[d] = (c[d] + topology[d]) % topology[d];
                nb.rank = rank_of(c);
            }
            s.neighbors[static_cast<int>(f)] = nb;
        }
        subs.push_back(s);
    }
    return DecompositionPlan(grid, topology, ghost_width, boundaries, std::move(subs));
}

/// Ghost cells per field component crossing one face: n_g times the two
/// owned face dimensions.
inline long long message_cell_count(const DecompositionPlan& plan, Face face)
{
    const Index3 l = plan.local_dims();
    const int d = axis_of(face);
    return 1LL * plan.ghost_width() * l[(d + 1) % 3] * l[(d + 2) % 3];
}

enum class Location { Cell, XFace, YFace, ZFace };

inline Location face_location(int axis) { return static_cast<Location>(axis + 1); }

/// Half-cell offset of a staggered location along axis d (0 or 1/2).
inline double stagger_shift(Location loc, int d)
{
    return (loc != Location::Cell && static_cast<int>(loc) - 1 == d) ? 0.5 : 0.0;
}

/// Ghosted 3-D scalar array, x fastest. Indices run from -ghost to n+ghost-1.
class Array3
{
public:
    Array3() = default;
    Array3(const Index3& interior, int ghost, double value = 0.0)
        : interior_(interior), ghost_(ghost)
    {
        for (int d = 0; d < 3; ++d) {
            extent_[d] = interior[d] + 2 * ghost;
        }
        data_.assign(static_cast<std::size_t>(extent_[0]) * extent_[1] * extent_[2], value);
    }

    const Index3& interior() const { return interior_; }
    const Index3& extent() const { return extent_; }
    int ghost() const { return ghost_; }
    int n(int d) const { return interior_[d]; }

    std::size_t index(int i, int j, int k) const
    {
        return static_cast<std::size_t>(i + ghost_) +
               static_cast<std::size_t>(extent_[0]) *
                   (static_cast<std::size_t>(j + ghost_) + static_cast<std::size_t>(extent_[1]) * (k + ghost_));
    }
    std::ptrdiff_t stride(int d) const
    {
        return d == 0 ? 1 : (d == 1 ? extent_[0] : static_cast<std::ptrdiff_t>(extent_[0]) * extent_[1]);
    }

    double& operator()(int i, int j, int k) { return data_[index(i, j, k)]; }
    double operator()(int i, int j, int k) const { return data_[index(i, j, k)]; }
    double& at(const Index3& c) { return data_[index(c[0], c[1], c[2])]; }
    double at(const Index3& c) const { return data_[index(c[0], c[1], c[2])]; }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::size_t size() const { return data_.size(); }

    void fill(double v) { std::fill(data_.begin(), data_.end(), v); }

    template <class F>
    void for_each_interior(F&& f) const
    {
        for (int k = 0; k < interior_[2]; ++k)
            for (int j = 0; j < interior_[1]; ++j)
                for (int i = 0; i < interior_[0]; ++i)
                    f(i, j, k);
    }

    bool operator==(const Array3&) const = default;

private:
    Index3 interior_{};
    int ghost_ = 0;
    Index3 extent_{};
    std::vector<double> data_;
};

/// Same shape and the same bytes in every stored value.
inline bool bit_identical(const Array3& a, const Array3& b)
{
    return a.interior() == b.interior() && a.ghost() == b.ghost() &&
           std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

enum class FieldTag : int { U = 0, V, W, P, Phi, Rho, Mu, NuT };

inline Location location_of(FieldTag t)
{
    switch (t) {
    case FieldTag::U: return Location::XFace;
    case FieldTag::V: return Location::YFace;
    case FieldTag::W: return Location::ZFace;
    default: return Location::Cell;
    }
}

/// All per-subdomain solution arrays. Velocities on faces, scalars at centres.
struct StaggeredField
{
    Array3 u, v, w;
    Array3 p;
    Array3 phi;
    Array3 nu_t;
    Array3 rho, mu;

    StaggeredField() = default;
    StaggeredField(const Index3& local, int ghost)
        : u(local, ghost), v(local, ghost), w(local, ghost), p(local, ghost), phi(local, ghost),
          nu_t(local, ghost), rho(local, ghost, 1.0), mu(local, ghost)
    {
    }

    Array3& velocity(int c) { return c == 0 ? u : (c == 1 ? v : w); }
    const Array3& velocity(int c) const { return c == 0 ? u : (c == 1 ? v : w); }

    Array3& get(FieldTag t)
    {
        switch (t) {
        case FieldTag::U: return u;
        case FieldTag::V: return v;
        case FieldTag::W: return w;
        case FieldTag::P: return p;
        case FieldTag::Phi: return phi;
        case FieldTag::Rho: return rho;
        case FieldTag::Mu: return mu;
        case FieldTag::NuT: return nu_t;
        }
        return p;
    }
};

/// Physical coordinate of local sample (i,j,k) of a field at location loc.
inline Vec3 sample_position(const GlobalGrid& g, const SubdomainSpec& s, Location loc, int i, int j, int k)
{
    const Index3 idx{i, j, k};
    Vec3 x{};
    for (int d = 0; d < 3; ++d) {
        x[d] = g.origin[d] + (s.offset[d] + idx[d] + 0.5 + stagger_shift(loc, d)) * g.spacing[d];
    }
    return x;
}

} // namespace hydro
