#pragma once

/**
 * @file exchange.hpp
 * @brief Message passing between subdomain workers: transports, halo
 *        exchange and deterministic collective reductions.
 *
 * A Transport moves tagged arrays of doubles between ranks. Messages between
 * one (source, tag) pair are delivered in send order. Two transports exist:
 * the in-process hub below (one worker thread per rank) and the TCP socket
 * transport in socket_transport.hpp, which uses the framing defined here.
 *
 * Wire frame: [magic 0x48594452, 4 bytes LE][tag u32 LE][payload bytes u32 LE]
 *             [payload: binary64 LE values].
 * Tag layout: bits 31..16 source rank, bits 15..4 channel, bits 3..0 face.
 */

#include "hydro/error.hpp"
#include "hydro/exact_sum.hpp"
#include "hydro/mesh.hpp"

#include <bit>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <cstring>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <span>
#include <utility>
#include <vector>

namespace hydro {

inline constexpr std::uint32_t kFrameMagic = 0x48594452u; // "HYDR"

namespace channel {
// Field tags occupy channels 0..7 (FieldTag values).
inline constexpr int kMultigridBase = 64; // + level
inline constexpr int kScratch = 128;      // ad-hoc scalar arrays
inline constexpr int kGather = 0xFFD;
inline constexpr int kBroadcast = 0xFFE;
inline constexpr int kReduce = 0xFFF;
} // namespace channel

constexpr std::uint32_t make_tag(int chan, int face, int source_rank)
{
    return (static_cast<std::uint32_t>(source_rank & 0xFFFF) << 16) |
           (static_cast<std::uint32_t>(chan & 0xFFF) << 4) | static_cast<std::uint32_t>(face & 0xF);
}
constexpr int tag_source(std::uint32_t tag) { return static_cast<int>(tag >> 16); }
constexpr int tag_channel(std::uint32_t tag) { return static_cast<int>((tag >> 4) & 0xFFF); }
constexpr int tag_face(std::uint32_t tag) { return static_cast<int>(tag & 0xF); }

struct HaloMessage
{
    int source = 0;
    int destination = 0;
    FieldTag field = FieldTag::U;
    Face face = Face::XLow;
    std::vector<double> payload;
};

namespace detail {

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v)
{
    for (int b = 0; b < 4; ++b) {
        out.push_back(static_cast<std::uint8_t>((v >> (8 * b)) & 0xFF));
    }
}

inline std::uint32_t get_u32(const std::uint8_t* p)
{
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

} // namespace detail

inline std::vector<std::uint8_t> encode_frame(std::uint32_t tag, std::span<const double> payload)
{
    std::vector<std::uint8_t> out;
    out.reserve(12 + payload.size() * 8);
    detail::put_u32(out, kFrameMagic);
    detail::put_u32(out, tag);
    detail::put_u32(out, static_cast<std::uint32_t>(payload.size() * 8));
    for (double x : payload) {
        const auto bits = std::bit_cast<std::uint64_t>(x);
        for (int b = 0; b < 8; ++b) {
            out.push_back(static_cast<std::uint8_t>((bits >> (8 * b)) & 0xFF));
        }
    }
    return out;
}

struct FrameHeader
{
    std::uint32_t tag = 0;
    std::uint32_t payload_bytes = 0;
};

inline FrameHeader decode_frame_header(std::span<const std::uint8_t> header)
{
    if (header.size() < 12) {
        throw Error(ErrorCode::TransportFailure, "truncated frame header");
    }
    if (detail::get_u32(header.data()) != kFrameMagic) {
        throw Error(ErrorCode::TransportFailure, "bad frame magic");
    }
    FrameHeader h{detail::get_u32(header.data() + 4), detail::get_u32(header.data() + 8)};
    if (h.payload_bytes % 8 != 0) {
        throw Error(ErrorCode::TransportFailure, "payload length not a multiple of 8");
    }
    return h;
}

inline std::vector<double> decode_payload(std::span<const std::uint8_t> bytes)
{
    if (bytes.size() % 8 != 0) {
        throw Error(ErrorCode::TransportFailure, "payload length not a multiple of 8");
    }
    std::vector<double> out(bytes.size() / 8);
    for (std::size_t n = 0; n < out.size(); ++n) {
        std::uint64_t bits = 0;
        for (int b = 0; b < 8; ++b) {
            bits |= static_cast<std::uint64_t>(bytes[8 * n + static_cast<std::size_t>(b)]) << (8 * b);
        }
        out[n] = std::bit_cast<double>(bits);
    }
    return out;
}

/// Decodes one complete frame; returns (tag, payload).
inline std::pair<std::uint32_t, std::vector<double>> decode_frame(std::span<const std::uint8_t> frame)
{
    const FrameHeader h = decode_frame_header(frame);
    if (frame.size() != 12 + static_cast<std::size_t>(h.payload_bytes)) {
        throw Error(ErrorCode::TransportFailure, "frame length does not match header");
    }
    return {h.tag, decode_payload(frame.subspan(12))};
}

/// Blocking multi-queue keyed by (source, tag).
class Mailbox
{
public:
    void post(int source, std::uint32_t tag, std::vector<double> payload)
    {
        {
            std::lock_guard lock(mutex_);
            queues_[{source, tag}].push_back(std::move(payload));
        }
        cv_.notify_all();
    }

    std::vector<double> take(int source, std::uint32_t tag, std::chrono::seconds timeout)
    {
        std::unique_lock lock(mutex_);
        const auto key = std::make_pair(source, tag);
        auto ready = [&] {
            auto it = queues_.find(key);
            return it != queues_.end() && !it->second.empty();
        };
        // A message that already arrived is delivered even after an abort,
        // so a peer that finished and hung up does not fail the last receive.
        const bool ok = cv_.wait_for(lock, timeout, [&] { return aborted_ || ready(); });
        if (!ready() && aborted_) {
            throw Error(ErrorCode::TransportFailure, "transport aborted: " + reason_);
        }
        if (!ok) {
            throw Error(ErrorCode::TransportFailure, "timed out waiting for rank " + std::to_string(source));
        }
        auto& q = queues_[key];
        std::vector<double> out = std::move(q.front());
        q.pop_front();
        return out;
    }

    void abort(const std::string& reason)
    {
        {
            std::lock_guard lock(mutex_);
            aborted_ = true;
            reason_ = reason;
        }
        cv_.notify_all();
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::map<std::pair<int, std::uint32_t>, std::deque<std::vector<double>>> queues_;
    bool aborted_ = false;
    std::string reason_;
};

class Transport
{
public:
    virtual ~Transport() = default;
    virtual int rank() const = 0;
    virtual int size() const = 0;
    virtual void send(int dest, std::uint32_t tag, std::span<const double> payload) = 0;
    virtual std::vector<double> recv(int source, std::uint32_t tag) = 0;
};

/// Shared state of the in-process transport: one mailbox per rank.
class InprocHub
{
public:
    explicit InprocHub(int size, std::chrono::seconds timeout = std::chrono::seconds(600))
        : boxes_(static_cast<std::size_t>(size)), timeout_(timeout)
    {
        for (auto& b : boxes_) {
            b = std::make_unique<Mailbox>();
        }
    }

    int size() const { return static_cast<int>(boxes_.size()); }
    Mailbox& box(int rank) { return *boxes_.at(static_cast<std::size_t>(rank)); }
    std::chrono::seconds timeout() const { return timeout_; }

    void abort(const std::string& reason)
    {
        for (auto& b : boxes_) {
            b->abort(reason);
        }
    }

private:
    std::vector<std::unique_ptr<Mailbox>> boxes_;
    std::chrono::seconds timeout_;
};

class InprocTransport final : public Transport
{
public:
    InprocTransport(InprocHub& hub, int rank) : hub_(hub), rank_(rank) {}

    int rank() const override { return rank_; }
    int size() const override { return hub_.size(); }

    void send(int dest, std::uint32_t tag, std::span<const double> payload) override
    {
        if (dest < 0 || dest >= hub_.size()) {
            throw Error(ErrorCode::TransportFailure, "peer unreachable: rank " + std::to_string(dest));
        }
        hub_.box(dest).post(rank_, tag, std::vector<double>(payload.begin(), payload.end()));
    }

    std::vector<double> recv(int source, std::uint32_t tag) override
    {
        return hub_.box(rank_).take(source, tag, hub_.timeout());
    }

private:
    InprocHub& hub_;
    int rank_;
};

enum class ReductionKind { Max, Sum };

struct ReductionRequest
{
    ReductionKind kind = ReductionKind::Max;
    double value = 0.0;
};

/// Time and volume of communication seen by one rank.
struct CommStats
{
    double seconds = 0.0;
    long long messages = 0;
    long long doubles = 0;
};

/**
 * Per-rank communication endpoint. Calls on one rank are strictly
 * sequential; collectives must be entered by every rank in the same order.
 */
class Communicator
{
public:
    explicit Communicator(Transport& transport) : transport_(&transport) {}

    int rank() const { return transport_->rank(); }
    int size() const { return transport_->size(); }

    void send(int dest, std::uint32_t tag, std::span<const double> payload)
    {
        ++stats_.messages;
        stats_.doubles += static_cast<long long>(payload.size());
        if (dest == rank()) {
            self_[tag].emplace_back(payload.begin(), payload.end());
            return;
        }
        transport_->send(dest, tag, payload);
    }

    std::vector<double> recv(int source, std::uint32_t tag)
    {
        if (source == rank()) {
            auto& q = self_[tag];
            if (q.empty()) {
                throw Error(ErrorCode::TransportFailure, "receive from self with no pending message");
            }
            std::vector<double> out = std::move(q.front());
            q.pop_front();
            return out;
        }
        return transport_->recv(source, tag);
    }

    /// Rank-ascending pairwise tree reduce to rank 0, then tree broadcast.
    double allreduce(const ReductionRequest& req)
    {
        Timer t(*this);
        std::vector<double> v{req.value};
        tree_reduce(v, req.kind);
        return v[0];
    }

    double allreduce_max(double v) { return allreduce({ReductionKind::Max, v}); }
    double allreduce_sum(double v) { return allreduce({ReductionKind::Sum, v}); }

    /// Element-wise tree reduction of a vector.
    void allreduce(std::span<double> values, ReductionKind kind)
    {
        Timer t(*this);
        tree_reduce(values, kind);
    }

    /// Decomposition-independent global sum.
    double exact_sum(ExactAccumulator local)
    {
        auto d = local.digits();
        allreduce(std::span<double>(d), ReductionKind::Sum);
        return ExactAccumulator::from_digits(d).value();
    }

    void barrier()
    {
        double dummy = 0.0;
        allreduce(std::span<double>(&dummy, 1), ReductionKind::Sum);
    }

    const CommStats& stats() const { return stats_; }
    void reset_stats() { stats_ = {}; }

    /// Accumulates wall time into stats().seconds; nested timers count once.
    class Timer
    {
    public:
        explicit Timer(Communicator& c) : c_(c), outer_(c.timer_depth_++ == 0),
                                          start_(std::chrono::steady_clock::now()) {}
        ~Timer()
        {
            --c_.timer_depth_;
            if (outer_) {
                c_.stats_.seconds +=
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
            }
        }
        Timer(const Timer&) = delete;
        Timer& operator=(const Timer&) = delete;

    private:
        Communicator& c_;
        bool outer_;
        std::chrono::steady_clock::time_point start_;
    };

private:
    void tree_reduce(std::span<double> values, ReductionKind kind)
    {
        const int n = size();
        const int r = rank();
        if (n == 1) {
            return;
        }
        for (int s = 1; s < n; s *= 2) {
            if (r & s) {
                send(r - s, make_tag(channel::kReduce, 0, r), values);
                break;
            }
            if (r + s < n) {
                const std::vector<double> other = recv(r + s, make_tag(channel::kReduce, 0, r + s));
                if (other.size() != values.size()) {
                    throw Error(ErrorCode::TransportFailure, "reduction length mismatch");
                }
                for (std::size_t i = 0; i < values.size(); ++i) {
                    values[i] = kind == ReductionKind::Max ? std::max(values[i], other[i]) : values[i] + other[i];
                }
            }
        }
        int low_bit = 1;
        if (r != 0) {
            low_bit = r & -r;
            const std::vector<double> root = recv(r - low_bit, make_tag(channel::kBroadcast, 0, r - low_bit));
            std::copy(root.begin(), root.end(), values.begin());
        } else {
            while (low_bit < n) {
                low_bit *= 2;
            }
        }
        for (int s = low_bit / 2; s >= 1; s /= 2) {
            if (r + s < n) {
                send(r + s, make_tag(channel::kBroadcast, 0, r), values);
            }
        }
    }

    Transport* transport_;
    std::map<std::uint32_t, std::deque<std::vector<double>>> self_;
    CommStats stats_;
    int timer_depth_ = 0;
};

/// Called after each axis pass of a halo exchange; used to fill physical
/// boundary ghosts so that edge and corner ghosts propagate correctly.
using AxisHook = std::function<void(int axis)>;

struct Box3
{
    Index3 lo{};
    Index3 hi{}; // exclusive
    long long count() const { return 1LL * (hi[0] - lo[0]) * (hi[1] - lo[1]) * (hi[2] - lo[2]); }
};

/// Packs a box in (i fastest, then j, then k) order.
inline void pack_box(const Array3& a, const Box3& b, std::vector<double>& out)
{
    out.clear();
    out.reserve(static_cast<std::size_t>(b.count()));
    for (int k = b.lo[2]; k < b.hi[2]; ++k)
        for (int j = b.lo[1]; j < b.hi[1]; ++j)
            for (int i = b.lo[0]; i < b.hi[0]; ++i)
                out.push_back(a(i, j, k));
}

inline void unpack_box(Array3& a, const Box3& b, std::span<const double> in)
{
    if (static_cast<long long>(in.size()) != b.count()) {
        throw Error(ErrorCode::TransportFailure, "halo payload length mismatch");
    }
    std::size_t n = 0;
    for (int k = b.lo[2]; k < b.hi[2]; ++k)
        for (int j = b.lo[1]; j < b.hi[1]; ++j)
            for (int i = b.lo[0]; i < b.hi[0]; ++i)
                a(i, j, k) = in[n++];
}

/// Box of owned layers sent across `face` (layer == false) or the ghost
/// layers filled from it (layer == true). Axes before `axis` span ghosts so
/// edges and corners travel with the later passes.
inline Box3 halo_box(const Array3& a, Face face, bool ghost_side)
{
    const int axis = axis_of(face);
    const int g = a.ghost();
    Box3 b;
    for (int e = 0; e < 3; ++e) {
        if (e < axis) {
            b.lo[e] = -g;
            b.hi[e] = a.n(e) + g;
        } else {
            b.lo[e] = 0;
            b.hi[e] = a.n(e);
        }
    }
    const int n = a.n(axis);
    if (is_high(face)) {
        b.lo[axis] = ghost_side ? n : n - g;
        b.hi[axis] = ghost_side ? n + g : n;
    } else {
        b.lo[axis] = ghost_side ? -g : 0;
        b.hi[axis] = ghost_side ? 0 : g;
    }
    return b;
}

/**
 * Fills every ghost layer adjacent to a neighbor with that neighbor's owned
 * values, axis by axis (x, y, z). Ghosts on physical boundaries are left to
 * `after_axis`. Each rank posts all sends of an axis before its receives;
 * the transports buffer, so no ordering deadlock is possible.
 */
inline void exchange_halos(Array3& a, int chan, const SubdomainSpec& sub, Communicator& comm,
                           const AxisHook& after_axis = {})
{
    Communicator::Timer timer(comm);
    if (a.ghost() > 0) {
        for (int d = 0; d < 3; ++d) {
            if (a.n(d) < a.ghost()) {
                throw Error(ErrorCode::GhostTooWide, "local extent smaller than ghost width");
            }
        }
    }
    std::vector<double> buf;
    for (int axis = 0; axis < 3; ++axis) {
        for (bool high : {false, true}) {
            const Face f = face_of(axis, high);
            const Neighbor& nb = sub.neighbor(f);
            if (!nb.exchanges() || a.ghost() == 0) {
                continue;
            }
            pack_box(a, halo_box(a, f, false), buf);
            comm.send(nb.rank, make_tag(chan, static_cast<int>(f), sub.rank), buf);
        }
        for (bool high : {false, true}) {
            const Face f = face_of(axis, high);
            const Neighbor& nb = sub.neighbor(f);
            if (!nb.exchanges() || a.ghost() == 0) {
                continue;
            }
            // The neighbor sent from its face that touches ours.
            const std::vector<double> in =
                comm.recv(nb.rank, make_tag(chan, static_cast<int>(opposite(f)), nb.rank));
            unpack_box(a, halo_box(a, f, true), in);
        }
        if (after_axis) {
            after_axis(axis);
        }
    }
}

inline void exchange_halos(Array3& a, FieldTag field, const SubdomainSpec& sub, Communicator& comm,
                           const AxisHook& after_axis = {})
{
    exchange_halos(a, static_cast<int>(field), sub, comm, after_axis);
}

/// Collects the owned cells of every rank into one ghost-free global array
/// on `root`; other ranks get an empty array.
inline Array3 gather_interior(const Array3& a, const DecompositionPlan& plan, Communicator& comm, int root = 0)
{
    const SubdomainSpec& me = plan.subdomain(comm.rank());
    std::vector<double> buf;
    const Box3 own{{0, 0, 0}, a.interior()};
    if (comm.rank() != root) {
        pack_box(a, own, buf);
        comm.send(root, make_tag(channel::kGather, 0, comm.rank()), buf);
        return {};
    }
    Array3 global(plan.grid().dims, 0);
    for (int r = 0; r < comm.size(); ++r) {
        const SubdomainSpec& s = plan.subdomain(r);
        if (r == me.rank) {
            pack_box(a, own, buf);
        } else {
            buf = comm.recv(r, make_tag(channel::kGather, 0, r));
        }
        Box3 dst{s.offset, {s.offset[0] + s.local_dims[0], s.offset[1] + s.local_dims[1],
                            s.offset[2] + s.local_dims[2]}};
        unpack_box(global, dst, buf);
    }
    return global;
}

/// What one worker needs to take part in collective field operations.
struct RankContext
{
    const DecompositionPlan* plan = nullptr;
    const SubdomainSpec* sub = nullptr;
    Communicator* comm = nullptr;

    const GlobalGrid& grid() const { return plan->grid(); }
};

} // namespace hydro
