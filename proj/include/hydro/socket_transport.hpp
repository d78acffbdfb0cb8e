#pragma once

/**
 * @file socket_transport.hpp
 * @brief TCP transport for multi-process runs, one process per rank.
 *
 * Every pair of ranks shares one connection: the higher rank connects to
 * the lower one and announces itself with a u32 LE rank. Frames use the
 * layout documented in exchange.hpp; one reader thread per connection
 * delivers them into a local mailbox.
 */

#include "hydro/exchange.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

namespace hydro {

struct Endpoint
{
    std::string host;
    int port = 0;
};

/// "host:port,host:port,..." in rank order.
inline std::vector<Endpoint> parse_addresses(const std::string& list)
{
    std::vector<Endpoint> out;
    std::stringstream ss(list);
    std::string item;
    while (std::getline(ss, item, ',')) {
        const auto colon = item.rfind(':');
        if (colon == std::string::npos) {
            throw Error(ErrorCode::InvalidArgument, "address '" + item + "' lacks a port");
        }
        Endpoint e;
        e.host = item.substr(0, colon);
        try {
            e.port = std::stoi(item.substr(colon + 1));
        } catch (const std::exception&) {
            throw Error(ErrorCode::InvalidArgument, "bad port in '" + item + "'");
        }
        out.push_back(e);
    }
    if (out.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty address list");
    }
    return out;
}

namespace detail {

inline void write_all(int fd, const void* data, std::size_t n)
{
    const auto* p = static_cast<const std::uint8_t*>(data);
    while (n > 0) {
        const ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
        if (w <= 0) {
            if (w < 0 && errno == EINTR) continue;
            throw Error(ErrorCode::TransportFailure, std::string("socket write failed: ") + std::strerror(errno));
        }
        p += w;
        n -= static_cast<std::size_t>(w);
    }
}

/// Returns false on orderly shutdown before any byte was read.
inline bool read_all(int fd, void* data, std::size_t n)
{
    auto* p = static_cast<std::uint8_t*>(data);
    std::size_t got = 0;
    while (got < n) {
        const ssize_t r = ::recv(fd, p + got, n - got, 0);
        if (r == 0) {
            if (got == 0) return false;
            throw Error(ErrorCode::TransportFailure, "connection closed mid-frame");
        }
        if (r < 0) {
            if (errno == EINTR) continue;
            throw Error(ErrorCode::TransportFailure, std::string("socket read failed: ") + std::strerror(errno));
        }
        got += static_cast<std::size_t>(r);
    }
    return true;
}

inline sockaddr_in resolve(const Endpoint& e)
{
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(e.host.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
        throw Error(ErrorCode::TransportFailure, "cannot resolve host " + e.host);
    }
    sockaddr_in a{};
    std::memcpy(&a, res->ai_addr, sizeof(a));
    ::freeaddrinfo(res);
    a.sin_port = htons(static_cast<std::uint16_t>(e.port));
    return a;
}

} // namespace detail

class SocketTransport final : public Transport
{
public:
    SocketTransport(std::vector<Endpoint> peers, int rank, std::chrono::seconds timeout = std::chrono::seconds(600))
        : peers_(std::move(peers)), rank_(rank), timeout_(timeout), fds_(peers_.size(), -1),
          send_locks_(peers_.size())
    {
        if (rank_ < 0 || rank_ >= static_cast<int>(peers_.size())) {
            throw Error(ErrorCode::InvalidArgument, "rank outside the address list");
        }
        connect_mesh();
        for (int r = 0; r < size(); ++r) {
            if (r != rank_) {
                readers_.emplace_back([this, r] { reader(r); });
            }
        }
    }

    ~SocketTransport() override
    {
        stopping_ = true;
        for (int fd : fds_) {
            if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
        }
        for (auto& t : readers_) {
            if (t.joinable()) t.join();
        }
        for (int fd : fds_) {
            if (fd >= 0) ::close(fd);
        }
    }

    SocketTransport(const SocketTransport&) = delete;
    SocketTransport& operator=(const SocketTransport&) = delete;

    int rank() const override { return rank_; }
    int size() const override { return static_cast<int>(peers_.size()); }

    void send(int dest, std::uint32_t tag, std::span<const double> payload) override
    {
        if (dest < 0 || dest >= size() || fds_[static_cast<std::size_t>(dest)] < 0) {
            throw Error(ErrorCode::TransportFailure, "peer unreachable: rank " + std::to_string(dest));
        }
        const std::vector<std::uint8_t> frame = encode_frame(tag, payload);
        std::lock_guard lock(send_locks_[static_cast<std::size_t>(dest)]);
        detail::write_all(fds_[static_cast<std::size_t>(dest)], frame.data(), frame.size());
    }

    std::vector<double> recv(int source, std::uint32_t tag) override
    {
        return inbox_.take(source, tag, timeout_);
    }

private:
    void connect_mesh()
    {
        const int n = size();
        int listener = -1;
        if (rank_ < n - 1) {
            listener = ::socket(AF_INET, SOCK_STREAM, 0);
            int one = 1;
            ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
            sockaddr_in a{};
            a.sin_family = AF_INET;
            a.sin_addr.s_addr = htonl(INADDR_ANY);
            a.sin_port = htons(static_cast<std::uint16_t>(peers_[static_cast<std::size_t>(rank_)].port));
            if (::bind(listener, reinterpret_cast<sockaddr*>(&a), sizeof(a)) != 0 || ::listen(listener, n) != 0) {
                ::close(listener);
                throw Error(ErrorCode::TransportFailure, std::string("cannot listen: ") + std::strerror(errno));
            }
        }
        // Connect to every lower rank, retrying while it starts up.
        for (int r = 0; r < rank_; ++r) {
            const sockaddr_in addr = detail::resolve(peers_[static_cast<std::size_t>(r)]);
            const auto deadline = std::chrono::steady_clock::now() + timeout_;
            int fd = -1;
            for (;;) {
                fd = ::socket(AF_INET, SOCK_STREAM, 0);
                if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) == 0) break;
                ::close(fd);
                fd = -1;
                if (std::chrono::steady_clock::now() > deadline) {
                    throw Error(ErrorCode::TransportFailure, "peer unreachable: rank " + std::to_string(r));
                }
                std::this_thread::sleep_for(std::chrono::milliseconds(50));
            }
            set_nodelay(fd);
            std::uint8_t hello[4];
            for (int b = 0; b < 4; ++b) hello[b] = static_cast<std::uint8_t>((rank_ >> (8 * b)) & 0xFF);
            detail::write_all(fd, hello, 4);
            fds_[static_cast<std::size_t>(r)] = fd;
        }
        for (int accepted = 0; accepted < n - 1 - rank_; ++accepted) {
            const int fd = ::accept(listener, nullptr, nullptr);
            if (fd < 0) {
                ::close(listener);
                throw Error(ErrorCode::TransportFailure, "accept failed");
            }
            set_nodelay(fd);
            std::uint8_t hello[4];
            if (!detail::read_all(fd, hello, 4)) {
                throw Error(ErrorCode::TransportFailure, "peer closed during handshake");
            }
            const int peer = static_cast<int>(detail::get_u32(hello));
            if (peer <= rank_ || peer >= n || fds_[static_cast<std::size_t>(peer)] >= 0) {
                throw Error(ErrorCode::TransportFailure, "unexpected handshake from rank " + std::to_string(peer));
            }
            fds_[static_cast<std::size_t>(peer)] = fd;
        }
        if (listener >= 0) ::close(listener);
    }

    static void set_nodelay(int fd)
    {
        int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    }

    void reader(int peer)
    {
        const int fd = fds_[static_cast<std::size_t>(peer)];
        try {
            for (;;) {
                std::uint8_t header[12];
                if (!detail::read_all(fd, header, 12)) break;
                const FrameHeader h = decode_frame_header(header);
                std::vector<std::uint8_t> body(h.payload_bytes);
                if (h.payload_bytes > 0 && !detail::read_all(fd, body.data(), body.size())) {
                    throw Error(ErrorCode::TransportFailure, "connection closed mid-frame");
                }
                inbox_.post(tag_source(h.tag), h.tag, decode_payload(body));
            }
        } catch (const std::exception& e) {
            if (!stopping_) inbox_.abort(e.what());
            return;
        }
        if (!stopping_) inbox_.abort("rank " + std::to_string(peer) + " disconnected");
    }

    std::vector<Endpoint> peers_;
    int rank_;
    std::chrono::seconds timeout_;
    std::vector<int> fds_;
    std::vector<std::mutex> send_locks_;
    Mailbox inbox_;
    std::vector<std::thread> readers_;
    std::atomic<bool> stopping_{false};
};

} // namespace hydro
