#include "ruperlb/tcp_transport.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>

#include <spdlog/spdlog.h>

namespace ruperlb {
namespace {

using steady = std::chrono::steady_clock;

double steady_seconds() {
    return std::chrono::duration<double>(steady::now().time_since_epoch()).count();
}

[[noreturn]] void throw_errno(const std::string& what) {
    throw ProtocolError(what + ": " + std::strerror(errno));
}

/// The peer went away (reset, closed mid-frame). Not a protocol violation.
class ConnectionLost : public ProtocolError {
public:
    using ProtocolError::ProtocolError;
};

void write_all(int fd, const std::vector<std::byte>& bytes) {
    std::size_t sent = 0;
    while (sent < bytes.size()) {
        const ssize_t n = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw_errno("send failed");
        }
        sent += static_cast<std::size_t>(n);
    }
}

/// Reads exactly `out.size()` bytes. Returns false on a clean EOF before the
/// first byte.
bool read_exact(int fd, std::span<std::byte> out) {
    std::size_t got = 0;
    while (got < out.size()) {
        const ssize_t n = ::recv(fd, out.data() + got, out.size() - got, 0);
        if (n == 0) {
            if (got == 0) {
                return false;
            }
            throw ConnectionLost("connection closed mid-frame");
        }
        if (n < 0) {
            if (errno == EINTR) {
                continue;
            }
            throw ConnectionLost(std::string("recv failed: ") + std::strerror(errno));
        }
        got += static_cast<std::size_t>(n);
    }
    return true;
}

/// Reads one frame; nullopt on clean EOF.
std::optional<Frame> read_frame(int fd) {
    std::array<std::byte, wire::kLengthPrefix> prefix{};
    if (!read_exact(fd, prefix)) {
        return std::nullopt;
    }
    const auto length = wire::decode_length(prefix);
    std::vector<std::byte> body(length);
    if (!read_exact(fd, body)) {
        throw ConnectionLost("connection closed mid-frame");
    }
    return wire::decode_body(body);
}

addrinfo* resolve(const std::string& host, std::uint16_t port, bool passive) {
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    hints.ai_flags = passive ? AI_PASSIVE : 0;
    addrinfo* result = nullptr;
    const std::string service = std::to_string(port);
    const int rc = ::getaddrinfo(host.empty() ? nullptr : host.c_str(), service.c_str(), &hints,
                                 &result);
    if (rc != 0) {
        throw ProtocolError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    return result;
}

void set_nodelay(int fd) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
}

} // namespace

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
    const auto colon = address.rfind(':');
    if (colon == std::string::npos || colon + 1 == address.size()) {
        throw InvalidArgument("address must be host:port, got '" + address + "'");
    }
    const std::string host = address.substr(0, colon);
    int port = 0;
    try {
        std::size_t used = 0;
        port = std::stoi(address.substr(colon + 1), &used);
        if (used != address.size() - colon - 1) {
            throw InvalidArgument("");
        }
    } catch (const std::exception&) {
        throw InvalidArgument("invalid port in '" + address + "'");
    }
    if (port < 0 || port > 65535) {
        throw InvalidArgument("port out of range in '" + address + "'");
    }
    return {host, static_cast<std::uint16_t>(port)};
}

// -- coordinator side ----------------------------------------------------------

struct TcpCoordinatorTransport::Connection {
    int fd = -1;
    std::mutex write_mutex;
    std::thread reader;
    std::optional<Rank> rank;
};

TcpCoordinatorTransport::TcpCoordinatorTransport(const std::string& address,
                                                 std::size_t process_count)
    : process_count_(process_count), last_(steady_seconds()) {
    const auto [host, port] = parse_address(address);
    addrinfo* info = resolve(host, port, true);
    listen_fd_ = ::socket(info->ai_family, info->ai_socktype, info->ai_protocol);
    if (listen_fd_ < 0) {
        ::freeaddrinfo(info);
        throw_errno("socket failed");
    }
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    if (::bind(listen_fd_, info->ai_addr, info->ai_addrlen) < 0) {
        const int err = errno;
        ::freeaddrinfo(info);
        ::close(listen_fd_);
        errno = err;
        throw_errno("cannot bind " + address);
    }
    ::freeaddrinfo(info);
    if (::listen(listen_fd_, static_cast<int>(process_count) + 1) < 0) {
        ::close(listen_fd_);
        throw_errno("listen failed");
    }
    sockaddr_in bound{};
    socklen_t len = sizeof(bound);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&bound), &len);
    port_ = ntohs(bound.sin_port);
}

TcpCoordinatorTransport::~TcpCoordinatorTransport() {
    for (auto& c : connections_) {
        ::shutdown(c->fd, SHUT_RDWR);
    }
    for (auto& c : connections_) {
        if (c->reader.joinable()) {
            c->reader.join();
        }
        ::close(c->fd);
    }
    if (listen_fd_ >= 0) {
        ::close(listen_fd_);
    }
}

void TcpCoordinatorTransport::accept_peers(Seconds timeout) {
    const auto deadline = steady::now() + std::chrono::duration<double>(timeout);
    while (connections_.size() + 1 < process_count_) {
        const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - steady::now());
        if (left.count() <= 0) {
            throw ProtocolError("timed out waiting for peers");
        }
        pollfd p{listen_fd_, POLLIN, 0};
        const int rc = ::poll(&p, 1, static_cast<int>(left.count()));
        if (rc < 0 && errno != EINTR) {
            throw_errno("poll failed");
        }
        if (rc <= 0) {
            continue;
        }
        const int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            throw_errno("accept failed");
        }
        set_nodelay(fd);
        auto c = std::make_unique<Connection>();
        c->fd = fd;
        Connection& ref = *c;
        connections_.push_back(std::move(c));
        ref.reader = std::thread([this, &ref] { read_loop(ref); });
    }
}

void TcpCoordinatorTransport::fail(std::exception_ptr error) {
    {
        std::lock_guard lock(mutex_);
        if (!error_) {
            error_ = error;
        }
    }
    cv_.notify_all();
}

void TcpCoordinatorTransport::read_loop(Connection& c) {
    try {
        while (auto frame = read_frame(c.fd)) {
            const auto* message = std::get_if<Message>(&*frame);
            if (message == nullptr) {
                throw ProtocolError("coordinator received a response frame");
            }
            {
                std::lock_guard lock(mutex_);
                if (!c.rank) {
                    if (message->origin == 0 || message->origin >= process_count_ ||
                        by_rank_.count(message->origin) != 0) {
                        throw ProtocolError("invalid or duplicate rank " +
                                            std::to_string(message->origin));
                    }
                    c.rank = message->origin;
                    by_rank_[message->origin] = &c;
                } else if (*c.rank != message->origin) {
                    throw ProtocolError("rank changed on an open connection");
                }
                inbox_.push_back(*message);
            }
            cv_.notify_all();
        }
        spdlog::debug("peer {} closed its connection", c.rank ? static_cast<int>(*c.rank) : -1);
    } catch (const ConnectionLost& e) {
        spdlog::debug("peer {} lost: {}", c.rank ? static_cast<int>(*c.rank) : -1, e.what());
    } catch (const ProtocolError& e) {
        spdlog::error("protocol error from peer: {}", e.what());
        fail(std::current_exception());
    }
}

Received TcpCoordinatorTransport::receive_any(Seconds timeout) {
    Received out;
    {
        std::unique_lock lock(mutex_);
        cv_.wait_for(lock, std::chrono::duration<double>(std::min(timeout, 1e6)),
                     [&] { return !inbox_.empty() || woken_ || error_; });
        if (inbox_.empty() && error_) {
            std::rethrow_exception(error_);
        }
        woken_ = false;
        if (!inbox_.empty()) {
            out.message = inbox_.front();
            inbox_.pop_front();
        }
    }
    const double now = steady_seconds();
    out.elapsed = now - last_;
    last_ = now;
    return out;
}

void TcpCoordinatorTransport::send_frame(Rank rank, const std::vector<std::byte>& bytes) {
    Connection* c = nullptr;
    {
        std::lock_guard lock(mutex_);
        const auto it = by_rank_.find(rank);
        if (it == by_rank_.end()) {
            throw ProtocolError("no connection for rank " + std::to_string(rank));
        }
        c = it->second;
    }
    std::lock_guard lock(c->write_mutex);
    write_all(c->fd, bytes);
}

void TcpCoordinatorTransport::send_response(Rank rank, const Response& response) {
    send_frame(rank, wire::encode(response));
}

void TcpCoordinatorTransport::request_report(Rank rank) {
    send_frame(rank, wire::encode(ReportRequest{}));
}

void TcpCoordinatorTransport::wake() {
    {
        std::lock_guard lock(mutex_);
        woken_ = true;
    }
    cv_.notify_all();
}

// -- worker side ---------------------------------------------------------------

TcpWorkerTransport::TcpWorkerTransport(const std::string& address, Seconds connect_timeout) {
    const auto [host, port] = parse_address(address);
    const auto deadline = steady::now() + std::chrono::duration<double>(connect_timeout);
    while (true) {
        addrinfo* info = resolve(host, port, false);
        fd_ = ::socket(info->ai_family, info->ai_socktype, info->ai_protocol);
        if (fd_ < 0) {
            ::freeaddrinfo(info);
            throw_errno("socket failed");
        }
        const int rc = ::connect(fd_, info->ai_addr, info->ai_addrlen);
        const int err = errno;
        ::freeaddrinfo(info);
        if (rc == 0) {
            break;
        }
        ::close(fd_);
        fd_ = -1;
        if (steady::now() >= deadline) {
            errno = err;
            throw_errno("cannot connect to " + address);
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    set_nodelay(fd_);
}

TcpWorkerTransport::~TcpWorkerTransport() {
    if (fd_ >= 0) {
        ::close(fd_);
    }
}

void TcpWorkerTransport::send(const Message& message) {
    write_all(fd_, wire::encode(message));
}

std::optional<WorkerFrame> TcpWorkerTransport::receive(Seconds timeout) {
    pollfd p{fd_, POLLIN, 0};
    const int ms = static_cast<int>(std::clamp(timeout * 1000.0, 0.0, 1e9));
    const int rc = ::poll(&p, 1, ms);
    if (rc < 0) {
        if (errno == EINTR) {
            return std::nullopt;
        }
        throw_errno("poll failed");
    }
    if (rc == 0) {
        return std::nullopt;
    }
    auto frame = read_frame(fd_);
    if (!frame) {
        throw ProtocolError("coordinator closed the connection");
    }
    if (const auto* r = std::get_if<Response>(&*frame)) {
        return WorkerFrame{*r};
    }
    if (std::holds_alternative<ReportRequest>(*frame)) {
        return WorkerFrame{ReportRequest{}};
    }
    throw ProtocolError("worker received a request frame");
}

} // namespace ruperlb
