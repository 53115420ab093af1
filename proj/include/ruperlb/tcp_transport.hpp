#pragma once

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <exception>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "ruperlb/transport.hpp"

namespace ruperlb {

/// Splits "host:port". Throws InvalidArgument on malformed input.
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

/// Rank 0 endpoint over TCP. Listens on an address, accepts one connection
/// per remote process and learns each connection's rank from its first frame.
/// One reader thread per connection feeds a shared inbox.
class TcpCoordinatorTransport final : public CoordinatorTransport {
public:
    TcpCoordinatorTransport(const std::string& address, std::size_t process_count);
    ~TcpCoordinatorTransport() override;

    TcpCoordinatorTransport(const TcpCoordinatorTransport&) = delete;
    TcpCoordinatorTransport& operator=(const TcpCoordinatorTransport&) = delete;

    /// Port actually bound (useful with port 0).
    std::uint16_t port() const noexcept { return port_; }

    /// Blocks until every remote process has connected.
    void accept_peers(Seconds timeout);

    Received receive_any(Seconds timeout) override;
    void send_response(Rank rank, const Response& response) override;
    void request_report(Rank rank) override;
    void wake() override;

private:
    struct Connection;

    void read_loop(Connection& connection);
    void send_frame(Rank rank, const std::vector<std::byte>& bytes);
    void fail(std::exception_ptr error);

    const std::size_t process_count_;
    int listen_fd_ = -1;
    std::uint16_t port_ = 0;

    std::vector<std::unique_ptr<Connection>> connections_;

    std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Message> inbox_;
    std::map<Rank, Connection*> by_rank_;
    std::exception_ptr error_;
    bool woken_ = false;
    double last_ = 0.0;
};

/// Endpoint of a rank k > 0 over TCP.
class TcpWorkerTransport final : public WorkerTransport {
public:
    /// Connects to rank 0, retrying until `connect_timeout` expires.
    TcpWorkerTransport(const std::string& address, Seconds connect_timeout);
    ~TcpWorkerTransport() override;

    TcpWorkerTransport(const TcpWorkerTransport&) = delete;
    TcpWorkerTransport& operator=(const TcpWorkerTransport&) = delete;

    void send(const Message& message) override;
    std::optional<WorkerFrame> receive(Seconds timeout) override;

private:
    int fd_ = -1;
};

} // namespace ruperlb
