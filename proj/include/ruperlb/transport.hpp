#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <variant>
#include <vector>

#include "ruperlb/clock.hpp"
#include "ruperlb/protocol.hpp"

namespace ruperlb {

/// Result of a coordinator wait: the message (if any) and the time spent
/// since the previous wait returned.
struct Received {
    std::optional<Message> message;
    Seconds elapsed = 0.0;
};

/// Rank 0 side of the protocol. Used by the coordinator monitor thread only.
class CoordinatorTransport {
public:
    virtual ~CoordinatorTransport() = default;

    /// Waits up to `timeout` seconds for a petition from any process.
    virtual Received receive_any(Seconds timeout) = 0;

    virtual void send_response(Rank rank, const Response& response) = 0;
    virtual void request_report(Rank rank) = 0;

    /// Interrupts a pending receive_any without a message. Safe from any thread.
    virtual void wake() = 0;
};

using WorkerFrame = std::variant<Response, ReportRequest>;

/// Rank k > 0 side of the protocol. Used by that process's monitor thread only.
class WorkerTransport {
public:
    virtual ~WorkerTransport() = default;

    virtual void send(const Message& message) = 0;

    /// Waits up to `timeout` seconds for a frame from the coordinator.
    virtual std::optional<WorkerFrame> receive(Seconds timeout) = 0;
};

/// Where a queued frame is headed.
struct Endpoint {
    bool coordinator = false;
    Rank rank = 0; ///< destination rank when not the coordinator

    friend bool operator==(const Endpoint&, const Endpoint&) = default;
};

/// In-process network with ordered, reliable per-pair queues.
///
/// In blocking mode receives wait on a condition variable for real time. In
/// virtual mode they never block: the caller (the simulator) advances the clock
/// and the delivery hook tells it which endpoint has something to read.
class InMemoryNetwork {
public:
    enum class Mode { Blocking, Virtual };

    InMemoryNetwork(std::size_t process_count, const Clock& clock, Mode mode = Mode::Blocking);
    ~InMemoryNetwork();

    InMemoryNetwork(const InMemoryNetwork&) = delete;
    InMemoryNetwork& operator=(const InMemoryNetwork&) = delete;

    /// Rank 0 endpoint.
    CoordinatorTransport& coordinator();

    /// Endpoint of rank `rank` (1 .. process_count-1).
    WorkerTransport& worker(Rank rank);

    /// Called after a frame is queued, with the destination. Not called under
    /// the network lock.
    void set_delivery_hook(std::function<void(Endpoint)> hook);

    /// Frames waiting at an endpoint.
    std::size_t pending(Endpoint endpoint) const;

    std::size_t process_count() const noexcept { return process_count_; }

private:
    class CoordinatorSide;
    class WorkerSide;

    void deliver(Endpoint to);

    const std::size_t process_count_;
    const Clock& clock_;
    const Mode mode_;

    mutable std::mutex mutex_;
    std::condition_variable cv_;
    std::deque<Message> inbox_;                     // to rank 0, arrival order
    std::vector<std::deque<WorkerFrame>> outboxes_; // to each rank
    bool woken_ = false;
    std::function<void(Endpoint)> hook_;

    std::unique_ptr<CoordinatorSide> coordinator_;
    std::vector<std::unique_ptr<WorkerSide>> workers_;
};

} // namespace ruperlb
