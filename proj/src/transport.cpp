#include "ruperlb/transport.hpp"

#include <chrono>
#include <string>

namespace ruperlb {

class InMemoryNetwork::CoordinatorSide final : public CoordinatorTransport {
public:
    explicit CoordinatorSide(InMemoryNetwork& net) : net_(net), last_(net.clock_.now()) {}

    Received receive_any(Seconds timeout) override {
        Received out;
        {
            std::unique_lock lock(net_.mutex_);
            if (net_.mode_ == Mode::Blocking) {
                net_.cv_.wait_for(lock, std::chrono::duration<double>(timeout),
                                  [&] { return !net_.inbox_.empty() || net_.woken_; });
            }
            net_.woken_ = false;
            if (!net_.inbox_.empty()) {
                out.message = net_.inbox_.front();
                net_.inbox_.pop_front();
            }
        }
        const Seconds now = net_.clock_.now();
        out.elapsed = now - last_;
        last_ = now;
        return out;
    }

    void send_response(Rank rank, const Response& response) override {
        push(rank, response);
    }

    void request_report(Rank rank) override { push(rank, ReportRequest{}); }

    void wake() override {
        {
            std::lock_guard lock(net_.mutex_);
            net_.woken_ = true;
        }
        net_.cv_.notify_all();
        net_.deliver({true, 0});
    }

private:
    void push(Rank rank, WorkerFrame frame) {
        if (rank == 0 || rank >= net_.process_count_) {
            throw ProtocolError("no remote endpoint for rank " + std::to_string(rank));
        }
        {
            std::lock_guard lock(net_.mutex_);
            net_.outboxes_[rank].push_back(std::move(frame));
        }
        net_.cv_.notify_all();
        net_.deliver({false, rank});
    }

    InMemoryNetwork& net_;
    Seconds last_;
};

class InMemoryNetwork::WorkerSide final : public WorkerTransport {
public:
    WorkerSide(InMemoryNetwork& net, Rank rank) : net_(net), rank_(rank) {}

    void send(const Message& message) override {
        if (message.origin != rank_) {
            throw ProtocolError("message origin does not match the sending endpoint");
        }
        {
            std::lock_guard lock(net_.mutex_);
            net_.inbox_.push_back(message);
        }
        net_.cv_.notify_all();
        net_.deliver({true, 0});
    }

    std::optional<WorkerFrame> receive(Seconds timeout) override {
        std::unique_lock lock(net_.mutex_);
        auto& queue = net_.outboxes_[rank_];
        if (net_.mode_ == Mode::Blocking) {
            net_.cv_.wait_for(lock, std::chrono::duration<double>(timeout),
                              [&] { return !queue.empty(); });
        }
        if (queue.empty()) {
            return std::nullopt;
        }
        WorkerFrame frame = std::move(queue.front());
        queue.pop_front();
        return frame;
    }

private:
    InMemoryNetwork& net_;
    Rank rank_;
};

InMemoryNetwork::InMemoryNetwork(std::size_t process_count, const Clock& clock, Mode mode)
    : process_count_(process_count), clock_(clock), mode_(mode), outboxes_(process_count) {
    if (process_count == 0) {
        throw InvalidArgument("network needs at least one process");
    }
    coordinator_ = std::make_unique<CoordinatorSide>(*this);
    workers_.resize(process_count);
    for (Rank r = 1; r < process_count; ++r) {
        workers_[r] = std::make_unique<WorkerSide>(*this, r);
    }
}

InMemoryNetwork::~InMemoryNetwork() = default;

CoordinatorTransport& InMemoryNetwork::coordinator() { return *coordinator_; }

WorkerTransport& InMemoryNetwork::worker(Rank rank) {
    if (rank == 0 || rank >= process_count_) {
        throw InvalidArgument("no worker endpoint for rank " + std::to_string(rank));
    }
    return *workers_[rank];
}

void InMemoryNetwork::set_delivery_hook(std::function<void(Endpoint)> hook) {
    std::lock_guard lock(mutex_);
    hook_ = std::move(hook);
}

std::size_t InMemoryNetwork::pending(Endpoint endpoint) const {
    std::lock_guard lock(mutex_);
    return endpoint.coordinator ? inbox_.size() : outboxes_.at(endpoint.rank).size();
}

void InMemoryNetwork::deliver(Endpoint to) {
    std::function<void(Endpoint)> hook;
    {
        std::lock_guard lock(mutex_);
        hook = hook_;
    }
    if (hook) {
        hook(to);
    }
}

} // namespace ruperlb
