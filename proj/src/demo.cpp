#include "ruperlb/demo.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <memory>
#include <mutex>
#include <numeric>
#include <thread>

#include <spdlog/spdlog.h>

#include "ruperlb/clock.hpp"
#include "ruperlb/coordinator.hpp"
#include "ruperlb/task.hpp"
#include "ruperlb/tcp_transport.hpp"

namespace ruperlb {
namespace {

constexpr Iterations kChunk = 4096;

// Wakes blocked demo threads early when assignments change; they still poll.
class Doorbell {
public:
    void ring() {
        {
            std::lock_guard lock(mutex_);
            ++rings_;
        }
        cv_.notify_all();
    }

    std::uint64_t ticket() {
        std::lock_guard lock(mutex_);
        return rings_;
    }

    /// Returns at once if the bell rang since `ticket` was taken.
    void wait(std::uint64_t ticket, Seconds timeout) {
        std::unique_lock lock(mutex_);
        cv_.wait_for(lock, std::chrono::duration<double>(timeout), [&] { return rings_ != ticket; });
    }

private:
    std::mutex mutex_;
    std::condition_variable cv_;
    std::uint64_t rings_ = 0;
};

struct Shared {
    Task& task;
    const Clock& clock;
    Doorbell& doorbell;
    Seconds start;
    Seconds first_report;
};

DemoThreadResult run_thread(const Shared& s, Rank rank, std::size_t j, std::uint64_t seed) {
    auto rng = XorShift64Star(demo_thread_seed(seed, rank, j));
    DemoThreadResult out;
    out.thread = j;
    Seconds next_report = s.start + s.first_report;
    const Seconds poll = s.task.params().poll_interval();
    for (;;) {
        const Iterations assigned = s.task.assigned(j);
        if (out.iterations < assigned) {
            const Iterations n = std::min(kChunk, assigned - out.iterations);
            for (Iterations k = 0; k < n; ++k) {
                const double x = rng.uniform();
                const double y = rng.uniform();
                out.hits += x * x + y * y <= 1.0 ? 1 : 0;
            }
            out.iterations += n;
            const Seconds now = s.clock.now();
            if (now >= next_report) {
                const Seconds dt = s.task.report(j, out.iterations, now);
                if (dt > 0.0) {
                    next_report = now + dt;
                }
            }
            continue;
        }
        const auto ticket = s.doorbell.ticket();
        const Seconds now = s.clock.now();
        const FinishDecision d = s.task.request_finish(j, out.iterations, now);
        switch (d.verdict) {
        case FinishVerdict::NeedReport:
            if (d.next_report > 0.0) {
                next_report = now + d.next_report;
            }
            break;
        case FinishVerdict::Rebalanced:
            if (s.task.assigned(j) <= out.iterations) {
                s.doorbell.wait(ticket, poll);
            }
            break;
        case FinishVerdict::ForwardedToCoordinator:
            s.doorbell.wait(ticket, poll);
            break;
        case FinishVerdict::Granted:
            out.finish = s.clock.now() - s.start;
            return out;
        }
    }
}

void observe_conservation(Task& task, DemoResult& result, Doorbell& doorbell) {
    task.set_checkpoint_observer([&result, &doorbell](const CheckpointRecord& rec,
                                                      std::span<const Worker> workers) {
        Iterations total = 0;
        for (const auto& w : workers) {
            total += w.working() ? w.assigned() : w.done();
        }
        ++result.conservation_checks;
        const bool redistributed = rec.result.outcome == RedistributionOutcome::Redistributed;
        if (redistributed ? total != rec.budget : total < rec.budget) {
            ++result.conservation_violations;
            spdlog::error("conservation: assignments sum to {} against a budget of {}", total, rec.budget);
        }
        doorbell.ring();
    });
}

void run_threads(const Shared& shared, DemoResult& result, const DemoOptions& opt) {
    std::vector<DemoThreadResult> per(opt.threads);
    std::vector<std::thread> pool;
    std::mutex error_mutex;
    std::exception_ptr error;
    for (std::size_t j = 0; j < opt.threads; ++j) {
        pool.emplace_back([&, j] {
            try {
                per[j] = run_thread(shared, opt.rank, j, opt.seed);
            } catch (...) {
                std::lock_guard lock(error_mutex);
                error = std::current_exception();
            }
        });
    }
    for (auto& t : pool) {
        t.join();
    }
    if (error) {
        std::rethrow_exception(error);
    }
    result.threads = std::move(per);
}

void finish_result(DemoResult& result, const Task& task) {
    result.local_budget = task.budget();
    Seconds lo = std::numeric_limits<double>::infinity();
    Seconds hi = 0.0;
    for (const auto& t : result.threads) {
        result.executed += t.iterations;
        result.hits += t.hits;
        lo = std::min(lo, t.finish);
        hi = std::max(hi, t.finish);
    }
    result.spread = result.threads.empty() ? 0.0 : hi - lo;
    result.pi = result.executed > 0
                    ? 4.0 * static_cast<double>(result.hits) / static_cast<double>(result.executed)
                    : 0.0;
}

} // namespace

std::uint64_t demo_thread_seed(std::uint64_t seed, Rank rank, std::size_t thread) noexcept {
    return splitmix64(seed + thread + static_cast<std::uint64_t>(rank) * 1000);
}

bool DemoResult::global_ok(Iterations global_budget) const {
    if (process_assignments.empty()) {
        return local_ok() && executed >= global_budget;
    }
    const Iterations total =
        std::accumulate(process_assignments.begin(), process_assignments.end(), Iterations{0});
    return local_ok() && total >= global_budget;
}

DemoResult run_demo(const DemoOptions& opt) {
    opt.params.validate();
    if (opt.threads < 1) {
        throw InvalidArgument("demo needs at least one thread");
    }
    if (opt.listen && opt.connect) {
        throw InvalidArgument("--listen and --connect are exclusive");
    }
    if (opt.procs < 1) {
        throw InvalidArgument("process count must be >= 1");
    }
    if (opt.budget < static_cast<Iterations>(opt.threads * opt.procs)) {
        throw InvalidArgument("budget must be at least one iteration per thread");
    }
    if (opt.connect && (opt.rank == 0 || opt.rank >= opt.procs)) {
        throw InvalidArgument("--connect needs a rank in [1, procs)");
    }

    SteadyClock clock;
    Task task(opt.params, clock);
    Doorbell doorbell;
    DemoResult result;
    result.rank = opt.rank;
    result.procs = opt.procs;
    observe_conservation(task, result, doorbell);
    task.set_budget_hook([&doorbell] { doorbell.ring(); });
    const Seconds first_report = opt.params.checkpoint_interval / 6.0;

    if (opt.connect) {
        TcpWorkerTransport transport(*opt.connect, opt.connect_timeout);
        WorkerMonitor monitor(opt.rank, task, opt.threads, transport, clock);
        const Iterations start = monitor.handshake(opt.connect_timeout);
        spdlog::info("rank {} starts with {} iterations", opt.rank, start);
        const Shared shared{task, clock, doorbell, clock.now(), first_report};
        std::exception_ptr monitor_error;
        std::thread mon([&] {
            try {
                monitor.run();
            } catch (...) {
                monitor_error = std::current_exception();
                // Nobody will answer finish requests any more.
                task.install_budget(task.budget(), clock.now(), true);
            }
            doorbell.ring();
        });
        try {
            run_threads(shared, result, opt);
        } catch (...) {
            mon.join();
            throw;
        }
        mon.join();
        if (monitor_error) {
            std::rethrow_exception(monitor_error);
        }
        finish_result(result, task);
        return result;
    }

    if (opt.procs > 1 && !opt.listen) {
        throw InvalidArgument("a multi-process run needs --listen on rank 0");
    }

    if (!opt.listen) {
        task.start(opt.threads, opt.budget, clock.now());
        const Shared shared{task, clock, doorbell, clock.now(), first_report};
        run_threads(shared, result, opt);
        finish_result(result, task);
        return result;
    }

    TcpCoordinatorTransport transport(*opt.listen, opt.procs);
    spdlog::info("rank 0 listening on port {}", transport.port());
    transport.accept_peers(opt.connect_timeout);
    Coordinator coordinator(opt.procs, opt.budget, opt.params);
    CoordinatorMonitor monitor(coordinator, transport, clock, task);
    task.set_finish_request_hook([&transport] { transport.wake(); });
    monitor.start_local(opt.threads);
    // Like a parallel job launch: nobody computes before every rank has joined.
    const Seconds deadline = clock.now() + opt.connect_timeout;
    while (!coordinator.all_started()) {
        if (clock.now() > deadline) {
            throw ProtocolError("timed out waiting for start petitions");
        }
        const Received r = transport.receive_any(monitor.timeout());
        monitor.step(r.message, r.elapsed);
    }
    const Shared shared{task, clock, doorbell, clock.now(), first_report};

    std::exception_ptr monitor_error;
    std::thread mon([&] {
        try {
            monitor.run();
        } catch (...) {
            monitor_error = std::current_exception();
        }
        doorbell.ring();
    });
    try {
        run_threads(shared, result, opt);
    } catch (...) {
        mon.join();
        throw;
    }
    mon.join();
    if (monitor_error) {
        std::rethrow_exception(monitor_error);
    }
    finish_result(result, task);
    for (Rank r = 0; r < opt.procs; ++r) {
        result.process_assignments.push_back(coordinator.guess_worker(r).assigned());
    }
    return result;
}

} // namespace ruperlb
