#pragma once

#include <condition_variable>
#include <cstdlib>
#include <exception>
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "sinet/common.hpp"

namespace sinet {

// Bounded worker pool for data-parallel loops. Work items write to disjoint
// ranges, so results are identical for any pool size; reductions stay inside
// a single item or happen sequentially afterwards. The first exception thrown
// by an item cancels the remaining items and is rethrown on the caller.
class ThreadPool {
public:
    explicit ThreadPool(int threads) {
        if (threads < 1) threads = 1;
        for (int i = 0; i + 1 < threads; ++i) {
            workers_.emplace_back([this] { worker_loop(); });
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mutex_);
            stop_ = true;
        }
        cv_.notify_all();
        for (auto& t : workers_) t.join();
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    int size() const { return static_cast<int>(workers_.size()) + 1; }

    // Runs fn(i) for i in [0, count); the calling thread participates.
    void for_each(std::size_t count, const std::function<void(std::size_t)>& fn) {
        if (count == 0) return;
        if (workers_.empty() || count == 1) {
            for (std::size_t i = 0; i < count; ++i) fn(i);
            return;
        }
        auto state = std::make_shared<JobState>();
        state->fn = &fn;
        state->count = count;
        {
            std::lock_guard<std::mutex> lock(mutex_);
            job_ = state;
            generation_++;
        }
        cv_.notify_all();
        run(*state);
        {
            std::unique_lock<std::mutex> lock(state->m);
            state->cv.wait(lock, [&] { return state->done >= state->claimed; });
        }
        {
            std::lock_guard<std::mutex> lock(mutex_);
            job_ = nullptr;
        }
        if (state->error) std::rethrow_exception(state->error);
    }

private:
    // Shared by value between the caller and workers so that a straggler
    // finishing its last item never touches a dead stack frame.
    struct JobState {
        std::mutex m;
        std::condition_variable cv;
        const std::function<void(std::size_t)>* fn = nullptr;
        std::size_t count = 0;
        std::size_t next = 0;
        std::size_t claimed = 0;
        std::size_t done = 0;
        std::exception_ptr error;
    };

    // Claims and runs items until none remain; returns with no item pending.
    static void run(JobState& s) {
        for (;;) {
            std::size_t i;
            {
                std::lock_guard<std::mutex> lock(s.m);
                if (s.next >= s.count) return;
                i = s.next++;
                ++s.claimed;
            }
            try {
                (*s.fn)(i);
            } catch (...) {
                std::lock_guard<std::mutex> lock(s.m);
                if (!s.error) s.error = std::current_exception();
                s.next = s.count;
            }
            {
                std::lock_guard<std::mutex> lock(s.m);
                ++s.done;
            }
            s.cv.notify_all();
        }
    }

    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            std::shared_ptr<JobState> job;
            {
                std::unique_lock<std::mutex> lock(mutex_);
                cv_.wait(lock, [&] { return stop_ || (job_ && generation_ != seen); });
                if (stop_) return;
                seen = generation_;
                job = job_;
            }
            if (job) run(*job);
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mutex_;
    std::condition_variable cv_;
    std::shared_ptr<JobState> job_;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

// Default worker count: SINET_THREADS env var, else hardware concurrency.
inline int default_thread_count() {
    if (const char* env = std::getenv("SINET_THREADS")) {
        int n = std::atoi(env);
        if (n >= 1) return n;
    }
    unsigned hw = std::thread::hardware_concurrency();
    return hw ? static_cast<int>(hw) : 1;
}

inline ThreadPool& global_pool() {
    static ThreadPool pool(default_thread_count());
    return pool;
}

inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& fn) {
    global_pool().for_each(count, fn);
}

} // namespace sinet
