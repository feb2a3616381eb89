#pragma once

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <cstdlib>
#ifdef __linux__
#include <sched.h>
#endif
#include <functional>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

namespace nsforge {

// Worker cap: NSFORGE_THREADS env var, default the cores this process may
// actually use (cgroup/affinity-aware, unlike hardware_concurrency).
inline int max_threads() {
    static const int cached = [] {
        if (const char* env = std::getenv("NSFORGE_THREADS")) {
            int n = std::atoi(env);
            if (n >= 1) return n;
        }
#ifdef __linux__
        cpu_set_t set;
        if (sched_getaffinity(0, sizeof(set), &set) == 0) {
            int n = CPU_COUNT(&set);
            if (n >= 1) return n;
        }
#endif
        unsigned hw = std::thread::hardware_concurrency();
        return hw ? static_cast<int>(hw) : 1;
    }();
    return cached;
}

namespace detail {

// Persistent pool; kernels run thousands of small parallel regions per
// second, so per-region thread spawning is not an option.
class ThreadPool {
public:
    static ThreadPool& instance() {
        static ThreadPool pool(max_threads() - 1);
        return pool;
    }

    void run(int64_t n, const std::function<void(int64_t)>& f) {
        auto job = std::make_shared<Job>();
        job->f = &f;
        job->n = n;
        job->chunk = std::max<int64_t>(1, n / ((workers_.size() + 1) * 4));
        {
            std::lock_guard<std::mutex> lk(m_);
            cur_ = job;
        }
        cv_start_.notify_all();
        process(*job);
        {
            std::unique_lock<std::mutex> lk(m_);
            cv_done_.wait(lk, [&] {
                return job->next.load() >= job->n && job->inflight.load() == 0;
            });
            if (cur_ == job) cur_.reset();
        }
    }

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lk(m_);
            stop_ = true;
        }
        cv_start_.notify_all();
        for (auto& w : workers_) w.join();
    }

private:
    struct Job {
        const std::function<void(int64_t)>* f = nullptr;
        int64_t n = 0;
        int64_t chunk = 1;
        std::atomic<int64_t> next{0};
        std::atomic<int> inflight{0};
    };

    explicit ThreadPool(int n_workers) {
        for (int i = 0; i < n_workers; ++i)
            workers_.emplace_back([this] { worker_loop(); });
    }

    static void process(Job& job) {
        for (;;) {
            int64_t i0 = job.next.fetch_add(job.chunk);
            if (i0 >= job.n) break;
            int64_t i1 = std::min(job.n, i0 + job.chunk);
            for (int64_t i = i0; i < i1; ++i) (*job.f)(i);
        }
    }

    void worker_loop() {
        for (;;) {
            std::shared_ptr<Job> job;
            {
                std::unique_lock<std::mutex> lk(m_);
                cv_start_.wait(lk, [&] {
                    return stop_ || (cur_ && cur_->next.load() < cur_->n);
                });
                if (stop_) return;
                job = cur_;
                job->inflight.fetch_add(1);
            }
            process(*job);
            {
                std::lock_guard<std::mutex> lk(m_);
                job->inflight.fetch_sub(1);
            }
            cv_done_.notify_all();
        }
    }

    std::mutex m_;
    std::condition_variable cv_start_, cv_done_;
    std::shared_ptr<Job> cur_;
    bool stop_ = false;
    std::vector<std::thread> workers_;
};

}  // namespace detail

// Runs f(i) for i in [0, n). Work items must write to disjoint locations and
// keep a fixed summation order within each item, so the result is
// bit-identical for any thread count. total_work is an optional flop-count
// hint; small regions run inline where the pool handoff would dominate.
template <typename F>
void parallel_for(int64_t n, int64_t total_work, F&& f) {
    if (n <= 0) return;
    constexpr int64_t kSerialBelow = 1 << 19;
    if (max_threads() <= 1 || n == 1 ||
        (total_work >= 0 && total_work < kSerialBelow)) {
        for (int64_t i = 0; i < n; ++i) f(i);
        return;
    }
    std::function<void(int64_t)> fn = std::forward<F>(f);
    detail::ThreadPool::instance().run(n, fn);
}

template <typename F>
void parallel_for(int64_t n, F&& f) {
    parallel_for(n, -1, std::forward<F>(f));
}

}  // namespace nsforge
