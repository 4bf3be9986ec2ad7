#pragma once

// Fixed-size worker pool for running stage shards. Shards never share
// mutable state, so the pool only needs fork/join semantics. parallel_for
// must not be called from inside a pool task (it would deadlock).

#include <condition_variable>
#include <deque>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace reuse {

class ThreadPool {
 public:
  explicit ThreadPool(int threads) {
    if (threads < 1) threads = 1;
    workers_.reserve(static_cast<std::size_t>(threads));
    for (int i = 0; i < threads; ++i)
      workers_.emplace_back([this] { worker_loop(); });
  }

  ThreadPool(const ThreadPool&) = delete;
  ThreadPool& operator=(const ThreadPool&) = delete;

  ~ThreadPool() {
    {
      std::lock_guard lock(mutex_);
      stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int size() const { return static_cast<int>(workers_.size()); }

  // Runs fn(0..n-1) across the pool, waits for completion, and rethrows the
  // lowest-index exception if any shard failed.
  template <typename Fn>
  void parallel_for(std::size_t n, Fn&& fn) {
    if (n == 0) return;
    struct Join {
      std::mutex m;
      std::condition_variable done;
      std::size_t remaining;
      std::vector<std::exception_ptr> errors;
    };
    auto join = std::make_shared<Join>();
    join->remaining = n;
    join->errors.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      enqueue([join, i, &fn] {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard lock(join->m);
          join->errors[i] = std::current_exception();
        }
        std::lock_guard lock(join->m);
        if (--join->remaining == 0) join->done.notify_all();
      });
    }
    std::unique_lock lock(join->m);
    join->done.wait(lock, [&] { return join->remaining == 0; });
    for (auto& err : join->errors)
      if (err) std::rethrow_exception(err);
  }

 private:
  void enqueue(std::function<void()> task) {
    {
      std::lock_guard lock(mutex_);
      queue_.push_back(std::move(task));
    }
    cv_.notify_one();
  }

  void worker_loop() {
    for (;;) {
      std::function<void()> task;
      {
        std::unique_lock lock(mutex_);
        cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) return;
        task = std::move(queue_.front());
        queue_.pop_front();
      }
      task();
    }
  }

  std::mutex mutex_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> queue_;
  bool stopping_ = false;
  std::vector<std::thread> workers_;
};

}  // namespace reuse
