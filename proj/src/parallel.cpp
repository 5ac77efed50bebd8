#include "lwopt/parallel.hpp"

#include <atomic>
#include <condition_variable>
#include <exception>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "lwopt/errors.hpp"

namespace lwopt::par {
namespace {

thread_local bool t_in_worker = false;

// One parallel_for invocation. Late-waking workers may still hold a pointer
// to a finished Job; its exhausted counter keeps them away from fn.
struct Job {
  const std::function<void(std::int64_t)>* fn = nullptr;
  std::int64_t size = 0;
  std::atomic<std::int64_t> next{0};
  std::atomic<std::int64_t> pending{0};
  std::exception_ptr error;
  std::mutex error_mu;
};

class Pool {
 public:
  explicit Pool(int extra_workers) {
    for (int i = 0; i < extra_workers; ++i) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  ~Pool() {
    {
      std::unique_lock lock(mu_);
      stop_ = true;
    }
    wake_.notify_all();
    for (auto& t : workers_) t.join();
  }

  int size() const { return static_cast<int>(workers_.size()) + 1; }

  void run(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
    auto job = std::make_shared<Job>();
    job->fn = &fn;
    job->size = n;
    job->pending.store(n);
    {
      std::unique_lock lock(mu_);
      current_ = job;
    }
    wake_.notify_all();
    drain(*job);
    {
      std::unique_lock lock(mu_);
      done_.wait(lock, [&] { return job->pending.load() == 0; });
      if (current_ == job) current_.reset();
    }
    if (job->error) std::rethrow_exception(job->error);
  }

 private:
  void drain(Job& job) {
    for (;;) {
      const std::int64_t i = job.next.fetch_add(1);
      if (i >= job.size) break;
      try {
        (*job.fn)(i);
      } catch (...) {
        std::unique_lock lock(job.error_mu);
        if (!job.error) job.error = std::current_exception();
      }
      if (job.pending.fetch_sub(1) == 1) {
        std::unique_lock lock(mu_);
        done_.notify_all();
      }
    }
  }

  void worker_loop() {
    t_in_worker = true;
    for (;;) {
      std::shared_ptr<Job> job;
      {
        std::unique_lock lock(mu_);
        wake_.wait(lock, [&] { return stop_ || current_ != nullptr; });
        if (stop_) return;
        job = current_;
      }
      if (job) drain(*job);
      // Avoid spinning on an exhausted job that the caller has not yet
      // retired; yield until the slot changes or empties.
      std::unique_lock lock(mu_);
      if (current_ == job) current_.reset();
    }
  }

  std::vector<std::thread> workers_;
  std::mutex mu_;
  std::condition_variable wake_;
  std::condition_variable done_;
  std::shared_ptr<Job> current_;
  bool stop_ = false;
};

std::unique_ptr<Pool>& pool_slot() {
  static std::unique_ptr<Pool> pool;
  return pool;
}

std::mutex& pool_mu() {
  static std::mutex mu;
  return mu;
}

}  // namespace

void set_threads(int n) {
  if (n < 1) throw config_error("thread count must be >= 1");
  std::unique_lock lock(pool_mu());
  auto& pool = pool_slot();
  if (n == 1) {
    pool.reset();
  } else if (!pool || pool->size() != n) {
    pool.reset();
    pool = std::make_unique<Pool>(n - 1);
  }
}

int threads() {
  std::unique_lock lock(pool_mu());
  auto& pool = pool_slot();
  return pool ? pool->size() : 1;
}

void parallel_for(std::int64_t n, const std::function<void(std::int64_t)>& fn) {
  if (n <= 0) return;
  Pool* pool = nullptr;
  if (!t_in_worker) {
    std::unique_lock lock(pool_mu());
    pool = pool_slot().get();
  }
  if (pool == nullptr) {
    for (std::int64_t i = 0; i < n; ++i) fn(i);
    return;
  }
  pool->run(n, fn);
}

}  // namespace lwopt::par
