#include "fodwb/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <mutex>
#include <thread>
#include <vector>

namespace fodwb {

namespace {

int g_threads = 0;
thread_local bool tl_inside_job = false;

int effective_threads() {
  if (g_threads > 0) return g_threads;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Lazily started pool; workers pick up static slices of the current job.
class Pool {
 public:
  static Pool& instance() {
    static Pool pool;
    return pool;
  }

  void run(size_t n, int nslices, const std::function<void(size_t, size_t)>& fn) {
    std::unique_lock<std::mutex> job_lock(job_mutex_);
    ensure_workers(nslices - 1);
    {
      std::lock_guard<std::mutex> lk(mutex_);
      job_ = &fn;
      job_n_ = n;
      job_slices_ = nslices;
      next_slice_.store(0, std::memory_order_relaxed);
      pending_ = workers_.size();
      ++generation_;
    }
    cv_.notify_all();

    for (;;) {
      int slice = next_slice_.fetch_add(1, std::memory_order_relaxed);
      if (slice >= job_slices_) break;
      run_slice(slice);
    }

    std::unique_lock<std::mutex> lk(mutex_);
    done_cv_.wait(lk, [&] { return pending_ == 0; });
    job_ = nullptr;
  }

 private:
  Pool() = default;
  ~Pool() {
    {
      std::lock_guard<std::mutex> lk(mutex_);
      stop_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_) t.join();
  }

  void ensure_workers(int want) {
    std::lock_guard<std::mutex> lk(mutex_);
    while (static_cast<int>(workers_.size()) < want) {
      workers_.emplace_back([this] { worker_loop(); });
    }
  }

  void worker_loop() {
    uint64_t seen = 0;
    for (;;) {
      std::unique_lock<std::mutex> lk(mutex_);
      cv_.wait(lk, [&] { return stop_ || generation_ != seen; });
      if (stop_) return;
      seen = generation_;
      lk.unlock();

      for (;;) {
        int slice = next_slice_.fetch_add(1, std::memory_order_relaxed);
        if (slice >= job_slices_) break;
        run_slice(slice);
      }

      lk.lock();
      if (--pending_ == 0) done_cv_.notify_all();
    }
  }

  void run_slice(int slice) {
    const size_t n = job_n_;
    const size_t k = static_cast<size_t>(job_slices_);
    const size_t begin = n * static_cast<size_t>(slice) / k;
    const size_t end = n * static_cast<size_t>(slice + 1) / k;
    if (begin >= end) return;
    tl_inside_job = true;
    (*job_)(begin, end);
    tl_inside_job = false;
  }

  std::mutex job_mutex_;
  std::mutex mutex_;
  std::condition_variable cv_;
  std::condition_variable done_cv_;
  std::vector<std::thread> workers_;
  const std::function<void(size_t, size_t)>* job_ = nullptr;
  size_t job_n_ = 0;
  int job_slices_ = 0;
  std::atomic<int> next_slice_{0};
  size_t pending_ = 0;
  uint64_t generation_ = 0;
  bool stop_ = false;
};

}  // namespace

void set_threads(int n) { g_threads = n < 0 ? 0 : n; }

int thread_count() { return effective_threads(); }

void parallel_for(size_t n, const std::function<void(size_t, size_t)>& fn) {
  if (n == 0) return;
  const int nslices = std::min<int>(effective_threads(), static_cast<int>(n));
  // Nested calls run inline on the calling worker.
  if (nslices <= 1 || tl_inside_job) {
    fn(0, n);
    return;
  }
  Pool::instance().run(n, nslices, fn);
}

void parallel_for_each(size_t n, const std::function<void(size_t)>& fn) {
  parallel_for(n, [&](size_t begin, size_t end) {
    for (size_t i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace fodwb
