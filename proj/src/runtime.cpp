// SPDX-License-Identifier: Apache-2.0
#include "flowtree/runtime.hpp"

#include <algorithm>
#include <cassert>
#include <utility>

namespace flowtree {

// ---------------------------------------------------------------------------
// CancelToken

struct CancelToken::State {
  std::atomic<bool> cancelled{false};
  std::mutex mu;
  std::map<std::uint64_t, std::function<void()>> callbacks;
  std::uint64_t next_handle = 1;
};

CancelToken::CancelToken() : state_(std::make_shared<State>()) {}

bool CancelToken::cancelled() const { return state_->cancelled.load(std::memory_order_acquire); }

void CancelToken::request_cancel() const {
  std::map<std::uint64_t, std::function<void()>> fire;
  {
    std::lock_guard lk(state_->mu);
    if (state_->cancelled.exchange(true, std::memory_order_acq_rel)) return;
    fire.swap(state_->callbacks);
  }
  for (auto& [_, fn] : fire) fn();
}

std::uint64_t CancelToken::on_cancel(std::function<void()> fn) const {
  {
    std::lock_guard lk(state_->mu);
    if (!state_->cancelled.load(std::memory_order_acquire)) {
      auto handle = state_->next_handle++;
      state_->callbacks.emplace(handle, std::move(fn));
      return handle;
    }
  }
  fn();  // already cancelled
  return 0;
}

void CancelToken::remove_callback(std::uint64_t handle) const {
  if (handle == 0) return;
  std::lock_guard lk(state_->mu);
  state_->callbacks.erase(handle);
}

// ---------------------------------------------------------------------------
// Runtime

Runtime::Runtime(Mode mode, int offload_threads)
    : mode_(mode),
      offload_thread_count_(std::max(1, offload_threads)),
      real_start_(std::chrono::steady_clock::now()) {}

Runtime::~Runtime() {
  {
    std::lock_guard lk(offload_mu_);
    quit_workers_ = true;
  }
  offload_cv_.notify_all();
  for (auto& t : workers_) t.join();
}

TimePoint Runtime::now() const {
  if (mode_ == Mode::Virtual) {
    std::lock_guard lk(mu_);
    return TimePoint{virtual_now_ms_};
  }
  auto elapsed = std::chrono::steady_clock::now() - real_start_;
  return std::chrono::duration_cast<Duration>(elapsed);
}

void Runtime::post(std::function<void()> fn) {
  {
    std::lock_guard lk(mu_);
    ready_.push_back(std::move(fn));
  }
  cv_.notify_one();
}

Runtime::TimerId Runtime::schedule_at(TimePoint when, std::function<void()> fn) {
  std::lock_guard lk(mu_);
  std::int64_t now_ms = mode_ == Mode::Virtual
                            ? virtual_now_ms_
                            : std::chrono::duration_cast<Duration>(
                                  std::chrono::steady_clock::now() - real_start_)
                                  .count();
  TimerKey key{std::max(when.count(), now_ms), next_seq_++};
  TimerId id = next_timer_id_++;
  timers_.emplace(key, std::make_pair(id, std::move(fn)));
  timer_index_.emplace(id, key);
  cv_.notify_one();
  return id;
}

Runtime::TimerId Runtime::schedule_after(Duration delay, std::function<void()> fn) {
  return schedule_at(now() + delay, std::move(fn));
}

bool Runtime::cancel_timer(TimerId id) {
  std::lock_guard lk(mu_);
  auto it = timer_index_.find(id);
  if (it == timer_index_.end()) return false;
  timers_.erase(it->second);
  timer_index_.erase(it);
  return true;
}

void Runtime::offload(std::function<void()> work, std::function<void()> done) {
  if (mode_ == Mode::Virtual) {
    work();
    post(std::move(done));
    return;
  }
  ensure_workers();
  {
    std::lock_guard lk(mu_);
    ++inflight_offloads_;
  }
  {
    std::lock_guard lk(offload_mu_);
    offload_queue_.emplace_back(std::move(work), std::move(done));
  }
  offload_cv_.notify_one();
}

void Runtime::run() {
  if (mode_ == Mode::Virtual) {
    run_virtual();
  } else {
    run_real();
  }
  std::lock_guard lk(mu_);
  stopped_ = false;  // allow reuse after a stop
}

void Runtime::run_virtual() {
  for (;;) {
    std::function<void()> fn;
    {
      std::lock_guard lk(mu_);
      if (!ready_.empty()) {
        fn = std::move(ready_.front());
        ready_.pop_front();
      } else if (stopped_ || timers_.empty()) {
        return;
      } else {
        auto it = timers_.begin();
        virtual_now_ms_ = std::max(virtual_now_ms_, it->first.when_ms);
        fn = std::move(it->second.second);
        timer_index_.erase(it->second.first);
        timers_.erase(it);
      }
    }
    fn();
  }
}

void Runtime::run_real() {
  std::unique_lock lk(mu_);
  for (;;) {
    if (!ready_.empty()) {
      auto fn = std::move(ready_.front());
      ready_.pop_front();
      lk.unlock();
      fn();
      lk.lock();
      continue;
    }
    if (stopped_) return;
    auto elapsed = std::chrono::duration_cast<Duration>(std::chrono::steady_clock::now() -
                                                        real_start_)
                       .count();
    if (!timers_.empty() && timers_.begin()->first.when_ms <= elapsed) {
      auto it = timers_.begin();
      auto fn = std::move(it->second.second);
      timer_index_.erase(it->second.first);
      timers_.erase(it);
      lk.unlock();
      fn();
      lk.lock();
      continue;
    }
    if (timers_.empty() && inflight_offloads_ == 0) return;
    if (timers_.empty()) {
      cv_.wait(lk);
    } else {
      // The wait is a hint; deadlines are re-checked against the steady
      // clock on wake. Waiting on a system_clock point keeps the wait on
      // pthread_cond_timedwait, which thread sanitizers intercept.
      auto remaining = real_start_ + Duration{timers_.begin()->first.when_ms} -
                       std::chrono::steady_clock::now();
      if (remaining < std::chrono::nanoseconds::zero()) {
        remaining = std::chrono::nanoseconds::zero();
      }
      cv_.wait_until(lk, std::chrono::system_clock::now() + remaining);
    }
  }
}

void Runtime::stop() {
  {
    std::lock_guard lk(mu_);
    stopped_ = true;
  }
  cv_.notify_all();
}

std::size_t Runtime::pending_timers() const {
  std::lock_guard lk(mu_);
  return timers_.size();
}

void Runtime::ensure_workers() {
  {
    std::lock_guard lk(mu_);
    if (workers_started_) return;
    workers_started_ = true;
  }
  workers_.reserve(static_cast<std::size_t>(offload_thread_count_));
  for (int i = 0; i < offload_thread_count_; ++i) {
    workers_.emplace_back([this] { worker_loop(); });
  }
}

void Runtime::worker_loop() {
  for (;;) {
    std::pair<std::function<void()>, std::function<void()>> job;
    {
      std::unique_lock lk(offload_mu_);
      offload_cv_.wait(lk, [this] { return quit_workers_ || !offload_queue_.empty(); });
      if (offload_queue_.empty()) return;  // quitting
      job = std::move(offload_queue_.front());
      offload_queue_.pop_front();
    }
    job.first();
    {
      // The completion callback rides the ready queue; the in-flight count
      // drops atomically with the enqueue so the loop never exits between
      // the two.
      std::lock_guard lk(mu_);
      ready_.push_back(std::move(job.second));
      --inflight_offloads_;
    }
    cv_.notify_one();
  }
}

}  // namespace flowtree
