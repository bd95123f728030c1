// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "flowtree/time.hpp"

namespace flowtree {

/// Cooperative cancellation signal shared between the task pool, the
/// orchestrator, and executors. Cancellation is monotone; callbacks
/// registered after cancellation fire immediately.
class CancelToken {
 public:
  CancelToken();

  bool cancelled() const;
  void request_cancel() const;

  /// Registers a callback fired once on cancellation. Returns a handle
  /// usable with remove_callback. Fires inline if already cancelled.
  std::uint64_t on_cancel(std::function<void()> fn) const;
  void remove_callback(std::uint64_t handle) const;

 private:
  struct State;
  std::shared_ptr<State> state_;
};

/// Single-threaded event loop over a pluggable clock.
///
/// Virtual mode: time advances only to the next scheduled timer, never
/// backwards, and everything runs on the caller's thread — runs are
/// fully deterministic given identical inputs. Real mode: the same loop
/// waits on wall-clock deadlines and accepts cross-thread posts;
/// blocking work is offloaded to a small worker pool whose completions
/// are delivered back on the loop thread.
class Runtime {
 public:
  enum class Mode { Virtual, Real };
  using TimerId = std::uint64_t;

  explicit Runtime(Mode mode, int offload_threads = 8);
  ~Runtime();

  Runtime(const Runtime&) = delete;
  Runtime& operator=(const Runtime&) = delete;

  Mode mode() const { return mode_; }
  bool is_virtual() const { return mode_ == Mode::Virtual; }

  /// Milliseconds since run start.
  TimePoint now() const;

  /// Enqueues fn to run as soon as possible on the loop thread.
  void post(std::function<void()> fn);

  /// Schedules fn at an absolute time (clamped to now if in the past).
  TimerId schedule_at(TimePoint when, std::function<void()> fn);
  TimerId schedule_after(Duration delay, std::function<void()> fn);

  /// Returns true if the timer was still pending.
  bool cancel_timer(TimerId id);

  /// Runs blocking work off-loop and posts `done` back to the loop.
  /// In virtual mode the work runs inline (nothing may block there).
  void offload(std::function<void()> work, std::function<void()> done);

  /// Processes work until everything drains or stop() is called.
  void run();

  /// Makes run() return once the ready queue drains; pending timers are
  /// abandoned.
  void stop();

  std::size_t pending_timers() const;

 private:
  struct TimerKey {
    std::int64_t when_ms;
    std::uint64_t seq;
    friend auto operator<=>(const TimerKey&, const TimerKey&) = default;
  };

  void run_virtual();
  void run_real();
  void ensure_workers();
  void worker_loop();

  Mode mode_;
  int offload_thread_count_;

  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<std::function<void()>> ready_;
  std::map<TimerKey, std::pair<TimerId, std::function<void()>>> timers_;
  std::map<TimerId, TimerKey> timer_index_;
  std::uint64_t next_seq_ = 1;
  TimerId next_timer_id_ = 1;
  bool stopped_ = false;

  std::int64_t virtual_now_ms_ = 0;
  std::chrono::steady_clock::time_point real_start_;

  // Offload pool (real mode only); the job queue has its own lock so
  // worker wakeups never contend with the loop's timer waits.
  std::vector<std::thread> workers_;
  bool workers_started_ = false;
  std::mutex offload_mu_;
  std::deque<std::pair<std::function<void()>, std::function<void()>>> offload_queue_;
  std::condition_variable offload_cv_;
  int inflight_offloads_ = 0;  // guarded by mu_
  bool quit_workers_ = false;  // guarded by offload_mu_
};

}  // namespace flowtree
