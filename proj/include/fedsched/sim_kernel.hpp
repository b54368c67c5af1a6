#pragma once

#include <cstdint>
#include <functional>
#include <queue>
#include <unordered_set>
#include <vector>

namespace fedsched {

/// Deterministic discrete-event clock. Events dispatch in (t, seq) order where
/// seq is a global insertion counter, so equal-time events run in the order
/// they were scheduled.
class SimKernel {
 public:
  using Handler = std::function<void()>;

  struct EventHandle {
    std::uint64_t seq = 0;
  };

  explicit SimKernel(double start_t = 0.0) : now_(start_t) {}

  double now() const { return now_; }
  bool idle() const { return queue_.size() == cancelled_.size(); }

  /// Throws std::logic_error when t lies in the past.
  EventHandle schedule(double t, Handler handler);
  /// Cancelling an already dispatched or cancelled event is a no-op.
  void cancel(EventHandle handle);

  /// Dispatches the earliest pending event. Returns false if none is pending.
  bool step();
  /// Dispatches everything and returns the clock, which is the time of the
  /// last dispatched event, or the unchanged clock for an empty queue.
  double run_until_idle();

  std::uint64_t dispatched_count() const { return dispatched_; }

 private:
  struct Event {
    double t;
    std::uint64_t seq;
    Handler handler;
  };
  struct Later {
    bool operator()(const Event& a, const Event& b) const {
      if (a.t != b.t) return a.t > b.t;
      return a.seq > b.seq;
    }
  };

  double now_;
  std::uint64_t next_seq_ = 0;
  std::uint64_t dispatched_ = 0;
  std::priority_queue<Event, std::vector<Event>, Later> queue_;
  std::unordered_set<std::uint64_t> cancelled_;
  std::unordered_set<std::uint64_t> pending_;
};

}  // namespace fedsched
