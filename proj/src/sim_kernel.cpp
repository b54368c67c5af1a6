#include "fedsched/sim_kernel.hpp"

#include <stdexcept>
#include <string>
#include <utility>

namespace fedsched {

SimKernel::EventHandle SimKernel::schedule(double t, Handler handler) {
  if (t < now_) {
    throw std::logic_error("event scheduled in the past: t=" + std::to_string(t) +
                           " now=" + std::to_string(now_));
  }
  const std::uint64_t seq = next_seq_++;
  queue_.push(Event{t, seq, std::move(handler)});
  pending_.insert(seq);
  return EventHandle{seq};
}

void SimKernel::cancel(EventHandle handle) {
  if (pending_.count(handle.seq) != 0) cancelled_.insert(handle.seq);
}

bool SimKernel::step() {
  while (!queue_.empty()) {
    // priority_queue::top is const; the handler is moved out before pop.
    Event ev = std::move(const_cast<Event&>(queue_.top()));
    queue_.pop();
    pending_.erase(ev.seq);
    if (cancelled_.erase(ev.seq) != 0) continue;
    now_ = ev.t;
    ++dispatched_;
    ev.handler();
    return true;
  }
  return false;
}

double SimKernel::run_until_idle() {
  while (step()) {
  }
  return now_;
}

}  // namespace fedsched
