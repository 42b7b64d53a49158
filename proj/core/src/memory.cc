#include "sgski/memory.h"

#include <algorithm>
#include <atomic>

namespace sgski {
namespace {

std::atomic<std::int64_t> g_current{0};
std::atomic<std::int64_t> g_peak{0};

}  // namespace

void MemoryTracker::on_allocate(std::size_t bytes) {
  const std::int64_t now =
      g_current.fetch_add(static_cast<std::int64_t>(bytes)) +
      static_cast<std::int64_t>(bytes);
  std::int64_t peak = g_peak.load();
  while (now > peak && !g_peak.compare_exchange_weak(peak, now)) {
  }
}

void MemoryTracker::on_deallocate(std::size_t bytes) {
  g_current.fetch_sub(static_cast<std::int64_t>(bytes));
}

std::int64_t MemoryTracker::current_bytes() { return g_current.load(); }
std::int64_t MemoryTracker::peak_bytes() { return g_peak.load(); }
void MemoryTracker::reset_peak() { g_peak.store(g_current.load()); }

PeakMemoryScope::PeakMemoryScope() : baseline_(MemoryTracker::current_bytes()) {
  MemoryTracker::reset_peak();
}

std::int64_t PeakMemoryScope::peak_above_baseline() const {
  return std::max<std::int64_t>(0, MemoryTracker::peak_bytes() - baseline_);
}

}  // namespace sgski
