#ifndef SGSKI_MEMORY_H_
#define SGSKI_MEMORY_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <new>
#include <vector>

namespace sgski {

// Process-wide byte counter for algorithmic buffers (plans, workspaces,
// materialized matrices). Only memory allocated through TrackingAllocator is
// counted, so runtime and allocator overhead stay out of the figures.
class MemoryTracker {
 public:
  static void on_allocate(std::size_t bytes);
  static void on_deallocate(std::size_t bytes);

  static std::int64_t current_bytes();
  static std::int64_t peak_bytes();
  // Resets the high-water mark to the current level.
  static void reset_peak();
};

// Measures the high-water mark above the level at construction time.
class PeakMemoryScope {
 public:
  PeakMemoryScope();
  std::int64_t peak_above_baseline() const;

 private:
  std::int64_t baseline_;
};

template <typename T>
class TrackingAllocator {
 public:
  using value_type = T;

  TrackingAllocator() noexcept = default;
  template <typename U>
  TrackingAllocator(const TrackingAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) {
    T* p = std::allocator<T>{}.allocate(n);
    MemoryTracker::on_allocate(n * sizeof(T));
    return p;
  }

  void deallocate(T* p, std::size_t n) noexcept {
    MemoryTracker::on_deallocate(n * sizeof(T));
    std::allocator<T>{}.deallocate(p, n);
  }

  template <typename U>
  bool operator==(const TrackingAllocator<U>&) const noexcept {
    return true;
  }
};

template <typename T>
using tracked_vector = std::vector<T, TrackingAllocator<T>>;

}  // namespace sgski

#endif  // SGSKI_MEMORY_H_
