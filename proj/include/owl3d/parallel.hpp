#pragma once

namespace owl3d {

/// Sets the number of OpenMP worker threads used by every kernel. Values < 1 are rejected.
void set_num_threads(int threads);

/// Current OpenMP worker count.
int num_threads();

/// Restores the previous thread count on destruction.
class ScopedThreads {
 public:
  explicit ScopedThreads(int threads) : previous_(num_threads()) { set_num_threads(threads); }
  ~ScopedThreads() { set_num_threads(previous_); }
  ScopedThreads(const ScopedThreads&) = delete;
  ScopedThreads& operator=(const ScopedThreads&) = delete;

 private:
  int previous_;
};

}  // namespace owl3d
