// SPDX-License-Identifier: Apache-2.0
#pragma once

namespace attnsent {

// Number of OpenMP threads used by parallel kernels. Initialized from the
// ATTNSENT_THREADS environment variable on first use, default 1.
int thread_count();
void set_thread_count(int n);

// Restores the previous thread count on destruction.
class ScopedThreadCount {
 public:
  explicit ScopedThreadCount(int n) : previous_(thread_count()) { set_thread_count(n); }
  ~ScopedThreadCount() { set_thread_count(previous_); }
  ScopedThreadCount(const ScopedThreadCount&) = delete;
  ScopedThreadCount& operator=(const ScopedThreadCount&) = delete;

 private:
  int previous_;
};

}  // namespace attnsent
