// SPDX-License-Identifier: Apache-2.0
#include "attnsent/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace attnsent {

namespace {

int threads_from_env() {
  const char* env = std::getenv("ATTNSENT_THREADS");
  if (env == nullptr) return 1;
  try {
    const int n = std::stoi(env);
    return n >= 1 ? n : 1;
  } catch (const std::exception&) {
    return 1;
  }
}

std::atomic<int>& setting() {
  static std::atomic<int> value{threads_from_env()};
  return value;
}

}  // namespace

int thread_count() { return setting().load(std::memory_order_relaxed); }

void set_thread_count(int n) { setting().store(n >= 1 ? n : 1, std::memory_order_relaxed); }

}  // namespace attnsent
