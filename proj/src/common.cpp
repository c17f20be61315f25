#include "fdm/common.hpp"

#include <atomic>

namespace fdm {

namespace {
std::atomic<int> g_threads{1};
}

void set_thread_count(int threads) {
  if (threads < 1) throw InputError("thread count must be at least 1");
  g_threads.store(threads);
}

int thread_count() { return g_threads.load(); }

}  // namespace fdm
