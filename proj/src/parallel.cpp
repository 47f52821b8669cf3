#include "ltt/parallel.hpp"

#include <atomic>
#include <future>
#include <vector>

namespace ltt {

namespace {
std::atomic<SliceExec> g_mode{SliceExec::Sequential};
}

SliceExec slice_execution() { return g_mode.load(std::memory_order_relaxed); }

void set_slice_execution(SliceExec mode) { g_mode.store(mode, std::memory_order_relaxed); }

void for_each_slice(int p, const std::function<void(int)>& fn) {
  if (p == 1 || slice_execution() == SliceExec::Sequential) {
    for (int k = 0; k < p; ++k) fn(k);
    return;
  }
  std::vector<std::future<void>> pending;
  pending.reserve(p - 1);
  for (int k = 1; k < p; ++k)
    pending.push_back(std::async(std::launch::async, [&fn, k] { fn(k); }));
  fn(0);
  for (auto& f : pending) f.get();  // rethrows slice exceptions
}

}  // namespace ltt
