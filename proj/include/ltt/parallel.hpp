#ifndef LTT_PARALLEL_HPP
#define LTT_PARALLEL_HPP

#include <functional>

namespace ltt {

// Execution policy for the transform-domain slice loops. Sequential runs
// k = 0..p-1 in order on the calling thread; Batched treats the slice index
// as a batch dimension and may run slices on worker threads. Each slice
// writes disjoint output state with a fixed per-slice reduction order, so
// both policies produce bit-identical results.
enum class SliceExec { Sequential, Batched };

SliceExec slice_execution();
void set_slice_execution(SliceExec mode);

void for_each_slice(int p, const std::function<void(int)>& fn);

}  // namespace ltt

#endif
