#ifndef PARMC_PARALLEL_HPP
#define PARMC_PARALLEL_HPP

#include <cstddef>
#include <functional>

namespace parmc {

// Thread count taken from PARMC_THREADS when set (clamped to >= 1),
// otherwise the hardware concurrency.
unsigned default_thread_count();

// Runs fn(i) for i in [0, n). Work items must be independent and write only
// to their own slots; results are then identical for any thread count.
// threads == 0 means default_thread_count().
void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn,
                  unsigned threads = 0);

}  // namespace parmc

#endif
