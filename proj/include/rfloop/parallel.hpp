#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <utility>
#include <vector>

namespace rfloop {

/// Resolves a worker count; 0 means "all hardware threads".
inline unsigned resolve_workers(unsigned requested) {
  if (requested != 0) return requested;
  return std::max(1u, std::thread::hardware_concurrency());
}

/// Runs fn(i) for i in [0, count) on up to `workers` threads. The first
/// exception thrown by any task is rethrown after all threads join.
template <typename Fn>
void parallel_for(std::size_t count, unsigned workers, Fn&& fn) {
  workers = std::min<unsigned>(resolve_workers(workers), static_cast<unsigned>(std::max<std::size_t>(count, 1)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto body = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= count) return;
      try {
        fn(i);
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next.store(count);
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) pool.emplace_back(body);
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

/// Pairwise (tree) reduction of an ordered list of partials.
template <typename T, typename Combine>
T pairwise_reduce(std::vector<T> parts, Combine&& combine) {
  while (parts.size() > 1) {
    std::vector<T> next;
    next.reserve((parts.size() + 1) / 2);
    for (std::size_t i = 0; i + 1 < parts.size(); i += 2) next.push_back(combine(std::move(parts[i]), std::move(parts[i + 1])));
    if (parts.size() % 2 == 1) next.push_back(std::move(parts.back()));
    parts = std::move(next);
  }
  return std::move(parts.front());
}

/// Deterministic map-reduce over [0, count): items are grouped into fixed
/// leaves of `leaf_size` folded left to right, then leaves are combined
/// pairwise. The grouping never depends on the worker count, so the result
/// is bitwise identical for any number of threads.
template <typename T, typename Map, typename Combine>
T map_reduce(std::size_t count, unsigned workers, Map&& map, Combine&& combine, std::size_t leaf_size = 8) {
  if (count == 0) throw std::invalid_argument("map_reduce: empty range");
  const std::size_t leaves = (count + leaf_size - 1) / leaf_size;
  std::vector<std::optional<T>> partial(leaves);
  parallel_for(leaves, workers, [&](std::size_t leaf) {
    const std::size_t begin = leaf * leaf_size;
    const std::size_t end = std::min(count, begin + leaf_size);
    T acc = map(begin);
    for (std::size_t i = begin + 1; i < end; ++i) acc = combine(std::move(acc), map(i));
    partial[leaf] = std::move(acc);
  });
  std::vector<T> parts;
  parts.reserve(leaves);
  for (auto& p : partial) parts.push_back(std::move(*p));
  return pairwise_reduce(std::move(parts), combine);
}

}  // namespace rfloop
