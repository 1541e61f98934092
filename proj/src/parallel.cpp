#include "aistk/parallel.hpp"

#include <algorithm>
#include <thread>
#include <vector>

namespace aistk {

void parallel_ranges(int n, int threads,
                     const std::function<void(int, int, int)>& fn) {
  if (n <= 0) return;
  int workers = std::max(1, std::min(threads, n));
  if (workers == 1) {
    fn(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  int base = n / workers;
  int rem = n % workers;
  int begin = 0;
  for (int w = 0; w < workers; ++w) {
    int len = base + (w < rem ? 1 : 0);
    int end = begin + len;
    pool.emplace_back([&fn, w, begin, end] { fn(w, begin, end); });
    begin = end;
  }
  for (auto& t : pool) t.join();
}

void parallel_for(int n, int threads, const std::function<void(int)>& fn) {
  parallel_ranges(n, threads, [&fn](int, int begin, int end) {
    for (int i = begin; i < end; ++i) fn(i);
  });
}

}  // namespace aistk
