/*
 * Copyright 2026 The torusflow Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef TORUSFLOW_PARALLEL_HPP
#define TORUSFLOW_PARALLEL_HPP

#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace torusflow {

/** \brief Hardware worker default (at least 1). */
inline int hardware_workers() {
  const unsigned hc = std::thread::hardware_concurrency();
  return hc == 0 ? 1 : static_cast<int>(hc);
}

/**
 * \brief Run fn(begin, end) over a partition of [0, total).
 *
 * The body must be pure per index (disjoint writes, no cross-index reads of
 * written data) so results are identical for every worker count and chunking.
 * Exceptions from workers are captured and the first one (by chunk order) is
 * rethrown on the calling thread.
 */
template <typename Fn>
void parallel_for(std::size_t total, int workers, const Fn& fn) {
  if (total == 0) return;
  if (workers <= 1 || total < 2048) {
    fn(static_cast<std::size_t>(0), total);
    return;
  }
  const std::size_t nw =
      static_cast<std::size_t>(workers) < total ? static_cast<std::size_t>(workers)
                                                : total;
  std::vector<std::exception_ptr> errors(nw);
  std::vector<std::thread> threads;
  threads.reserve(nw);
  const std::size_t chunk = (total + nw - 1) / nw;
  for (std::size_t w = 0; w < nw; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = (b + chunk < total) ? b + chunk : total;
    if (b >= e) break;
    threads.emplace_back([&fn, &errors, w, b, e]() {
      try {
        fn(b, e);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : threads) t.join();
  for (auto& err : errors)
    if (err) std::rethrow_exception(err);
}

}  // namespace torusflow

#endif  // TORUSFLOW_PARALLEL_HPP
