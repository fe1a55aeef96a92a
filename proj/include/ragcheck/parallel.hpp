#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

#include "ragcheck/error.hpp"

namespace ragcheck {

/// Runs fn(i) for i in [0, count) on at most `max_in_flight` threads.
/// Each slot's exception (or null) is returned at its index, so callers see
/// results in input order regardless of completion order.
template <typename Fn>
std::vector<std::exception_ptr> bounded_parallel_for(std::size_t count, std::size_t max_in_flight,
                                                     Fn&& fn) {
  std::vector<std::exception_ptr> failures(count);
  if (count == 0) return failures;
  std::size_t workers = std::clamp<std::size_t>(max_in_flight, 1, count);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < count; i = next++) {
      try {
        fn(i);
      } catch (...) {
        failures[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
    return failures;
  }
  {
    std::vector<std::jthread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  return failures;
}

/// Calls fn, retrying up to `retries` extra times on EndpointError.
/// Other exceptions (including malformed replies) propagate immediately.
template <typename Fn>
auto with_retries(int retries, Fn&& fn) -> decltype(fn()) {
  for (int attempt = 0;; ++attempt) {
    try {
      return fn();
    } catch (const MalformedReplyError&) {
      throw;
    } catch (const EndpointError&) {
      if (attempt >= retries) throw;
    }
  }
}

}  // namespace ragcheck
