#pragma once

// Bounded worker pool with deterministic result ordering and cooperative
// cancellation (set by the CLI's SIGINT handler).

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <thread>
#include <vector>

namespace rotdop {

/// Process-wide cancellation flag; workers stop picking up new items once set.
inline std::atomic<bool> &cancel_flag() {
  static std::atomic<bool> flag{false};
  return flag;
}

class Cancelled : public std::runtime_error {
public:
  Cancelled() : std::runtime_error("cancelled") {}
};

/// Runs fn(i) for i in [0, n) on up to `jobs` threads. Results are returned in
/// index order regardless of scheduling. Items not started before
/// cancellation are left empty; the first exception is rethrown after all
/// workers finish.
template <class T>
std::vector<std::optional<T>> parallel_map_partial(std::size_t n, unsigned jobs,
                                                   const std::function<T(std::size_t)> &fn) {
  std::vector<std::optional<T>> out(n);
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    for (;;) {
      if (cancel_flag().load()) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (error) return;
      }
      const std::size_t i = next.fetch_add(1);
      if (i >= n) return;
      try {
        out[i] = fn(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const unsigned nt = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(n)));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (unsigned t = 0; t < nt; ++t) threads.emplace_back(worker);
    for (auto &t : threads) t.join();
  }
  if (error) std::rethrow_exception(error);
  return out;
}

/// As parallel_map_partial, but throws Cancelled if any item is missing.
template <class T>
std::vector<T> parallel_map(std::size_t n, unsigned jobs, const std::function<T(std::size_t)> &fn) {
  auto partial = parallel_map_partial<T>(n, jobs, fn);
  std::vector<T> out;
  out.reserve(n);
  for (auto &p : partial) {
    if (!p) throw Cancelled();
    out.push_back(std::move(*p));
  }
  return out;
}

} // namespace rotdop
