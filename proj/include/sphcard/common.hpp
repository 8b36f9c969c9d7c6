#pragma once

// Shared error taxonomy, numeric helpers, and a small deterministic
// parallel-for used by the Monte Carlo layers.

#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace sphcard {

// Requested operation is outside the supported capability envelope
// (e.g. polynomial order above the enforced cap, or a closed form that
// exists only for specific (d, k)).  Derives from domain_error so that
// callers treating it as an invalid-argument condition keep working.
class capability_error : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Work or memory budget exceeded (tensor sizes, permutation counts).
class resource_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An iterative numeric routine failed to converge or lost validity.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A statistic is undefined for the data at hand (zero resultant,
// eigenvalue multiplicity, ...); distinct from usage errors.
class degenerate_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Global tolerance for |x| <= 1 arguments: dot products of unit vectors
// can exceed 1 by rounding, so inputs within this slack are clamped.
inline constexpr double kUnitClampTol = 1e-12;

// Clamps x into [-1, 1]; throws if it lies further than tol outside.
inline double clamp_unit(double x, double tol = kUnitClampTol) {
  if (x > 1.0) {
    if (x > 1.0 + tol) throw std::domain_error("argument exceeds 1 beyond tolerance");
    return 1.0;
  }
  if (x < -1.0) {
    if (x < -1.0 - tol) throw std::domain_error("argument below -1 beyond tolerance");
    return -1.0;
  }
  return x;
}

inline double clamp01(double x) { return x < 0.0 ? 0.0 : (x > 1.0 ? 1.0 : x); }

// Runs fn(i) for i in [0, n) across hardware threads.  Each index writes
// only to its own output slot, so results are independent of scheduling;
// the first captured exception is rethrown after all threads join.
inline void parallel_for(std::size_t n, const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  unsigned hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  std::size_t workers = std::min<std::size_t>(hw, n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&]() {
      while (true) {
        std::size_t i = next.fetch_add(1);
        if (i >= n || failed.load(std::memory_order_relaxed)) break;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!first_error) first_error = std::current_exception();
          failed.store(true, std::memory_order_relaxed);
          break;
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace sphcard
