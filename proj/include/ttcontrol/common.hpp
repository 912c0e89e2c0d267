#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

//! Shared error types, RNG helpers and a minimal parallel-for used across the library.
namespace ttc {

//! Dimension or index mismatch between arguments.
class shape_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

//! Requested ranks that no representation of the given shape can carry.
class rank_error : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

//! Non-finite values or failed factorizations at runtime.
class numeric_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//! Malformed or inconsistent user configuration.
class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

//! Uniform double in [0,1) with full 53-bit resolution, identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return std::ldexp(static_cast<double>(rng() >> 11), -53);
}

//! Uniform double in [a,b).
inline double uniform(std::mt19937_64& rng, double a, double b) {
  return a + (b - a) * uniform01(rng);
}

//! Uniform integer in {lo,...,hi}.
inline long uniform_int(std::mt19937_64& rng, long lo, long hi) {
  const auto span = static_cast<unsigned long>(hi - lo + 1);
  auto k = static_cast<unsigned long>(uniform01(rng) * static_cast<double>(span));
  if (k >= span) k = span - 1;
  return lo + static_cast<long>(k);
}

//! Runs body(i) for i in [0,count). Splits the range over hardware threads when
//! it pays off; bodies must be pure per-index (results written to disjoint slots).
inline void parallel_for(std::size_t count, const std::function<void(std::size_t)>& body) {
  const std::size_t workers =
      std::min<std::size_t>(std::max(1u, std::thread::hardware_concurrency()), count);
  if (workers < 2 || count < 2 * workers) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([begin, end, &body] {
      for (std::size_t i = begin; i < end; ++i) body(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace ttc
