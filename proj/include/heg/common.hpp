//*****************************************************************************
// Copyright 2026 The hegraph Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//*****************************************************************************

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace heg {

/*! \brief Failure category attached to every heg::Error.
 *
 * The CLI maps categories to process exit codes; library users can switch on
 * them to distinguish recoverable input problems from programming errors.
 */
enum class errc {
  validation,      //!< malformed graph / tensor / context arguments
  parse,           //!< unreadable JSON or unknown fields
  depth_exceeded,  //!< multiplicative-depth budget exhausted
  capacity,        //!< batch larger than slot count and similar limits
  io,              //!< file system failures
  internal         //!< broken invariant inside the library
};

//! Exception type carrying an errc alongside the message.
class Error : public std::runtime_error {
 public:
  Error(errc code, const std::string& what) : std::runtime_error(what), m_code(code) {}
  errc code() const noexcept { return m_code; }

 private:
  errc m_code;
};

[[noreturn]] inline void fail(errc code, const std::string& msg) { throw Error(code, msg); }

//! Throw heg::Error(code) unless `cond` holds.
inline void check(bool cond, errc code, const std::string& msg) {
  if (!cond) fail(code, msg);
}

//-----------------------------------------------------------------------------
// Deterministic random number generation.
//
// The standard distributions are implementation-defined, so everything that
// must reproduce across platforms (weight draws, encryption noise in seeded
// runs) goes through this splittable generator instead.
//-----------------------------------------------------------------------------

inline uint64_t splitmix64(uint64_t& state) {
  uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

//! Small counter-free PRNG; deterministic given the seed, cheap to fork.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : m_state(seed ^ 0xd1b54a32d192ed03ULL) {
    // Warm up so that nearby seeds do not produce nearby first outputs.
    next();
    next();
  }

  uint64_t next() { return splitmix64(m_state); }

  //! Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  //! Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  //! Uniform integer in [0, n).
  uint64_t uniform_int(uint64_t n) { return next() % n; }

  //! Standard normal via Box-Muller (kept local for cross-platform runs).
  double gaussian() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586476925286766559 * u2);
  }

  //! Derive an independent stream from this one plus a label.
  Rng fork(uint64_t label) const {
    uint64_t s = m_state;
    uint64_t mixed = splitmix64(s) ^ (label * 0x9e3779b97f4a7c15ULL + 0x165667b19e3779f9ULL);
    return Rng(mixed);
  }

  //! Same, with a readable stream name.
  Rng fork(const std::string& label) const {
    uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : label) h = (h ^ c) * 0x100000001b3ULL;
    return fork(h);
  }

 private:
  uint64_t m_state;
};

//! Mix an arbitrary list of labels into one seed (for per-element streams).
inline uint64_t mix_seed(std::initializer_list<uint64_t> parts) {
  uint64_t s = 0x243f6a8885a308d3ULL;
  for (uint64_t p : parts) {
    s ^= p + 0x9e3779b97f4a7c15ULL + (s << 6) + (s >> 2);
    splitmix64(s);
  }
  return s;
}

//-----------------------------------------------------------------------------
// Index-sharded parallel loop.
//
// Work items write only to their own index, so the result is identical for
// any thread count; `threads <= 1` runs inline.
//-----------------------------------------------------------------------------

inline unsigned hardware_threads() {
  unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

inline void parallel_for(int64_t n, unsigned threads, const std::function<void(int64_t, int64_t)>& body) {
  if (n <= 0) return;
  if (threads <= 1 || n == 1) {
    body(0, n);
    return;
  }
  unsigned workers = static_cast<unsigned>(std::min<int64_t>(threads, n));
  int64_t chunk = (n + workers - 1) / workers;
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr first_error = nullptr;
  std::mutex guard;
  for (unsigned t = 0; t < workers; ++t) {
    int64_t begin = t * chunk;
    int64_t end = std::min<int64_t>(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end]() {
      try {
        body(begin, end);
      } catch (...) {
        std::lock_guard<std::mutex> lock(guard);
        if (!first_error) first_error = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace heg
