#pragma once

#include <cstdint>
#include <cstdlib>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>
#include <functional>

namespace divrep {

struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error("config error: " + msg) {}
};

struct ArgError : std::invalid_argument {
  explicit ArgError(const std::string& msg) : std::invalid_argument("argument error: " + msg) {}
};

struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error("numeric error: " + msg) {}
};

#define DIVREP_CHECK(cond, msg) \
  do { if (!(cond)) throw ::divrep::ArgError(msg); } while (0)
#define DIVREP_CHECK_CFG(cond, msg) \
  do { if (!(cond)) throw ::divrep::ConfigError(msg); } while (0)

// Uniform 64-byte alignment for every buffer Eigen maps over. Vectorized
// GEMM kernels peel by runtime alignment; keeping all tensors identically
// aligned keeps float accumulation order, and thus results, reproducible
// across process runs.
template <class T, std::size_t Align = 64>
struct AlignedAllocator {
  using value_type = T;
  AlignedAllocator() = default;
  template <class U>
  AlignedAllocator(const AlignedAllocator<U, Align>&) {}
  template <class U>
  struct rebind {
    using other = AlignedAllocator<U, Align>;
  };
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
  }
  void deallocate(T* p, std::size_t) noexcept {
    ::operator delete(p, std::align_val_t(Align));
  }
  bool operator==(const AlignedAllocator&) const { return true; }
};

template <class T>
using aligned_vector = std::vector<T, AlignedAllocator<T, 64>>;

inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Stable stream derivation: one master seed, named substreams.
inline uint64_t derive_seed(uint64_t master, const std::string& tag) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : tag) h = (h ^ c) * 0x100000001b3ULL;
  return splitmix64(master ^ h);
}

inline uint64_t fnv1a64(const void* data, size_t nbytes) {
  const auto* p = static_cast<const unsigned char*>(data);
  uint64_t h = 0xcbf29ce484222325ULL;
  for (size_t i = 0; i < nbytes; ++i) h = (h ^ p[i]) * 0x100000001b3ULL;
  return h;
}

inline int worker_count() {
  if (const char* env = std::getenv("DIVREP_THREADS")) {
    int n = std::atoi(env);
    if (n >= 1) return n;
  }
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Deterministic data-parallel loop: contiguous chunks, one per worker.
// Workers never share output slots; callers merge partials in index order.
inline void parallel_for(int64_t n, const std::function<void(int64_t, int64_t)>& body) {
  int workers = worker_count();
  if (n <= 0) return;
  if (workers <= 1 || n == 1) {
    body(0, n);
    return;
  }
  if (workers > n) workers = static_cast<int>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  int64_t chunk = (n + workers - 1) / workers;
  for (int w = 1; w < workers; ++w) {
    int64_t lo = w * chunk, hi = std::min<int64_t>(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back(body, lo, hi);
  }
  body(0, std::min<int64_t>(n, chunk));
  for (auto& t : pool) t.join();
}

}  // namespace divrep
