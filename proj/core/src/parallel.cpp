#include "homeofit/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace homeofit {
namespace {

std::atomic<int> g_override{0};

int env_threads() {
  const char* raw = std::getenv("HOMEOFIT_THREADS");
  if (raw == nullptr) return 0;
  try {
    return std::max(0, std::stoi(raw));
  } catch (...) {
    return 0;
  }
}

}  // namespace

int worker_count() {
  if (int n = g_override.load(); n > 0) return n;
  if (int n = env_threads(); n > 0) return n;
  return std::max(1u, std::thread::hardware_concurrency());
}

void set_worker_count(int n) { g_override.store(std::max(0, n)); }

void for_each_chunk(std::size_t n, std::size_t chunk,
                    const std::function<void(std::size_t, std::size_t, std::size_t)>& body) {
  const std::size_t chunks = chunk_count(n, chunk);
  if (chunks == 0) return;
  const auto workers = static_cast<std::size_t>(
      std::min<std::size_t>(static_cast<std::size_t>(worker_count()), chunks));
  auto run = [&](std::size_t c) {
    const std::size_t begin = c * chunk;
    body(c, begin, std::min(n, begin + chunk));
  };
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run(c);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  auto drain = [&] {
    try {
      for (std::size_t c = next++; c < chunks; c = next++) run(c);
    } catch (...) {
      std::lock_guard lock(failure_mutex);
      if (!failure) failure = std::current_exception();
      next = chunks;
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(drain);
  drain();
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace homeofit
