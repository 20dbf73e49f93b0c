#include "lfm/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <thread>
#include <vector>

namespace lfm {

namespace {

std::atomic<int> g_threads{0}; // 0 = unresolved

int resolve_threads() {
    int n = g_threads.load();
    if (n > 0) return n;
    if (const char* env = std::getenv("LFM_THREADS")) {
        const int parsed = std::atoi(env);
        if (parsed >= 1) {
            g_threads.store(parsed);
            return parsed;
        }
    }
    g_threads.store(1);
    return 1;
}

} // namespace

int thread_count() { return resolve_threads(); }

void set_thread_count(int n) {
    if (n >= 1) g_threads.store(n);
}

void parallel_for(std::size_t begin, std::size_t end,
                  const std::function<void(std::size_t)>& fn) {
    if (end <= begin) return;
    const std::size_t total = end - begin;
    const int workers = thread_count();
    if (workers <= 1 || total == 1) {
        for (std::size_t i = begin; i < end; ++i) fn(i);
        return;
    }
    const std::size_t nw = std::min<std::size_t>(workers, total);
    std::vector<std::thread> pool;
    pool.reserve(nw);
    const std::size_t base = total / nw;
    const std::size_t rem = total % nw;
    std::size_t start = begin;
    for (std::size_t w = 0; w < nw; ++w) {
        const std::size_t len = base + (w < rem ? 1 : 0);
        const std::size_t lo = start;
        const std::size_t hi = start + len;
        start = hi;
        pool.emplace_back([&fn, lo, hi] {
            for (std::size_t i = lo; i < hi; ++i) fn(i);
        });
    }
    for (auto& t : pool) t.join();
}

void parallel_chunks(std::size_t nchunks,
                     const std::function<void(std::size_t)>& fn) {
    parallel_for(0, nchunks, fn);
}

} // namespace lfm
