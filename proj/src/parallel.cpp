#include "ganattr/parallel.hpp"

#include <algorithm>
#include <atomic>
#include <thread>
#include <vector>

namespace ganattr {

namespace {
std::atomic<int> g_global_budget{0};
thread_local int t_local_budget = 0;
}  // namespace

int thread_budget() {
    if (t_local_budget > 0) return t_local_budget;
    int g = g_global_budget.load(std::memory_order_relaxed);
    if (g > 0) return g;
    unsigned hc = std::thread::hardware_concurrency();
    return hc == 0 ? 1 : static_cast<int>(hc);
}

void set_global_thread_budget(int n) { g_global_budget.store(n, std::memory_order_relaxed); }
void set_local_thread_budget(int n) { t_local_budget = n; }

namespace detail {

void run_parallel(std::int64_t n, void (*fn)(std::int64_t, void*), void* ctx, int workers) {
    if (n <= 0) return;
    workers = static_cast<int>(std::min<std::int64_t>(workers, n));
    if (workers <= 1) {
        for (std::int64_t i = 0; i < n; ++i) fn(i, ctx);
        return;
    }
    // Work stealing over a shared counter; iteration-to-thread assignment is
    // irrelevant for results because outputs are disjoint.
    std::atomic<std::int64_t> next{0};
    auto body = [&] {
        for (;;) {
            std::int64_t i = next.fetch_add(1, std::memory_order_relaxed);
            if (i >= n) break;
            fn(i, ctx);
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers) - 1);
    for (int w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& t : pool) t.join();
}

}  // namespace detail

}  // namespace ganattr
