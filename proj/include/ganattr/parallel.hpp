#pragma once

#include <cstdint>

namespace ganattr {

// Worker budget for data-parallel kernels. The global default comes from the
// CLI --threads flag (or hardware concurrency); the thread-local override lets
// concurrent secondary trainers split the budget between themselves.
int thread_budget();
void set_global_thread_budget(int n);
void set_local_thread_budget(int n);  // 0 clears the override

namespace detail {
void run_parallel(std::int64_t n, void (*fn)(std::int64_t, void*), void* ctx, int workers);
}

// Every iteration must write disjoint outputs; accumulations stay inside one
// iteration, so results are bitwise identical for any worker count.
template <class F>
void parallel_for(std::int64_t n, F&& f) {
    struct Ctx {
        F* f;
    } ctx{&f};
    detail::run_parallel(
        n, [](std::int64_t i, void* c) { (*static_cast<Ctx*>(c)->f)(i); }, &ctx, thread_budget());
}

}  // namespace ganattr
