#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <thread>
#include <vector>

namespace naxray
{
//! Worker count for batch operations. Defaults to NAXRAY_THREADS or 1.
int thread_count();
void set_thread_count(int n);

/*!
 * Run f(i) for i in [0, n) over contiguous chunks.
 *
 * Results must be written to per-index slots by the callee; any reduction is
 * done afterwards in index order so output never depends on the thread count.
 */
template<class F>
void parallel_for(std::size_t n, F&& f)
{
    std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n);
    if (workers <= 1)
    {
        for (std::size_t i = 0; i < n; ++i)
            f(i);
        return;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(workers);
    std::size_t chunk = (n + workers - 1) / workers;
    for (std::size_t w = 0; w < workers; ++w)
    {
        pool.emplace_back([&, w] {
            try
            {
                std::size_t lo = w * chunk;
                std::size_t hi = std::min(n, lo + chunk);
                for (std::size_t i = lo; i < hi; ++i)
                    f(i);
            }
            catch (...)
            {
                errors[w] = std::current_exception();
            }
        });
    }
    for (auto& t : pool)
        t.join();
    for (auto& e : errors)
        if (e)
            std::rethrow_exception(e);
}
}  // namespace naxray
