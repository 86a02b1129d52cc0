#pragma once

#include <cstddef>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace sdfdc
{
    /// Worker count for a `threads` setting (0 = all available).
    inline int resolve_threads(int threads)
    {
#ifdef _OPENMP
        return threads > 0 ? threads : omp_get_max_threads();
#else
        (void)threads;
        return 1;
#endif
    }

    /// Runs body(i) for i in [0, n). Callers must write only to slot i.
    template <class Body>
    void parallel_for(std::size_t n, int threads, Body && body)
    {
#ifdef _OPENMP
        const int workers = resolve_threads(threads);
        const auto count = static_cast<long long>(n);
#pragma omp parallel for schedule(dynamic, 16) num_threads(workers)
        for (long long i = 0; i < count; ++i)
        {
            body(static_cast<std::size_t>(i));
        }
#else
        (void)threads;
        for (std::size_t i = 0; i < n; ++i) body(i);
#endif
    }
} // namespace sdfdc
