#include "mpde/common.hpp"

#include <algorithm>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpde {

std::vector<Index> Rng::sample_without_replacement(Index n, Index k) {
    if (k > n) throw ConfigError("sample_without_replacement: k > n");
    std::vector<Index> pool(n);
    for (Index i = 0; i < n; ++i) pool[i] = i;
    for (Index i = 0; i < k; ++i) {
        Index j = i + static_cast<Index>(next_u64() % static_cast<std::uint64_t>(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

namespace {
int g_threads = 1;
}

void set_thread_count(int threads) {
    if (threads < 1) threads = 1;
    g_threads = threads;
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
    Eigen::setNbThreads(threads);
}

int thread_count() { return g_threads; }

}  // namespace mpde
