#include "peridyn/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <exception>
#include <thread>
#include <vector>

namespace peridyn {

namespace {
std::atomic<unsigned> g_cap{0};

unsigned env_cap() {
    static const unsigned value = [] {
        if (const char* s = std::getenv("PERIDYN_THREADS")) {
            const long v = std::strtol(s, nullptr, 10);
            if (v > 0)
                return unsigned(v);
        }
        return 0u;
    }();
    return value;
}
} // namespace

unsigned worker_count() {
    unsigned w = std::thread::hardware_concurrency();
    if (w == 0)
        w = 1;
    if (const unsigned e = env_cap())
        w = std::min(w, e);
    if (const unsigned c = g_cap.load())
        w = std::min(w, c);
    return w;
}

void set_worker_cap(unsigned cap) { g_cap.store(cap); }

unsigned get_worker_cap() { return g_cap.load(); }

void parallel_chunks(std::int64_t n, const std::function<void(std::int64_t, std::int64_t)>& fn) {
    if (n <= 0)
        return;
    const unsigned workers = worker_count();
    if (workers <= 1 || n < 2) {
        fn(0, n);
        return;
    }
    const std::int64_t k = std::min<std::int64_t>(workers, n);
    const std::int64_t chunk = (n + k - 1) / k;
    std::exception_ptr first_error;
    std::atomic_flag error_set = ATOMIC_FLAG_INIT;
    std::vector<std::thread> pool;
    pool.reserve(std::size_t(k - 1));
    auto run = [&](std::int64_t begin, std::int64_t end) {
        try {
            fn(begin, end);
        } catch (...) {
            if (!error_set.test_and_set())
                first_error = std::current_exception();
        }
    };
    for (std::int64_t w = 1; w < k; ++w) {
        const std::int64_t begin = w * chunk;
        const std::int64_t end = std::min(n, begin + chunk);
        if (begin < end)
            pool.emplace_back(run, begin, end);
    }
    run(0, std::min(n, chunk));
    for (auto& t : pool)
        t.join();
    if (first_error)
        std::rethrow_exception(first_error);
}

} // namespace peridyn
