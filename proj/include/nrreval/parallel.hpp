#ifndef NRREVAL_PARALLEL_HPP
#define NRREVAL_PARALLEL_HPP

#include <cmath>
#include <cstdint>
#include <exception>
#include <mutex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace nrreval
{

/// Sets the worker count for subsequent parallel loops (no-op without OpenMP).
inline void set_thread_count(int threads)
{
#ifdef _OPENMP
    if (threads > 0)
        omp_set_num_threads(threads);
#else
    (void)threads;
#endif
}

/// Runs body(i) for i in [0, count). Bodies must only write to slots owned by i; callers
/// reduce the slots serially in index order, so results do not depend on the thread count.
/// The first exception thrown by any body is rethrown on the calling thread.
template <typename Body>
void parallel_for(std::int64_t count, Body&& body)
{
    std::exception_ptr error;
    std::mutex error_mutex;
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (std::int64_t i = 0; i < count; ++i) {
        try {
            body(i);
        } catch (...) {
            std::lock_guard lock(error_mutex);
            if (!error)
                error = std::current_exception();
        }
    }
    if (error)
        std::rethrow_exception(error);
}

/// Neumaier-compensated sum accumulated in index order.
class CompensatedSum
{
public:
    void add(double x)
    {
        const double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            carry_ += (sum_ - t) + x;
        else
            carry_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + carry_; }

private:
    double sum_ = 0.0;
    double carry_ = 0.0;
};

} // namespace nrreval

#endif // NRREVAL_PARALLEL_HPP
