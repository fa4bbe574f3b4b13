#pragma once

#include <cstddef>
#include <exception>
#include <limits>
#include <mutex>

namespace climpanel {

// Runs fn(i) for i in [0, n) across OpenMP threads. If any iteration throws, the
// exception from the lowest index is rethrown after the loop, so failures are
// reported deterministically regardless of scheduling.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
    std::exception_ptr first_error;
    std::size_t first_index = std::numeric_limits<std::size_t>::max();
    std::mutex guard;
#pragma omp parallel for schedule(dynamic)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(n); ++i) {
        try {
            fn(static_cast<std::size_t>(i));
        } catch (...) {
            std::lock_guard<std::mutex> lock(guard);
            if (static_cast<std::size_t>(i) < first_index) {
                first_index = static_cast<std::size_t>(i);
                first_error = std::current_exception();
            }
        }
    }
    if (first_error) std::rethrow_exception(first_error);
}

template <typename Fn>
void serial_for(std::size_t n, Fn&& fn) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
}

}  // namespace climpanel
