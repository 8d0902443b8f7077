#pragma once

#include <complex>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "error.hpp"

namespace spinorbit {

namespace detail {
//! FFTW's planner is not thread-safe; execution of distinct plans is.
inline std::mutex& fftw_planner_mutex()
{
    static std::mutex m;
    return m;
}
}  // namespace detail

/*!
 * In-place forward 2D DFT of a square row-major grid, unitary scaling.
 *
 * Planned with FFTW_ESTIMATE so the same input always produces the same
 * bits.
 */
inline void fft2_unitary(std::vector<std::complex<double>>& data, int n)
{
    if (n <= 0 || data.size() != static_cast<std::size_t>(n) * static_cast<std::size_t>(n))
        throw InvalidArgument("fft2_unitary: data size must be n*n");
    auto* buf = reinterpret_cast<fftw_complex*>(data.data());
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        plan = fftw_plan_dft_2d(n, n, buf, buf, FFTW_FORWARD, FFTW_ESTIMATE);
    }
    if (!plan)
        throw NumericalError("fft2_unitary: FFTW could not create a plan");
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(detail::fftw_planner_mutex());
        fftw_destroy_plan(plan);
    }
    double const scale = 1.0 / static_cast<double>(n);
    for (auto& v : data)
        v *= scale;
}

}  // namespace spinorbit
