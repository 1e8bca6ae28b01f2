#ifndef TENSASYM_FFT_HPP
#define TENSASYM_FFT_HPP

#include <fftw3.h>

#include <complex>
#include <mutex>
#include <vector>

#include "common.hpp"

namespace tensasym::fft {

// FFTW planning is not thread safe; execution is.
inline std::mutex& plan_mutex() {
    static std::mutex m;
    return m;
}

/// Unnormalized real-to-complex transform, n/2+1 outputs.
inline std::vector<std::complex<double>> forward(const std::vector<double>& x) {
    const int n = static_cast<int>(x.size());
    double* in = fftw_alloc_real(n);
    fftw_complex* out = fftw_alloc_complex(n / 2 + 1);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        plan = fftw_plan_dft_r2c_1d(n, in, out, FFTW_ESTIMATE);
    }
    std::copy(x.begin(), x.end(), in);
    fftw_execute(plan);
    std::vector<std::complex<double>> r(n / 2 + 1);
    for (int k = 0; k <= n / 2; ++k) r[k] = {out[k][0], out[k][1]};
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return r;
}

/// Inverse of forward, including the 1/n factor.
inline std::vector<double> inverse(const std::vector<std::complex<double>>& X, int n) {
    fftw_complex* in = fftw_alloc_complex(n / 2 + 1);
    double* out = fftw_alloc_real(n);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        plan = fftw_plan_dft_c2r_1d(n, in, out, FFTW_ESTIMATE);
    }
    for (int k = 0; k <= n / 2; ++k) {
        in[k][0] = X[k].real();
        in[k][1] = X[k].imag();
    }
    fftw_execute(plan);
    std::vector<double> r(out, out + n);
    for (double& v : r) v /= n;
    {
        std::lock_guard<std::mutex> lk(plan_mutex());
        fftw_destroy_plan(plan);
    }
    fftw_free(in);
    fftw_free(out);
    return r;
}

/// r[j] = (1/n) sum_k x[(j-k) mod n] y[k]
inline std::vector<double> circular_mean_convolution(const std::vector<double>& x, const std::vector<double>& y) {
    const int n = static_cast<int>(x.size());
    if (y.size() != x.size()) throw PreconditionError("circular convolution needs equal lengths");
    auto X = forward(x);
    auto Y = forward(y);
    for (std::size_t k = 0; k < X.size(); ++k) X[k] *= Y[k] / static_cast<double>(n);
    return inverse(X, n);
}

/// Derivative of a sampled periodic function (period L) by multiplying with i*omega.
inline std::vector<double> spectral_derivative(const std::vector<double>& x, double L) {
    const int n = static_cast<int>(x.size());
    auto X = forward(x);
    for (int k = 0; k <= n / 2; ++k) {
        double w = 2.0 * kPi * k / L;
        if (n % 2 == 0 && k == n / 2) w = 0.0;  // Nyquist mode has no odd part
        X[k] *= std::complex<double>(0.0, w);
    }
    return inverse(X, n);
}

}  // namespace tensasym::fft

#endif
