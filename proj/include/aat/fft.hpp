#pragma once

#include <complex>
#include <vector>

namespace aat {

// Real-to-complex FFT of size n (n/2 + 1 output bins), backed by FFTW with
// cached plans. Thread-safe; planning is serialized internally.
std::vector<std::complex<double>> rfft(const std::vector<double>& in, int n);

// Inverse of rfft, already scaled by 1/n.
std::vector<double> irfft(const std::vector<std::complex<double>>& in, int n);

// Unnormalized complex-to-real transform: y[t] = sum_k X_k e^{+2pi i k t / n}
// over the Hermitian-extended spectrum. Used for spectral adjoints.
std::vector<double> irfft_unscaled(const std::vector<std::complex<double>>& in,
                                   int n);

// Full linear convolution via FFT, output length a.size() + b.size() - 1.
std::vector<double> fft_convolve(const std::vector<double>& a,
                                 const std::vector<double>& b);

}  // namespace aat
