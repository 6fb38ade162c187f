#pragma once

// Power-of-two FFT and circle-grid spectral helpers.

#include <complex>
#include <vector>

namespace holodisc {

using cplx = std::complex<double>;

// In-place radix-2 FFT; n must be a power of two. sign=-1 forward, +1 inverse
// (inverse is unnormalized; divide by n yourself).
void fft_pow2(std::vector<cplx>& a, int sign);

// Forward DFT of real samples on the uniform grid theta_j = 2*pi*j/n.
std::vector<cplx> dft_real(const std::vector<double>& u);

// Cosine coefficients a_0..a_m of an even real density on the uniform circle
// grid: u(theta) ~= a_0 + sum_{k>=1} a_k cos(k theta). m <= n/2.
std::vector<double> cosine_coeffs(const std::vector<double>& u, int m);

// Evaluate a cosine series on the uniform n-grid (inverse of cosine_coeffs).
std::vector<double> cosine_eval_grid(const std::vector<double>& a, int n);

}  // namespace holodisc
