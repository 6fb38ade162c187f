#include "holodisc/fft.hpp"

#include <cassert>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace holodisc {

void fft_pow2(std::vector<cplx>& a, int sign) {
  const size_t n = a.size();
  if (n == 0 || (n & (n - 1)) != 0) throw std::invalid_argument("fft_pow2: size must be a power of two");
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = sign * 2.0 * std::numbers::pi / double(len);
    const cplx wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      cplx w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        cplx u = a[i + k];
        cplx v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<cplx> dft_real(const std::vector<double>& u) {
  std::vector<cplx> a(u.size());
  for (size_t i = 0; i < u.size(); ++i) a[i] = cplx(u[i], 0.0);
  fft_pow2(a, -1);
  return a;
}

std::vector<double> cosine_coeffs(const std::vector<double>& u, int m) {
  const int n = int(u.size());
  assert(m <= n / 2);
  std::vector<cplx> hat = dft_real(u);
  std::vector<double> a(size_t(m) + 1);
  a[0] = hat[0].real() / double(n);
  for (int k = 1; k <= m; ++k) a[size_t(k)] = 2.0 * hat[size_t(k)].real() / double(n);
  return a;
}

std::vector<double> cosine_eval_grid(const std::vector<double>& a, int n) {
  std::vector<cplx> hat(size_t(n), cplx(0.0, 0.0));
  hat[0] = cplx(a[0] * n, 0.0);
  for (size_t k = 1; k < a.size() && int(k) <= n / 2; ++k) {
    hat[k] = cplx(0.5 * a[k] * n, 0.0);
    hat[size_t(n) - k] = cplx(0.5 * a[k] * n, 0.0);
  }
  fft_pow2(hat, +1);
  std::vector<double> u(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) u[size_t(i)] = hat[size_t(i)].real() / double(n);
  return u;
}

}  // namespace holodisc
