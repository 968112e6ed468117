#include <lapacke.h>

#include <cmath>
#include <cstdio>
#include <vector>

// Exit 0 when dsyevd returns correct eigenpairs for a 200 x 200 symmetric matrix.
int main() {
  const int n = 200;
  std::vector<double> a(n * n), h(n * n), w(n);
  unsigned s = 12345u;
  for (int j = 0; j < n; ++j)
    for (int i = 0; i <= j; ++i) {
      s = s * 1664525u + 1013904223u;
      a[i + j * n] = a[j + i * n] = double(s >> 8) / double(1u << 24) - 0.5;
    }
  h = a;
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, h.data(), n, w.data()) != 0) return 1;
  double worst = 0.0;
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      double r = -w[k] * h[i + k * n];
      for (int j = 0; j < n; ++j) r += a[i + j * n] * h[j + k * n];
      worst = std::fmax(worst, std::fabs(r));
    }
  std::printf("%g\n", worst);
  return worst < 1e-9 ? 0 : 1;
}
