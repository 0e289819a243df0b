#include <lapacke.h>

#include <cmath>
#include <cstdint>
#include <vector>

int main() {
  const lapack_int n = 320;
  std::vector<double> b(n * n), a(n * n, 0.0), w(n);
  std::uint64_t s = 0x2545F4914F6CDD1DULL;
  for (auto& v : b) {
    s = s * 6364136223846793005ULL + 1442695040888963407ULL;
    v = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
  }
  for (lapack_int i = 0; i < n; ++i)
    for (lapack_int j = 0; j < n; ++j)
      for (lapack_int k = 0; k < n; ++k) a[i + j * n] += b[i + k * n] * b[j + k * n] / n;
  std::vector<double> v = a;
  if (LAPACKE_dsyevd(LAPACK_COL_MAJOR, 'V', 'L', n, v.data(), n, w.data()) != 0) return 1;
  double res = 0.0, norm = 0.0;
  for (lapack_int i = 0; i < n; ++i) {
    for (lapack_int j = 0; j < n; ++j) {
      double av = 0.0;
      for (lapack_int k = 0; k < n; ++k) av += a[i + k * n] * v[k + j * n];
      res += std::pow(av - v[i + j * n] * w[j], 2);
      norm += a[i + j * n] * a[i + j * n];
    }
  }
  return std::sqrt(res) <= 1e-10 * std::sqrt(norm) ? 0 : 2;
}
