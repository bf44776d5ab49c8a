#include <cmath>

#include "rfgsnn/data/generators.hpp"

namespace rfgsnn::data {

std::vector<double> poisson_solve_1d(std::span<const double> g, double x0, double x1) {
  const std::size_t n = g.size();
  if (n < 3) throw DimensionError("poisson: need at least 3 grid points");
  if (!(x1 > x0)) throw ConfigError("poisson: empty interval");
  const double h = (x1 - x0) / static_cast<double>(n - 1);
  const std::size_t m = n - 2;

  // Thomas algorithm on the interior system (-1, 2, -1) u = h^2 g.
  std::vector<double> c(m), d(m);
  double denom = 2.0;
  c[0] = -1.0 / denom;
  d[0] = h * h * g[1] / denom;
  for (std::size_t i = 1; i < m; ++i) {
    denom = 2.0 + c[i - 1];
    c[i] = -1.0 / denom;
    d[i] = (h * h * g[i + 1] + d[i - 1]) / denom;
  }
  std::vector<double> u(n, 0.0);
  u[m] = d[m - 1];
  for (std::size_t i = m - 1; i-- > 0;) u[i + 1] = d[i] - c[i] * u[i + 2];
  for (double v : u)
    if (!std::isfinite(v)) throw NumericalError("poisson: non-finite solution");
  return u;
}

}  // namespace rfgsnn::data
