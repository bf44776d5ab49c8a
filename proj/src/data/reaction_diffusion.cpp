#include <algorithm>
#include <cmath>

#include "rfgsnn/data/generators.hpp"

namespace rfgsnn::data {

void PdeGrid::validate() const {
  if (nx < 3) throw ConfigError("pde grid: need at least 3 spatial points");
  if (nt < 2) throw ConfigError("pde grid: need at least 2 time points");
  if (!(x1 > x0)) throw ConfigError("pde grid: empty spatial interval");
  if (!(t_end > 0.0)) throw ConfigError("pde grid: t_end must be positive");
}

namespace {

void rhs(const std::vector<double>& u, std::span<const double> f, double dcoef, double k,
         double inv_dx2, std::vector<double>& out) {
  const std::size_t n = u.size();
  out[0] = 0.0;
  out[n - 1] = 0.0;
  for (std::size_t i = 1; i + 1 < n; ++i)
    out[i] = dcoef * (u[i - 1] - 2.0 * u[i] + u[i + 1]) * inv_dx2 + k * u[i] * u[i] + f[i];
}

}  // namespace

std::vector<double> reaction_diffusion_solve(std::span<const double> f, double diffusion,
                                             double reaction, const PdeGrid& grid) {
  grid.validate();
  if (f.size() != grid.nx) throw DimensionError("reaction-diffusion: source size != nx");
  if (!(diffusion > 0.0)) throw ConfigError("reaction-diffusion: diffusion must be positive");

  const std::size_t n = grid.nx;
  const double dx = (grid.x1 - grid.x0) / static_cast<double>(n - 1);
  const double inv_dx2 = 1.0 / (dx * dx);
  const double out_dt = grid.t_end / static_cast<double>(grid.nt - 1);
  const double dt_max = 0.4 * dx * dx / diffusion;
  const auto substeps = static_cast<std::size_t>(std::ceil(out_dt / dt_max - 1e-12));
  const double dt = out_dt / static_cast<double>(std::max<std::size_t>(substeps, 1));

  std::vector<double> u(n, 0.0), k1(n), k2(n), k3(n), k4(n), tmp(n);
  std::vector<double> out(grid.nt * n, 0.0);
  for (std::size_t s = 1; s < grid.nt; ++s) {
    for (std::size_t sub = 0; sub < std::max<std::size_t>(substeps, 1); ++sub) {
      rhs(u, f, diffusion, reaction, inv_dx2, k1);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k1[i];
      rhs(tmp, f, diffusion, reaction, inv_dx2, k2);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + 0.5 * dt * k2[i];
      rhs(tmp, f, diffusion, reaction, inv_dx2, k3);
      for (std::size_t i = 0; i < n; ++i) tmp[i] = u[i] + dt * k3[i];
      rhs(tmp, f, diffusion, reaction, inv_dx2, k4);
      for (std::size_t i = 0; i < n; ++i)
        u[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    for (double v : u)
      if (!std::isfinite(v)) throw NumericalError("reaction-diffusion: solution blew up");
    std::copy(u.begin(), u.end(), out.begin() + static_cast<std::ptrdiff_t>(s * n));
  }
  return out;
}

}  // namespace rfgsnn::data
