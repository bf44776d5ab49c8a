#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rfgsnn/errors.hpp"

namespace rfgsnn::data {

enum class Kernel { Gaussian };

struct GrfSpec {
  std::vector<double> grid;  // strictly increasing
  double length_scale = 1.0;
  Kernel kernel = Kernel::Gaussian;
  double variance = 1.0;
  std::uint64_t seed = 0;

  void validate() const;
};

// Zero-mean Gaussian process on a fixed grid, k(x, x') =
// variance * exp(-(x - x')^2 / (2 l^2)). The jittered covariance is factored
// once; every draw is L z with z standard normal.
class GrfSampler {
 public:
  explicit GrfSampler(const GrfSpec& spec);

  std::size_t size() const { return n_; }
  std::vector<double> sample(std::mt19937_64& rng) const;

 private:
  std::size_t n_;
  std::vector<double> chol_;  // lower triangle, row-major n x n
};

// One draw using a generator seeded from spec.seed.
std::vector<double> grf_sample(const GrfSpec& spec);
// One draw from the caller's stream.
std::vector<double> grf_sample(const GrfSpec& spec, std::mt19937_64& rng);

// n points evenly spaced on [lo, hi], endpoints included.
std::vector<double> linspace(double lo, double hi, std::size_t n);

// Solves -u'' = g on a uniform grid over [x0, x1] with u = 0 at both ends,
// second-order central differences. g holds values at every node including
// the boundary nodes, which are ignored; the result is zero there.
std::vector<double> poisson_solve_1d(std::span<const double> g, double x0 = -1.0,
                                     double x1 = 1.0);

struct PdeGrid {
  std::size_t nx = 100;
  std::size_t nt = 100;
  double x0 = 0.0;
  double x1 = 1.0;
  double t_end = 1.0;

  void validate() const;
  std::vector<double> xs() const { return linspace(x0, x1, nx); }
  // nt output times evenly spaced on [0, t_end].
  std::vector<double> ts() const { return linspace(0.0, t_end, nt); }
};

// u_t = D u_xx + k u^2 + f(x) with zero initial and boundary values.
// Central differences in x, classical RK4 on internal substeps with
// dt <= 0.4 dx^2 / D. Returns u sampled at grid.ts(), row-major [nt][nx].
std::vector<double> reaction_diffusion_solve(std::span<const double> f, double diffusion,
                                             double reaction, const PdeGrid& grid);

// 2D Mexican hat wavelet.
double mexican_hat(double x, double y, double sigma);

}  // namespace rfgsnn::data
