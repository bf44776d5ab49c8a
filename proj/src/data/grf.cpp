#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "rfgsnn/data/generators.hpp"

namespace rfgsnn::data {

void GrfSpec::validate() const {
  if (grid.empty()) throw ConfigError("grf: empty grid");
  if (!(length_scale > 0.0) || !std::isfinite(length_scale))
    throw ConfigError("grf: length scale must be positive");
  if (!(variance > 0.0) || !std::isfinite(variance))
    throw ConfigError("grf: variance must be positive");
  for (std::size_t i = 1; i < grid.size(); ++i)
    if (!(grid[i] > grid[i - 1])) throw ConfigError("grf: grid must be strictly increasing");
}

GrfSampler::GrfSampler(const GrfSpec& spec) : n_(spec.grid.size()) {
  spec.validate();
  Eigen::MatrixXd cov(n_, n_);
  const double inv = 1.0 / (2.0 * spec.length_scale * spec.length_scale);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j < n_; ++j) {
      const double d = spec.grid[i] - spec.grid[j];
      cov(i, j) = spec.variance * std::exp(-d * d * inv);
    }
  // Smooth kernels on dense grids are numerically singular.
  cov.diagonal().array() += 1e-10 * spec.variance;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("grf: covariance not positive definite");
  const Eigen::MatrixXd l = llt.matrixL();
  chol_.assign(n_ * n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i)
    for (std::size_t j = 0; j <= i; ++j) chol_[i * n_ + j] = l(i, j);
}

std::vector<double> GrfSampler::sample(std::mt19937_64& rng) const {
  std::normal_distribution<double> normal;
  std::vector<double> z(n_);
  for (auto& v : z) v = normal(rng);
  std::vector<double> out(n_, 0.0);
  for (std::size_t i = 0; i < n_; ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j <= i; ++j) acc += chol_[i * n_ + j] * z[j];
    out[i] = acc;
  }
  return out;
}

std::vector<double> grf_sample(const GrfSpec& spec) {
  std::mt19937_64 rng(spec.seed);
  return grf_sample(spec, rng);
}

std::vector<double> grf_sample(const GrfSpec& spec, std::mt19937_64& rng) {
  return GrfSampler(spec).sample(rng);
}

std::vector<double> linspace(double lo, double hi, std::size_t n) {
  std::vector<double> out(n);
  if (n == 1) {
    out[0] = lo;
    return out;
  }
  for (std::size_t i = 0; i < n; ++i)
    out[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(n - 1);
  out.back() = hi;
  return out;
}

double mexican_hat(double x, double y, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("mexican_hat: sigma must be positive");
  const double s2 = sigma * sigma;
  const double r2 = (x * x + y * y) / s2;
  return (1.0 - 0.5 * r2) * std::exp(-0.5 * r2) / (std::numbers::pi * s2 * s2);
}

}  // namespace rfgsnn::data
