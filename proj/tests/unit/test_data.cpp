#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "doctest.h"
#include "rfgsnn/data/datasets.hpp"
#include "rfgsnn/data/generators.hpp"

using namespace rfgsnn;
using namespace rfgsnn::data;

namespace fs = std::filesystem;

namespace {

double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("rfgsnn_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("grf determinism and validation") {
  GrfSpec spec{linspace(0.0, 1.0, 40), 0.2, Kernel::Gaussian, 1.0, 42};
  CHECK(grf_sample(spec) == grf_sample(spec));
  auto other = spec;
  other.seed = 43;
  CHECK(grf_sample(spec) != grf_sample(other));

  auto bad = spec;
  bad.length_scale = 0.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = spec;
  bad.grid = {0.0, 0.5, 0.5};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("grf with a long length scale is nearly flat") {
  GrfSampler s({linspace(0.0, 1.0, 30), 100.0, Kernel::Gaussian, 1.0, 0});
  std::mt19937_64 rng(1);
  int flat = 0;
  for (int i = 0; i < 1000; ++i) {
    const auto v = s.sample(rng);
    const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
    flat += (*hi - *lo) < 0.1;
  }
  CHECK(flat >= 950);
}

TEST_CASE("grf moments match the kernel") {
  const auto grid = linspace(0.0, 1.0, 21);
  const double ell = 0.2, var = 1.5;
  GrfSampler s({grid, ell, Kernel::Gaussian, var, 0});
  std::mt19937_64 rng(7);
  const int draws = 10000;
  const std::size_t lag = 3;
  double mean = 0.0, second = 0.0, cross = 0.0;
  std::size_t n = 0, m = 0;
  for (int d = 0; d < draws; ++d) {
    const auto v = s.sample(rng);
    for (std::size_t i = 0; i < v.size(); ++i) {
      mean += v[i];
      second += v[i] * v[i];
      ++n;
      if (i + lag < v.size()) {
        cross += v[i] * v[i + lag];
        ++m;
      }
    }
  }
  mean /= n;
  const double variance = second / n - mean * mean;
  const double h = grid[lag] - grid[0];
  const double cov = var * std::exp(-h * h / (2 * ell * ell));
  CHECK(std::abs(mean) < 0.05 * std::sqrt(var));
  CHECK(std::abs(variance - var) / var < 0.05);
  CHECK(std::abs(cross / m - cov) / cov < 0.05);
}

TEST_CASE("poisson solver oracles") {
  SUBCASE("zero forcing") {
    const std::vector<double> g(11, 0.0);
    for (double u : poisson_solve_1d(g)) CHECK(u == 0.0);
  }
  SUBCASE("constant forcing is exact") {
    const auto x = linspace(-1.0, 1.0, 41);
    const std::vector<double> g(x.size(), 2.0);
    const auto u = poisson_solve_1d(g);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(u[i] - (1 - x[i] * x[i])) < 1e-12);
  }
  SUBCASE("manufactured solution converges at second order") {
    double prev = 0.0;
    for (std::size_t n : {21u, 41u, 81u, 161u}) {
      const auto x = linspace(-1.0, 1.0, n);
      std::vector<double> g(n), exact(n);
      for (std::size_t i = 0; i < n; ++i) {
        g[i] = std::numbers::pi * std::numbers::pi * std::sin(std::numbers::pi * x[i]);
        exact[i] = std::sin(std::numbers::pi * x[i]);
      }
      const double err = max_abs_diff(poisson_solve_1d(g), exact);
      if (prev > 0.0) CHECK(std::log2(prev / err) >= 1.9);
      prev = err;
    }
  }
  SUBCASE("linearity and the maximum principle") {
    const auto x = linspace(-1.0, 1.0, 60);
    const auto g1 = grf_sample({x, 0.2, Kernel::Gaussian, 1.0, 1});
    const auto g2 = grf_sample({x, 0.2, Kernel::Gaussian, 1.0, 2});
    std::vector<double> sum(x.size()), pos(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      sum[i] = g1[i] + g2[i];
      pos[i] = g1[i] * g1[i];
    }
    const auto u1 = poisson_solve_1d(g1), u2 = poisson_solve_1d(g2), us = poisson_solve_1d(sum);
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(us[i] - u1[i] - u2[i]) < 1e-10);
    for (double u : poisson_solve_1d(pos)) CHECK(u >= 0.0);
  }
  SUBCASE("too few nodes") {
    CHECK_THROWS_AS(poisson_solve_1d(std::vector<double>{1.0, 1.0}), DimensionError);
  }
}

TEST_CASE("diffusion-reaction solver oracles") {
  PdeGrid grid;
  grid.nx = 41;
  grid.nt = 11;

  SUBCASE("zero forcing stays zero") {
    const std::vector<double> f(grid.nx, 0.0);
    for (double u : reaction_diffusion_solve(f, 0.01, 0.01, grid)) CHECK(u == 0.0);
  }

  SUBCASE("boundaries are held at zero") {
    const auto f = grf_sample({grid.xs(), 1.0, Kernel::Gaussian, 1.0, 3});
    const auto u = reaction_diffusion_solve(f, 0.01, 0.01, grid);
    REQUIRE(u.size() == grid.nt * grid.nx);
    for (std::size_t t = 0; t < grid.nt; ++t) {
      CHECK(u[t * grid.nx] == 0.0);
      CHECK(u[t * grid.nx + grid.nx - 1] == 0.0);
    }
  }

  SUBCASE("linear problem matches the sine-series solution") {
    // f = sin(pi x) + 0.5 sin(3 pi x); each mode relaxes independently.
    PdeGrid fine;
    fine.nx = 101;
    fine.nt = 11;
    const double D = 0.01;
    const auto x = fine.xs(), ts = fine.ts();
    std::vector<double> f(fine.nx);
    for (std::size_t i = 0; i < fine.nx; ++i)
      f[i] = std::sin(std::numbers::pi * x[i]) + 0.5 * std::sin(3 * std::numbers::pi * x[i]);
    const auto u = reaction_diffusion_solve(f, D, 0.0, fine);
    double err = 0.0;
    for (std::size_t t = 0; t < fine.nt; ++t) {
      for (std::size_t i = 0; i < fine.nx; ++i) {
        double exact = 0.0;
        for (auto [n, b] : {std::pair{1, 1.0}, std::pair{3, 0.5}}) {
          const double lam = D * n * n * std::numbers::pi * std::numbers::pi;
          exact += b * (1 - std::exp(-lam * ts[t])) / lam * std::sin(n * std::numbers::pi * x[i]);
        }
        err = std::max(err, std::abs(u[t * fine.nx + i] - exact));
      }
    }
    CHECK(err < 1e-4);
  }

  SUBCASE("nonlinear self-convergence in space") {
    // Nested grids share every coarse node; f is drawn once on the finest.
    const std::size_t coarse = 26;
    const std::size_t sizes[] = {coarse, 2 * coarse - 1, 4 * coarse - 3};
    const auto xf = linspace(0.0, 1.0, sizes[2]);
    const auto ff = grf_sample({xf, 1.0, Kernel::Gaussian, 1.0, 5});
    std::vector<std::vector<double>> at_coarse;
    for (std::size_t k = 0; k < 3; ++k) {
      PdeGrid g;
      g.nx = sizes[k];
      g.nt = 2;
      const std::size_t stride = (sizes[2] - 1) / (sizes[k] - 1);
      std::vector<double> f(g.nx);
      for (std::size_t i = 0; i < g.nx; ++i) f[i] = 10.0 * ff[i * stride];
      const auto u = reaction_diffusion_solve(f, 0.01, 0.01, g);
      std::vector<double> last(coarse);
      const std::size_t s = (sizes[k] - 1) / (coarse - 1);
      for (std::size_t i = 0; i < coarse; ++i) last[i] = u[g.nx + i * s];
      at_coarse.push_back(last);
    }
    const double e1 = max_abs_diff(at_coarse[0], at_coarse[1]);
    const double e2 = max_abs_diff(at_coarse[1], at_coarse[2]);
    CHECK(std::log2(e1 / e2) >= 1.9);
  }

  SUBCASE("blow-up is reported") {
    PdeGrid g;
    g.nx = 21;
    g.nt = 2;
    g.t_end = 50.0;
    const std::vector<double> f(g.nx, 5.0);
    CHECK_THROWS_AS(reaction_diffusion_solve(f, 0.01, 5.0, g), NumericalError);
  }
}

TEST_CASE("mexican hat") {
  CHECK(mexican_hat(0, 0, 0.8) == doctest::Approx(1.0 / (std::numbers::pi * std::pow(0.8, 4))));
  CHECK(mexican_hat(0, 0, 0.8) == doctest::Approx(0.77713).epsilon(1e-5));
  const double r = std::sqrt(2.0) * 0.8;
  CHECK(std::abs(mexican_hat(r / std::sqrt(2.0), r / std::sqrt(2.0), 0.8)) < 1e-15);
  CHECK(mexican_hat(0.3, -0.7, 0.8) == mexican_hat(-0.7, 0.3, 0.8));
  CHECK_THROWS_AS(mexican_hat(0, 0, 0.0), ConfigError);
}

TEST_CASE("dataset shapes and splits") {
  DataConfig cfg;
  cfg.seed = 3;

  const auto mh = build_dataset(Task::MexicanHat, cfg);
  CHECK(mh.train.size() == 10000);
  CHECK(mh.test.size() == 100 * 100);
  CHECK(mh.axes.empty());
  CHECK(mh.input_size() == 2);
  for (std::size_t r : mh.train) {
    const auto& p = mh.inputs[r];
    CHECK(std::abs(p[0]) <= 1.0);
    CHECK(std::abs(p[1]) <= 1.0);
    CHECK(mh.targets[r] == mexican_hat(p[0], p[1], 0.8));
  }

  const auto po = build_dataset(Task::Poisson1d, cfg);
  CHECK(po.train.size() == 800);
  CHECK(po.test.size() == 800);
  CHECK(po.grid_size() == 100);
  CHECK(po.input_size() == cfg.sensors);

  auto small = cfg;
  small.dr_functions = 4;
  small.dr_train = 2;
  const auto dr = build_dataset(Task::DiffusionReaction, small);
  REQUIRE(dr.axes.size() == 2);
  CHECK(dr.axes[0].size() == 100);
  CHECK(dr.axes[1].size() == 100);
  CHECK(dr.grid_size() == 100 * 100);

  // Splits partition the records and depend only on the seed.
  std::vector<std::size_t> all(po.train);
  all.insert(all.end(), po.test.begin(), po.test.end());
  std::sort(all.begin(), all.end());
  std::vector<std::size_t> expect(po.records());
  std::iota(expect.begin(), expect.end(), 0);
  CHECK(all == expect);
  const auto again = build_dataset(Task::Poisson1d, cfg);
  CHECK(again.train == po.train);
  CHECK(again.targets == po.targets);
  auto reseeded = cfg;
  reseeded.seed = 4;
  CHECK(build_dataset(Task::Poisson1d, reseeded).train != po.train);

  CHECK_THROWS_AS(parse_task("heat"), ConfigError);
  CHECK(parse_task(task_name(Task::DiffusionReaction)) == Task::DiffusionReaction);
}

TEST_CASE("poisson targets solve the sampled forcing") {
  DataConfig cfg;
  cfg.poisson_functions = 6;
  cfg.poisson_train = 3;
  const auto ds = build_dataset(Task::Poisson1d, cfg);
  for (std::size_t r = 0; r < ds.records(); ++r) {
    const double* u = ds.targets.data() + r * ds.grid_size();
    CHECK(u[0] == 0.0);
    CHECK(u[ds.grid_size() - 1] == 0.0);
  }
}

TEST_CASE("dataset round trip and content hash") {
  CHECK(content_hash("") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  CHECK(content_hash("hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a");

  DataConfig cfg;
  cfg.seed = 9;
  cfg.poisson_functions = 10;
  cfg.poisson_train = 6;
  const auto ds = build_dataset(Task::Poisson1d, cfg);
  const auto dir = scratch("roundtrip");
  write_dataset(ds, dir);
  const auto back = read_dataset(dir);
  CHECK(back.sensors == ds.sensors);
  CHECK(back.axes == ds.axes);
  CHECK(back.inputs == ds.inputs);
  CHECK(back.targets == ds.targets);
  CHECK(back.train == ds.train);
  CHECK(back.test == ds.test);
  CHECK(back.config.poisson_length_scale == ds.config.poisson_length_scale);

  {
    std::ofstream out(dir / "targets.csv", std::ios::app);
    out << "\n";
  }
  CHECK_THROWS_AS(read_dataset(dir), DimensionError);
  fs::remove_all(dir);
}
