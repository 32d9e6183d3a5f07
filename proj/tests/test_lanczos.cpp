#include "doctest.h"

#include <cmath>
#include <vector>

#include "folspec/lanczos.hpp"

using folspec::LanczosOptions;
using folspec::lanczos_lowest;

namespace {

auto diag_apply(const std::vector<double>& d) {
  return [&d](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    y.resize(x.size());
    for (int i = 0; i < x.size(); ++i) y(i) = d[static_cast<std::size_t>(i)] * x(i);
  };
}

}  // namespace

TEST_CASE("lanczos finds the lowest eigenvalues of a diagonal operator") {
  const int n = 100;
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = i + 1.0;
  auto apply = diag_apply(d);

  LanczosOptions opts;
  opts.max_matvecs = 4000;
  auto res = lanczos_lowest(apply, n, 5, opts);
  REQUIRE(res.values.size() == 5);
  for (int i = 0; i < 5; ++i) {
    CHECK(res.values[static_cast<std::size_t>(i)] == doctest::Approx(i + 1.0).epsilon(1e-9));
    // residual check against the diagonal directly
    Eigen::VectorXd v = res.vectors.col(i);
    Eigen::VectorXd av(n);
    apply(v, av);
    CHECK((av - res.values[static_cast<std::size_t>(i)] * v).norm() < 1e-7);
    CHECK(v.norm() == doctest::Approx(1.0).epsilon(1e-10));
  }
  CHECK(res.certified);
}

TEST_CASE("lanczos resolves a triple degenerate ground state") {
  const int n = 60;
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = (i < 3) ? 1.0 : i + 2.0;
  auto apply = diag_apply(d);

  LanczosOptions opts;
  opts.max_matvecs = 6000;
  auto res = lanczos_lowest(apply, n, 4, opts);
  REQUIRE(res.values.size() == 4);
  CHECK(res.values[0] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.values[1] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.values[2] == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.values[3] == doctest::Approx(5.0).epsilon(1e-9));
  // the three ground vectors must be mutually orthonormal
  for (int i = 0; i < 3; ++i)
    for (int j = i + 1; j < 3; ++j)
      CHECK(std::abs(res.vectors.col(i).dot(res.vectors.col(j))) < 1e-8);
}

TEST_CASE("lanczos handles the periodic second difference with doubly degenerate levels") {
  const int n = 64;
  auto apply = [n](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    y.resize(n);
    for (int i = 0; i < n; ++i) {
      const int prev = (i + n - 1) % n, next = (i + 1) % n;
      y(i) = 2.0 * x(i) - x(prev) - x(next);
    }
  };
  LanczosOptions opts;
  opts.max_matvecs = 8000;
  auto res = lanczos_lowest(apply, n, 5, opts);
  // eigenvalues 4 sin^2(pi k / n), each nonzero one twice
  auto level = [n](int k) { return 4.0 * std::pow(std::sin(M_PI * k / n), 2); };
  REQUIRE(res.values.size() == 5);
  CHECK(std::abs(res.values[0]) < 1e-8);
  CHECK(res.values[1] == doctest::Approx(level(1)).epsilon(1e-8));
  CHECK(res.values[2] == doctest::Approx(level(1)).epsilon(1e-8));
  CHECK(res.values[3] == doctest::Approx(level(2)).epsilon(1e-8));
  CHECK(res.values[4] == doctest::Approx(level(2)).epsilon(1e-8));
}

TEST_CASE("lanczos reports deterministic results for a fixed seed") {
  const int n = 80;
  std::vector<double> d(n);
  for (int i = 0; i < n; ++i) d[static_cast<std::size_t>(i)] = std::cos(0.7 * i) + 2.5 + 0.1 * i;
  auto apply = diag_apply(d);
  LanczosOptions opts;
  opts.max_matvecs = 5000;
  opts.seed = 99;
  auto a = lanczos_lowest(apply, n, 6, opts);
  auto b = lanczos_lowest(apply, n, 6, opts);
  REQUIRE(a.values.size() == b.values.size());
  for (std::size_t i = 0; i < a.values.size(); ++i) CHECK(a.values[i] == b.values[i]);
  CHECK(a.matvecs == b.matvecs);
}

TEST_CASE("lanczos refuses impossible requests and exhausted budgets") {
  std::vector<double> d{1.0, 2.0, 3.0};
  auto apply = diag_apply(d);
  CHECK_THROWS_AS(lanczos_lowest(apply, 3, 4), folspec::ConfigError);
  CHECK_THROWS_AS(lanczos_lowest(apply, 3, 0), folspec::ConfigError);

  const int n = 400;
  std::vector<double> dense(n);
  for (int i = 0; i < n; ++i) dense[static_cast<std::size_t>(i)] = 1.0 + 1e-4 * i;
  auto slow = diag_apply(dense);
  LanczosOptions tiny;
  tiny.max_matvecs = 6;
  CHECK_THROWS_AS(lanczos_lowest(slow, n, 10, tiny), folspec::NoConvergence);
}

TEST_CASE("lanczos on a full matrix matches a dense eigensolver") {
  const int n = 40;
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(n, n);
  // deterministic symmetric test matrix
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) {
      const double v = std::sin(1.0 + 3.0 * i + 7.0 * j) / (1.0 + std::abs(i - j));
      m(i, j) = v;
      m(j, i) = v;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(m);
  auto apply = [&m](const Eigen::VectorXd& x, Eigen::VectorXd& y) { y = m * x; };
  LanczosOptions opts;
  opts.max_matvecs = 8000;
  auto res = lanczos_lowest(apply, n, 7, opts);
  for (int i = 0; i < 7; ++i)
    CHECK(res.values[static_cast<std::size_t>(i)] ==
          doctest::Approx(es.eigenvalues()(i)).epsilon(1e-8));
}
