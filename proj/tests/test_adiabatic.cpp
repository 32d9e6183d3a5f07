#include "doctest.h"

#include <cmath>
#include <vector>

#include "folspec/adiabatic.hpp"
#include "folspec/models.hpp"
#include "folspec/operators.hpp"

using folspec::Bigrade;
using folspec::build_fibered_model;
using folspec::build_flat_model;
using folspec::LeafwiseDistribution;
using folspec::TestFunction;

namespace {

constexpr double four_pi_sq = 39.478417604357434;

}  // namespace

TEST_CASE("counting coefficient for dense 1d leaves is lambda over four pi") {
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  auto NF = folspec::leafwise_distribution_flat(kron, Bigrade{0, 0});
  // (4 pi)^{-1/2}/Gamma(3/2) * Int_0^lambda sqrt(lambda-tau) dtau/(2 pi sqrt(tau))
  //   = lambda / (4 pi) via the Beta(3/2,1/2) identity
  for (double lambda : {1.0, 10.0, 100.0, 987.0}) {
    const double expected = lambda / (4.0 * M_PI);
    CHECK(folspec::rhs_counting(NF, lambda, 1) == doctest::Approx(expected).epsilon(1e-9));
  }
  CHECK(folspec::rhs_counting(NF, -1.0, 1) == 0.0);
  CHECK(folspec::rhs_counting(NF, 0.0, 1) == 0.0);
  CHECK_THROWS_AS(folspec::rhs_counting(NF, 1.0, 0), folspec::ConfigError);
}

TEST_CASE("counting coefficient for codimension two matches the ellipsoid volume") {
  // dense line in T^3: q = 2, RHS = lambda^{3/2} / (6 pi^2)
  auto m = build_flat_model(3, 1, {{1.0, std::sqrt(2.0), std::sqrt(3.0)}});
  REQUIRE(m.q == 2);
  auto NF = folspec::leafwise_distribution_flat(m, Bigrade{0, 0});
  for (double lambda : {1.0, 25.0, 300.0}) {
    const double expected = std::pow(lambda, 1.5) / (6.0 * M_PI * M_PI);
    CHECK(folspec::rhs_counting(NF, lambda, 2) == doctest::Approx(expected).epsilon(1e-9));
  }
}

TEST_CASE("counting coefficient over fibration atoms reduces to a finite sum") {
  auto axis = build_flat_model(2, 1, {{1.0, 0.0}});
  auto NF = folspec::leafwise_distribution_flat(axis, Bigrade{0, 0}, 1000.0);
  // lambda below the first positive atom: only tau = 0 contributes,
  // RHS = sqrt(lambda)/pi; at lambda = 2 pi^2 this is sqrt(2)
  const double l0 = 2.0 * M_PI * M_PI;
  CHECK(folspec::rhs_counting(NF, l0, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-12));
  // lambda = 20 pi^2 admits m = +-1 (tau = 4 pi^2) and m = +-2 (tau = 16 pi^2):
  // (2 sqrt(5) pi + 2*4 pi + 2*2 pi)/pi
  const double l1 = 5.0 * four_pi_sq;
  CHECK(folspec::rhs_counting(NF, l1, 1) ==
        doctest::Approx(2.0 * std::sqrt(5.0) + 12.0).epsilon(1e-12));
  // reaching past the completeness bound is an error
  CHECK_THROWS_AS(folspec::rhs_counting(NF, 2000.0, 1), folspec::ConfigError);
}

TEST_CASE("heat prediction for dense 1d leaves is the closed form") {
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  auto NF = folspec::leafwise_distribution_flat(kron, Bigrade{0, 0});
  // Laplace transform of sqrt(tau)/pi is 1/(2 sqrt(pi t));
  // with the (4 pi t)^{-1/2} h^{-1} prefactor: 1/(4 pi t h)
  for (double t : {0.1, 0.5, 2.0})
    for (double h : {1.0, 0.5, 0.1}) {
      const double expected = 1.0 / (4.0 * M_PI * t * h);
      CHECK(folspec::rhs_heat(NF, t, h, 1) == doctest::Approx(expected).epsilon(1e-10));
    }
  CHECK_THROWS_AS(folspec::rhs_heat(NF, 0.0, 0.5, 1), folspec::ConfigError);
  CHECK_THROWS_AS(folspec::rhs_heat(NF, 1.0, 0.0, 1), folspec::ConfigError);
}

TEST_CASE("heat integral over fibration atoms is the theta series") {
  auto axis = build_flat_model(2, 1, {{1.0, 0.0}});
  auto NF = folspec::leafwise_distribution_flat(axis, Bigrade{0, 0}, 2000.0);
  const double t = 0.3;
  double theta = 1.0;
  for (int m = 1; m < 50; ++m) theta += 2.0 * std::exp(-t * four_pi_sq * m * m);
  CHECK(folspec::leafwise_heat_integral(NF, t) == doctest::Approx(theta).epsilon(1e-13));
}

TEST_CASE("gaussian trace functional separates into the heat prediction") {
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  auto NF = folspec::leafwise_distribution_flat(kron, Bigrade{0, 0});
  for (double t : {0.1, 0.5, 1.0}) {
    const double via_trace = folspec::rhs_trace_of_function(NF, TestFunction::gaussian(t), 1);
    const double via_heat = folspec::rhs_heat(NF, t, 0.37, 1) * 0.37;  // h^q cancels
    CHECK(std::abs(via_trace - via_heat) <= 1e-8 * std::abs(via_heat));
  }

  auto axis = build_flat_model(2, 1, {{1.0, 0.0}});
  auto aNF = folspec::leafwise_distribution_flat(axis, Bigrade{0, 0}, 3000.0);
  for (double t : {0.2, 1.0}) {
    const double via_trace = folspec::rhs_trace_of_function(aNF, TestFunction::gaussian(t), 1);
    const double via_heat = folspec::rhs_heat(aNF, t, 0.5, 1) * 0.5;
    CHECK(std::abs(via_trace - via_heat) <= 1e-8 * std::abs(via_heat));
  }
}

TEST_CASE("bump trace functional matches a direct fine-grid integral") {
  auto axis = build_flat_model(2, 1, {{1.0, 0.0}});
  auto NF = folspec::leafwise_distribution_flat(axis, Bigrade{0, 0}, 1000.0);
  // support (1,3) only sees the tau = 0 atom; independent Simpson oracle for
  // (1/(2 pi)) Int_1^3 sigma^{-1/2} (1 + cos(pi (sigma - 2)))/2 dsigma
  auto f = TestFunction::bump(1.0, 3.0);
  const int n = 20000;
  const double a = 1.0, b = 3.0, hstep = (b - a) / n;
  double simpson = f(a) / std::sqrt(a) + f(b) / std::sqrt(b);
  for (int i = 1; i < n; ++i) {
    const double x = a + i * hstep;
    simpson += (i % 2 ? 4.0 : 2.0) * f(x) / std::sqrt(x);
  }
  simpson *= hstep / 3.0;
  const double expected = simpson / (2.0 * M_PI);
  CHECK(folspec::rhs_trace_of_function(NF, f, 1) == doctest::Approx(expected).epsilon(1e-9));
}

TEST_CASE("narrow smoothed indicator approximates the counting coefficient") {
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  auto NF = folspec::leafwise_distribution_flat(kron, Bigrade{0, 0});
  const double lambda = 40.0;
  const double counting = folspec::rhs_counting(NF, lambda, 1);
  const double traced =
      folspec::rhs_trace_of_function(NF, TestFunction::smoothed_indicator(lambda, 1e-3), 1);
  CHECK(traced == doctest::Approx(counting).epsilon(1e-3));
}

TEST_CASE("exponent fit recovers exact and noisy power laws") {
  // exact doubling: slope exactly one
  auto fit = folspec::estimate_r_exponent({10, 20, 40}, {0.4, 0.2, 0.1});
  CHECK(fit.r == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(fit.residual < 1e-12);
  CHECK_FALSE(fit.neg_infinity);

  auto fit2 = folspec::estimate_r_exponent({100, 401, 1602, 6398}, {0.2, 0.1, 0.05, 0.025}, 1);
  CHECK(fit2.r == doctest::Approx(2.0).epsilon(2e-3));
  CHECK(fit2.bracket_hi == 1.0);

  auto zero = folspec::estimate_r_exponent({0, 0, 0}, {0.4, 0.2, 0.1});
  CHECK(zero.neg_infinity);
  CHECK(std::isinf(zero.r));
  CHECK(zero.r < 0);

  CHECK_THROWS_AS(folspec::estimate_r_exponent({1, 2}, {0.4, 0.2, 0.1}), folspec::ConfigError);
  CHECK_THROWS_AS(folspec::estimate_r_exponent({0, 0, 5}, {0.4, 0.2, 0.1}),
                  folspec::InsufficientData);
}

TEST_CASE("exponent fit on real dense-leaf counts lands near the codimension") {
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  const std::vector<double> schedule{0.2, 0.1, 0.05, 0.025, 0.0125};
  std::vector<long long> low, high;
  for (double h : schedule) {
    low.push_back(folspec::count_modes(kron, Bigrade{0, 0}, h, 10.0));
    high.push_back(folspec::count_modes(kron, Bigrade{0, 0}, h, 100.0));
  }
  // at lambda = 100 the counts are large and the slope settles close to q = 1
  auto clean = folspec::estimate_r_exponent(high, schedule, 1);
  CHECK(clean.r > 0.95);
  CHECK(clean.r < 1.05);
  // at lambda = 10 only a handful of modes are admitted per h and the lattice
  // noise biases the slope upward; it stays near q but past the clean window
  auto noisy = folspec::estimate_r_exponent(low, schedule, 1);
  CHECK(noisy.r > 0.9);
  CHECK(noisy.r < 1.2);
}

TEST_CASE("flat sweep fills counts, ratios, and exponents with no flags") {
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  const std::vector<double> schedule{0.2, 0.1, 0.05};
  const std::vector<double> grid{10.0, 100.0};
  auto report = folspec::run_sweep(kron, Bigrade{0, 0}, schedule, grid);

  CHECK(report.q == 1);
  REQUIRE(report.lhs.size() == 3);
  REQUIRE(report.lhs[0].size() == 2);
  REQUIRE(report.rhs.size() == 2);
  CHECK(report.rhs[1] == doctest::Approx(100.0 / (4.0 * M_PI)).epsilon(1e-9));
  CHECK(report.flagged_cells.empty());

  for (std::size_t ih = 0; ih < 3; ++ih)
    for (std::size_t il = 0; il < 2; ++il) {
      const auto& cell = report.lhs[ih][il];
      CHECK_FALSE(cell.missing);
      // independent count: both lhs entries match the streaming counter
      CHECK(cell.count ==
            folspec::count_modes(kron, Bigrade{0, 0}, schedule[ih], grid[il]));
      CHECK(report.ratio[ih][il] ==
            doctest::Approx(std::pow(schedule[ih], 1) * double(cell.count) / report.rhs[il]));
    }
  // the scaled ratio approaches one as h shrinks
  CHECK(report.ratio[2][1] == doctest::Approx(1.0).epsilon(0.1));
  REQUIRE(report.fitted_exponent.size() == 2);
  REQUIRE(report.fitted_exponent[1].has_value());
  CHECK(report.fitted_exponent[1]->r == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("sweep marks cells as missing when the enumeration budget trips") {
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  folspec::EnumerateOptions tiny;
  tiny.candidate_cap = 50;
  auto report = folspec::run_sweep(kron, Bigrade{0, 0}, {0.5, 0.25, 0.125}, {200.0}, tiny);
  // the smallest h requires a box beyond the cap
  CHECK(report.lhs[2][0].missing);
  CHECK_FALSE(report.lhs[2][0].failure.empty());
  CHECK(std::isnan(report.ratio[2][0]));
  CHECK_FALSE(report.fitted_exponent[0].has_value());
}

TEST_CASE("sweep validates schedules and grids") {
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  CHECK_THROWS_AS(folspec::run_sweep(kron, Bigrade{0, 0}, {}, {10.0}), folspec::ConfigError);
  CHECK_THROWS_AS(folspec::run_sweep(kron, Bigrade{0, 0}, {0.1, 0.2}, {10.0}),
                  folspec::ConfigError);
  CHECK_THROWS_AS(folspec::run_sweep(kron, Bigrade{0, 0}, {0.2, 0.1}, {}), folspec::ConfigError);
  CHECK_THROWS_AS(folspec::run_sweep(kron, Bigrade{0, 0}, {0.2, 0.1}, {10.0, 5.0}),
                  folspec::ConfigError);
}

TEST_CASE("fibered sweep counts eigenvalues below each level") {
  const int N = 16;
  auto model = build_fibered_model(N, N, "1", "1");
  auto pair = folspec::assemble_fibered_operators(model);
  folspec::SolveOptions opts;
  opts.max_matvecs = 100000;
  auto report = folspec::run_sweep(model, pair, {0.5, 0.4}, {50.0}, opts);

  auto mu = [N](int k) { return std::pow(2.0 * N * std::sin(M_PI * k / N), 2); };
  for (std::size_t ih = 0; ih < 2; ++ih) {
    const double h = report.h_schedule[ih];
    long long oracle = 0;
    for (int k1 = -N / 2; k1 < N / 2; ++k1)
      for (int k2 = -N / 2; k2 < N / 2; ++k2)
        if (mu(k1) + h * h * mu(k2) <= 50.0) ++oracle;
    CHECK_FALSE(report.lhs[ih][0].missing);
    CHECK(report.lhs[ih][0].count == oracle);
  }
  CHECK(report.flagged_cells.empty());
  CHECK(report.rhs[0] > 0.0);
}

TEST_CASE("flat branch tracking produces exact quadratic trajectories") {
  auto axis = build_flat_model(2, 1, {{1.0, 0.0}});
  const std::vector<double> schedule{0.5, 0.25, 0.125};
  auto branches = folspec::track_branches(axis, Bigrade{0, 0}, schedule, 5);
  REQUIRE(branches.size() == 5);

  // ascending by eigenvalue at h = 0.5, ties by eF:
  //   (0,0) m1, (0,(2pi)^2) m2, (0,4(2pi)^2) m2, ((2pi)^2,0) m2, ((2pi)^2,(2pi)^2) m4
  CHECK(branches[0].eF == 0.0);
  CHECK(branches[0].eH == 0.0);
  CHECK(branches[0].multiplicity == 1);
  CHECK(branches[1].eF == doctest::Approx(0.0));
  CHECK(branches[1].eH == doctest::Approx(four_pi_sq).epsilon(1e-13));
  CHECK(branches[1].multiplicity == 2);
  CHECK(branches[2].eH == doctest::Approx(4.0 * four_pi_sq).epsilon(1e-13));
  CHECK(branches[3].eF == doctest::Approx(four_pi_sq).epsilon(1e-13));
  CHECK(branches[3].eH == doctest::Approx(0.0));
  CHECK(branches[4].multiplicity == 4);

  for (const auto& b : branches) {
    CHECK(b.matching == "analytic-mode");
    CHECK(b.richardson);
    CHECK(b.limit_estimate == b.eF);
    REQUIRE(b.samples.size() == 3);
    for (std::size_t i = 0; i < 3; ++i) {
      const double h = schedule[i];
      CHECK(b.samples[i].lambda == b.eF + h * h * b.eH);
      CHECK(b.samples[i].derivative_estimate == 2.0 * h * b.eH);
      CHECK(b.samples[i].hf_derivative == b.samples[i].derivative_estimate);
    }
  }
}

TEST_CASE("fibered branch tracking follows modes with consistent derivatives") {
  const int N = 16;
  auto model = build_fibered_model(N, N, "1", "1");
  auto pair = folspec::assemble_fibered_operators(model);
  folspec::FiberedBranchOptions opts;
  opts.solve.max_matvecs = 100000;
  opts.solve.residual_tol = 1e-10;
  const std::vector<double> schedule{0.6, 0.5, 0.4};
  auto branches = folspec::track_branches(pair, schedule, 3, opts);
  REQUIRE(branches.size() == 3);

  const double mu1 = std::pow(2.0 * N * std::sin(M_PI / N), 2);
  // ground branch stays at zero with zero derivative
  CHECK_FALSE(branches[0].match_ambiguity);
  REQUIRE(branches[0].samples.size() == 3);
  for (const auto& s : branches[0].samples) {
    CHECK(std::abs(s.lambda) < 1e-7);
    CHECK(std::abs(s.hf_derivative) < 1e-6);
    CHECK(std::abs(s.derivative_estimate) < 1e-4);
  }
  // the doubly degenerate first transverse pair scales as h^2 mu1
  for (int i : {1, 2}) {
    const auto& b = branches[static_cast<std::size_t>(i)];
    CHECK(b.matching == "overlap-match");
    CHECK_FALSE(b.match_ambiguity);
    REQUIRE(b.samples.size() == 3);
    for (std::size_t sidx = 0; sidx < 3; ++sidx) {
      const double h = schedule[sidx];
      const auto& s = b.samples[sidx];
      CHECK(s.lambda == doctest::Approx(h * h * mu1).epsilon(1e-7));
      CHECK(s.hf_derivative == doctest::Approx(2.0 * h * mu1).epsilon(1e-7));
      // central difference against the Hellmann-Feynman value
      CHECK(std::abs(s.derivative_estimate - s.hf_derivative) <=
            1e-3 * std::max(1.0, std::abs(s.hf_derivative)));
    }
    CHECK(b.limit_estimate == doctest::Approx(0.4 * 0.4 * mu1).epsilon(1e-7));
  }
}

TEST_CASE("limit summary orders branch limits against the leafwise bottom") {
  auto axis = build_flat_model(2, 1, {{1.0, 0.0}});
  auto NF = folspec::leafwise_distribution_flat(axis, Bigrade{0, 0}, 1000.0);
  auto branches = folspec::track_branches(axis, Bigrade{0, 0}, {0.5, 0.25, 0.125}, 5);
  auto summary = folspec::limit_summary(branches, NF, Bigrade{0, 0});
  CHECK(summary.lambda_lim_0 == 0.0);
  CHECK(summary.leafwise_bottom == 0.0);
  CHECK(summary.ordering_ok);
  REQUIRE(summary.lambda_F_0.has_value());
  CHECK(*summary.lambda_F_0 == 0.0);
  REQUIRE(summary.smallest_positive_limit.has_value());
  CHECK(*summary.smallest_positive_limit == doctest::Approx(four_pi_sq).epsilon(1e-12));

  CHECK_THROWS_AS(folspec::limit_summary({}, NF, Bigrade{0, 0}), folspec::ConfigError);

  // dense-leaf model: the leafwise bottom is the support edge zero
  auto kron = build_flat_model(2, 1, {{1.0, std::sqrt(2.0)}});
  auto kNF = folspec::leafwise_distribution_flat(kron, Bigrade{0, 0});
  auto kbranches = folspec::track_branches(kron, Bigrade{0, 0}, {0.5, 0.25, 0.125}, 3);
  auto ksummary = folspec::limit_summary(kbranches, kNF, Bigrade{0, 0});
  CHECK(ksummary.leafwise_bottom == 0.0);
  CHECK(ksummary.ordering_ok);
}
