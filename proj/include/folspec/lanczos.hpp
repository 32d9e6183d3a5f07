#pragma once

// Lanczos iteration for the lowest eigenpairs of a symmetric operator given
// only by its matrix-vector product.  Full reorthogonalization against both
// the current Krylov basis and previously locked eigenvectors keeps the
// basis clean.  Sweeps restart explicitly: the best unconverged Ritz vector
// seeds the next sweep, so accuracy accumulates across restarts instead of
// resetting, and the Krylov depth grows while sweeps stagnate.  Degenerate
// clusters are resolved by sweeps whose start vectors are drawn orthogonal
// to everything already locked, and a final certification phase converges
// one eigenpair beyond the requested count to confirm nothing lower was
// missed.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "folspec/errors.hpp"

namespace folspec {

struct LanczosOptions {
  double tol_scale = 1e-8;     // accept residual <= tol_scale * max(1, |lambda|)
  long long max_matvecs = 0;   // 0 means 50 per requested eigenvalue
  std::uint64_t seed = 0x5eed;
  int sweep_cap = 0;           // Krylov dimension per sweep; 0 picks automatically
};

struct LowestPairs {
  std::vector<double> values;   // ascending
  Eigen::MatrixXd vectors;      // column i pairs with values[i]
  long long matvecs = 0;
  bool certified = false;       // an extra converged pair sits at or above values.back()
};

namespace detail {

inline void orthogonalize_against(Eigen::VectorXd& v, const Eigen::MatrixXd& basis, int cols) {
  if (cols == 0) return;
  const auto block = basis.leftCols(cols);
  for (int pass = 0; pass < 2; ++pass) v -= block * (block.transpose() * v);
}

}  // namespace detail

template <typename Apply>
LowestPairs lanczos_lowest(const Apply& apply, int dim, int count, LanczosOptions opts = {}) {
  if (count < 1) throw ConfigError("eigenpair count must be positive");
  if (count > dim)
    throw ConfigError("requested " + std::to_string(count) + " eigenpairs of a dimension-" +
                      std::to_string(dim) + " operator");
  const long long budget = opts.max_matvecs > 0 ? opts.max_matvecs : 50LL * count;

  LowestPairs out;
  Eigen::MatrixXd locked(dim, std::min(dim, count + 8));
  std::vector<double> locked_vals;
  int n_locked = 0;

  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  long long matvecs = 0;
  Eigen::VectorXd carry;  // best unconverged Ritz vector; seeds the next sweep
  int stagnant = 0;       // consecutive sweeps that locked nothing

  auto spend = [&](int n) {
    matvecs += n;
    return matvecs <= budget;
  };

  auto tol_for = [&](double theta) { return opts.tol_scale * std::max(1.0, std::abs(theta)); };

  const int base_cap = opts.sweep_cap > 0
                           ? std::min(opts.sweep_cap, dim)
                           : std::min(dim, std::max(2 * count + 30, 60));

  // One restart sweep: builds a Krylov space orthogonal to the locked set,
  // seeded by the carried Ritz vector when one is available, locks the
  // converged ascending prefix of its Ritz pairs, stores the first
  // unconverged Ritz vector as the next carry, and returns the smallest
  // Ritz value locked here (or a quiet NaN if nothing converged).
  auto sweep = [&]() -> double {
    // Krylov depth grows while sweeps stagnate so tight clusters still resolve.
    const int cap = std::min(dim, base_cap * (1 + std::min(stagnant, 3)));

    Eigen::MatrixXd V(dim, cap);
    std::vector<double> alpha, beta;
    alpha.reserve(cap);
    beta.reserve(cap);

    Eigen::VectorXd v(dim), w(dim);
    bool seeded = false;
    if (carry.size() == dim) {
      v = carry;
      detail::orthogonalize_against(v, locked, n_locked);
      seeded = v.norm() > 1e-8;
    }
    carry.resize(0);
    if (!seeded) {
      for (int i = 0; i < dim; ++i) v(i) = gauss(rng);
      detail::orthogonalize_against(v, locked, n_locked);
      if (v.norm() < 1e-8) return std::numeric_limits<double>::quiet_NaN();
    }
    v.normalize();

    int m = 0;
    for (; m < cap; ++m) {
      V.col(m) = v;
      if (!spend(1)) break;
      apply(v, w);
      const double a = v.dot(w);
      alpha.push_back(a);
      w -= a * v;
      if (m > 0) w -= beta[m - 1] * V.col(m - 1);
      detail::orthogonalize_against(w, V, m + 1);
      detail::orthogonalize_against(w, locked, n_locked);
      const double b = w.norm();
      if (b <= 1e-13) {
        beta.push_back(0.0);
        ++m;
        break;  // invariant subspace: every Ritz pair of T is exact
      }
      beta.push_back(b);
      v = w / b;
    }
    if (m == 0) return std::numeric_limits<double>::quiet_NaN();

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
      T(i, i) = alpha[i];
      if (i + 1 < m) T(i, i + 1) = T(i + 1, i) = beta[i];
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    const Eigen::VectorXd& theta = es.eigenvalues();
    const Eigen::MatrixXd& S = es.eigenvectors();

    // Converged ascending prefix only: locking a higher pair while a lower
    // Ritz value is still unconverged could freeze a wrong answer in.
    double smallest_locked = std::numeric_limits<double>::quiet_NaN();
    const double last_beta = beta[m - 1];
    int first_unconverged = -1;
    for (int i = 0; i < m; ++i) {
      const double est = std::abs(last_beta * S(m - 1, i));
      if (est > tol_for(theta(i))) {
        first_unconverged = i;
        break;
      }
      Eigen::VectorXd x = V.leftCols(m) * S.col(i);
      detail::orthogonalize_against(x, locked, n_locked);
      const double nrm = x.norm();
      if (nrm < 0.5) continue;  // fell into the locked span; duplicate direction
      x /= nrm;
      if (!spend(1)) {
        first_unconverged = i;
        break;
      }
      apply(x, w);
      const double lam = x.dot(w);
      if ((w - lam * x).norm() > tol_for(lam)) {
        first_unconverged = i;  // keep the ascending-prefix guarantee
        break;
      }
      if (n_locked == locked.cols()) {
        Eigen::MatrixXd grown(dim, std::min<long long>(dim, 2LL * locked.cols()));
        grown.leftCols(n_locked) = locked.leftCols(n_locked);
        locked.swap(grown);
      }
      locked.col(n_locked++) = x;
      locked_vals.push_back(lam);
      if (std::isnan(smallest_locked) || lam < smallest_locked) smallest_locked = lam;
    }
    if (first_unconverged >= 0) {
      Eigen::VectorXd x = V.leftCols(m) * S.col(first_unconverged);
      detail::orthogonalize_against(x, locked, n_locked);
      if (x.norm() > 1e-8) carry = x;
    }
    return smallest_locked;
  };

  while (n_locked < count) {
    if (matvecs >= budget)
      throw NoConvergence("eigensolver budget of " + std::to_string(budget) +
                          " matrix applications exhausted with " + std::to_string(n_locked) +
                          " of " + std::to_string(count) + " eigenpairs converged");
    const int before = n_locked;
    sweep();
    if (n_locked == before) {
      ++stagnant;
      // Carried restarts keep improving even without locking; only repeated
      // restarts from scratch that go nowhere indicate a genuine stall.
      if (stagnant >= 24 && carry.size() == 0)
        throw NoConvergence("eigensolver stalled: " + std::to_string(stagnant) +
                            " consecutive sweeps locked nothing (" + std::to_string(n_locked) +
                            " of " + std::to_string(count) + " eigenpairs converged)");
    } else {
      stagnant = 0;
    }
  }

  // Certification: converge one further eigenpair from a fresh random start;
  // deflation sends that start to the lowest eigenvalue not yet locked, so a
  // result at or above the count-th locked value proves nothing was missed.
  carry.resize(0);
  stagnant = 0;
  while (true) {
    if (n_locked >= dim) {
      out.certified = true;  // complete basis: nothing can hide below
      break;
    }
    std::vector<double> sorted(locked_vals);
    std::sort(sorted.begin(), sorted.end());
    const double kth = sorted[count - 1];
    if (matvecs >= budget) break;  // the requested pairs are verified; report uncertified
    const int before = n_locked;
    const double found = sweep();
    if (n_locked == before) {
      ++stagnant;
      if (stagnant >= 24 && carry.size() == 0) break;
      continue;
    }
    stagnant = 0;
    if (found >= kth - 1e-9 * std::max(1.0, std::abs(kth))) {
      out.certified = true;
      break;
    }
    carry.resize(0);  // a missed lower pair was caught; restart certification fresh
  }

  // ascending selection of the count smallest locked pairs
  std::vector<int> order(n_locked);
  for (int i = 0; i < n_locked; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](int a, int b) { return locked_vals[a] < locked_vals[b]; });
  out.values.resize(count);
  out.vectors.resize(dim, count);
  for (int i = 0; i < count; ++i) {
    out.values[i] = locked_vals[order[i]];
    out.vectors.col(i) = locked.col(order[i]);
  }
  out.matvecs = matvecs;
  return out;
}

}  // namespace folspec
