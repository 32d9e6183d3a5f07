#pragma once

// Leafwise spectrum distribution N_F for each supported model, in the three
// concrete shapes the asymptotic formulas consume: a closed-form power
// density (dense leaves), an atomic distribution over the dual leaf lattice
// (linear fibrations), and a numerically assembled atomic distribution from
// per-leaf 1D eigensolves (fibered 2-torus).

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "folspec/errors.hpp"
#include "folspec/models.hpp"
#include "folspec/spectra.hpp"

namespace folspec {

enum class LeafwiseKind { ClosedFormDensity, AtomicFibration, NumericalFibered };

inline const char* to_string(LeafwiseKind k) {
  switch (k) {
    case LeafwiseKind::ClosedFormDensity: return "ClosedFormDensity";
    case LeafwiseKind::AtomicFibration: return "AtomicFibration";
    case LeafwiseKind::NumericalFibered: return "NumericalFibered";
  }
  return "?";
}

struct LeafwiseDistribution {
  CountingFunction N;
  LeafwiseKind kind = LeafwiseKind::ClosedFormDensity;
  int leaf_dimension = 1;
  // transverse volume factor: weight carried by each leafwise-harmonic mode
  // (0 for dense leaves, vol(M)/vol(leaf) for fibrations, the sqrt(b)
  // quadrature mass for the fibered grid model)
  double transverse_mass = 0.0;
  long long grade_factor = 1;

  double operator()(double tau) const { return N(tau); }
};

// Unit-ball volume omega_d = pi^{d/2} / Gamma(d/2 + 1).
inline double unit_ball_volume(int d) {
  return std::pow(3.141592653589793, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

// N_F for a flat linear foliation.
//
// Dense leaves: every leaf is isometric to R^p and the leafwise spectral
// density is translation invariant, so integrating its kernel diagonal over
// the unit-volume torus leaves the Euclidean density of states
//   N_F(tau) = mult * (2 pi)^{-p} * omega_p * tau^{p/2}.
//
// Fibration: each leaf is the torus R^p / Lambda for the leaf lattice
// Lambda = F intersect Z^n, so the leafwise spectrum consists of the atoms
// |2 pi kappa|^2 over the dual lattice, and integrating over the transverse
// directions multiplies each atom by vol(M)/vol(leaf) = 1/det(Lambda basis).
inline LeafwiseDistribution leafwise_distribution_flat(const FlatLinearFoliation& model,
                                                       Bigrade grade, double tau_max = 1e4) {
  if (tau_max <= 0.0) throw ConfigError("tau_max must be positive");
  LeafwiseDistribution dist;
  dist.leaf_dimension = model.p;
  dist.grade_factor = grade.multiplicity(model.p, model.q);

  if (model.rationality == Rationality::DenseLeaves) {
    dist.kind = LeafwiseKind::ClosedFormDensity;
    dist.transverse_mass = 0.0;
    const double coeff = static_cast<double>(dist.grade_factor) *
                         std::pow(two_pi, -model.p) * unit_ball_volume(model.p);
    // the closed form is valid for every tau, so no completeness bound
    dist.N = CountingFunction::power_law(coeff, 0.5 * model.p);
    return dist;
  }
  if (model.rationality != Rationality::Fibration)
    throw MixedRationality("leafwise distribution requires a pure rationality class");

  const int p = model.p;
  if (static_cast<int>(model.leaf_lattice.size()) != p)
    throw Error("fibration model carries no leaf-lattice basis");

  // lattice basis expressed in the orthonormal tangential frame
  Eigen::MatrixXd basis(p, p);
  for (int i = 0; i < p; ++i) {
    Eigen::VectorXd v(model.n);
    for (int c = 0; c < model.n; ++c) v(c) = static_cast<double>(model.leaf_lattice[i][c]);
    basis.row(i) = (model.U * v).transpose();
  }
  const double cell_volume = std::abs(basis.determinant());
  if (cell_volume <= 0.0) throw Error("leaf-lattice basis is degenerate");
  dist.kind = LeafwiseKind::AtomicFibration;
  dist.transverse_mass = 1.0 / cell_volume;

  // dual modes kappa = basis^{-1} m (integer pairing with every lattice
  // vector), atom tau = |2 pi kappa|^2
  const Eigen::MatrixXd dual = basis.inverse();
  std::vector<long long> bounds(p);
  for (int i = 0; i < p; ++i)
    bounds[i] = static_cast<long long>(
        std::ceil(std::sqrt(tau_max) / two_pi * basis.row(i).norm() + 1.0));

  std::vector<std::pair<double, double>> raw;
  std::vector<long long> m(p, 0);
  const double atom_weight = static_cast<double>(dist.grade_factor) * dist.transverse_mass;
  std::function<void(int)> walk = [&](int dim) {
    if (dim == p) {
      Eigen::VectorXd mv(p);
      for (int i = 0; i < p; ++i) mv(i) = static_cast<double>(m[i]);
      const double tau = std::pow(two_pi, 2) * (dual * mv).squaredNorm();
      if (tau <= tau_max) raw.emplace_back(tau, atom_weight);
      return;
    }
    for (long long c = -bounds[dim]; c <= bounds[dim]; ++c) {
      m[dim] = c;
      walk(dim + 1);
    }
    m[dim] = 0;
  };
  walk(0);

  dist.N = CountingFunction::from_atoms(std::move(raw));
  dist.N.tau_max = tau_max;
  return dist;
}

namespace detail {

// Dense symmetric discretization of the leaf Laplacian of one circle
// {y = const} with metric a(x) dx^2: the same flux-form scheme as the 2D
// assembly, with density sqrt(a) and conjugation by a^{1/4}.
inline Eigen::VectorXd leaf_circle_spectrum(const std::vector<double>& a_row) {
  const int N = static_cast<int>(a_row.size());
  std::vector<double> rho(N);
  for (int i = 0; i < N; ++i) rho[i] = std::sqrt(a_row[i]);
  const double inv_dx2 = static_cast<double>(N) * N;
  Eigen::MatrixXd op = Eigen::MatrixXd::Zero(N, N);
  for (int i = 0; i < N; ++i) {
    const int inext = (i + 1) % N;
    const double c = 0.5 * (rho[i] / a_row[i] + rho[inext] / a_row[inext]) * inv_dx2;
    op(i, i) += c / rho[i];
    op(inext, inext) += c / rho[inext];
    const double off = -c / std::sqrt(rho[i] * rho[inext]);
    op(i, inext) += off;
    op(inext, i) += off;
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(op);
  return es.eigenvalues();
}

}  // namespace detail

// N_F for the fibered model: for each retained grid line y the leaf operator
// is solved completely, and the per-leaf counting functions are combined with
// the periodic trapezoid weights w_y = 1/Ny and the transverse density
// sqrt(b(y)).  y_stride > 1 subsamples the grid lines (it must divide Ny).
inline LeafwiseDistribution leafwise_distribution_fibered(const FiberedTorusModel& model,
                                                          int y_stride = 1) {
  if (y_stride < 1 || model.Ny % y_stride != 0)
    throw ConfigError("y_stride must be a positive divisor of Ny, got " +
                      std::to_string(y_stride));
  const int used = model.Ny / y_stride;
  const double w_y = 1.0 / used;

  LeafwiseDistribution dist;
  dist.kind = LeafwiseKind::NumericalFibered;
  dist.leaf_dimension = 1;
  dist.grade_factor = 1;

  std::vector<std::pair<double, double>> raw;
  raw.reserve(static_cast<std::size_t>(used) * model.Nx);
  double harmonic_mass = 0.0;
  for (int step = 0; step < used; ++step) {
    const int iy = step * y_stride;
    std::vector<double> a_row(model.Nx);
    for (int ix = 0; ix < model.Nx; ++ix) a_row[ix] = model.a_at(ix, iy);
    Eigen::VectorXd leaf;
    try {
      leaf = detail::leaf_circle_spectrum(a_row);
    } catch (const std::exception& e) {
      throw Error("leaf eigensolve failed at y index " + std::to_string(iy) + ": " + e.what());
    }
    const double weight = w_y * std::sqrt(model.b[iy]);
    harmonic_mass += weight;
    for (int i = 0; i < leaf.size(); ++i) raw.emplace_back(leaf(i), weight);
  }

  dist.transverse_mass = harmonic_mass;
  // the discrete leaf operators are solved completely, so the atomic list is
  // exhaustive and needs no completeness bound; how far it tracks the
  // continuum is a separate (discretization) question
  dist.N = CountingFunction::from_atoms(std::move(raw));
  return dist;
}

}  // namespace folspec
