#pragma once

// Model constructors and geometric validation.  Two model families are
// supported: constant-coefficient linear foliations of the flat n-torus
// (exact mode arithmetic downstream) and a variable-coefficient fibered
// 2-torus sampled on a periodic grid.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "folspec/errors.hpp"
#include "folspec/expressions.hpp"
#include "folspec/rational.hpp"

namespace folspec {

enum class Rationality { Fibration, DenseLeaves, Mixed };

inline const char* to_string(Rationality r) {
  switch (r) {
    case Rationality::Fibration: return "Fibration";
    case Rationality::DenseLeaves: return "DenseLeaves";
    case Rationality::Mixed: return "Mixed";
  }
  return "?";
}

// Binomial coefficient for the form-bundle multiplicities; arguments stay
// tiny (n <= 8 or so), overflow is not a concern.
inline long long binomial(int n, int k) {
  if (k < 0 || k > n) return 0;
  long long r = 1;
  for (int i = 0; i < k; ++i) r = r * (n - i) / (i + 1);
  return r;
}

struct Bigrade {
  int i = 0;  // tangential degree
  int j = 0;  // transverse degree
  int k() const { return i + j; }
  long long multiplicity(int p, int q) const { return binomial(p, i) * binomial(q, j); }
};

struct RationalityOptions {
  std::int64_t max_denominator = 1000000;  // rational-reconstruction bound
  double reconstruct_tol = 1e-9;           // accept p/q only this close to the float
  int search_box = 20;                     // half-width of the fallback lattice search
  double relation_tol = 1e-9;              // |(I-P)k| threshold in the fallback search
  bool assume_dense = false;               // caller certifies the span is irrational
};

struct RationalityReport {
  Rationality tag = Rationality::DenseLeaves;
  // rows generate F intersected with Z^n (empty unless some rank was found)
  std::vector<std::vector<long long>> lattice;
  // true when the classification came from the bounded search instead of the
  // exact rational-projector route
  bool heuristic = false;
};

struct FlatLinearFoliation {
  int n = 0, p = 0, q = 0;
  Eigen::MatrixXd U;  // p x n, orthonormal rows spanning the tangential subspace
  Eigen::MatrixXd W;  // q x n, orthonormal rows spanning the orthogonal complement
  Rationality rationality = Rationality::DenseLeaves;
  std::vector<std::vector<long long>> leaf_lattice;  // basis rows of F ∩ Z^n
  bool rationality_heuristic = false;
};

namespace detail {

// Modified Gram-Schmidt with one re-orthogonalization pass.  Appends the
// normalized residual of v to basis; returns false when v is numerically in
// the span of the existing rows.
inline bool mgs_append(std::vector<Eigen::VectorXd>& basis, Eigen::VectorXd v,
                       double drop_tol) {
  const double original = v.norm();
  if (original == 0.0) return false;
  for (int pass = 0; pass < 2; ++pass)
    for (const auto& u : basis) v -= u.dot(v) * u;
  if (v.norm() <= drop_tol * original) return false;
  v.normalize();
  basis.push_back(std::move(v));
  return true;
}

inline long long to_long_checked(const BigInt& v) {
  static const BigInt bound = BigInt(1) << 62;
  if (abs(v) >= bound)
    throw Error("lattice coordinate exceeds 64-bit range: " + v.str());
  return v.convert_to<long long>();
}

}  // namespace detail

// Classifies the rank of F ∩ Z^n for the subspace spanned by the rows of U.
// Exact route: reconstruct the orthogonal projector P = UᵀU as a rational
// matrix and take the integer kernel of I − P.  The reconstruction is trusted
// only if the rational candidate is exactly idempotent with trace p, which a
// spurious rational approximation of an irrational projector cannot pass.
// Fallback route: exhaustive search of a small coordinate box for integer
// vectors lying in F, reported with heuristic = true.
inline RationalityReport detect_rationality(const Eigen::MatrixXd& U,
                                            const RationalityOptions& opts = {}) {
  const int p = static_cast<int>(U.rows());
  const int n = static_cast<int>(U.cols());
  const Eigen::MatrixXd P = U.transpose() * U;

  bool reconstructed = true;
  RationalMatrix Phat(n, std::vector<BigRational>(n, BigRational(0)));
  for (int i = 0; i < n && reconstructed; ++i)
    for (int j = i; j < n; ++j) {
      auto r = reconstruct_rational(P(i, j), opts.max_denominator, opts.reconstruct_tol);
      if (!r) {
        reconstructed = false;
        break;
      }
      Phat[i][j] = *r;
      Phat[j][i] = *r;
    }

  if (reconstructed) {
    BigRational trace(0);
    for (int i = 0; i < n; ++i) trace += Phat[i][i];
    const RationalMatrix P2 = rational_mat_mul(Phat, Phat);
    bool idempotent = (trace == p);
    for (int i = 0; i < n && idempotent; ++i)
      for (int j = 0; j < n && idempotent; ++j)
        if (P2[i][j] != Phat[i][j]) idempotent = false;

    if (idempotent) {
      RationalMatrix IminusP = Phat;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) IminusP[i][j] = BigRational(i == j ? 1 : 0) - Phat[i][j];
      const auto kernel = integer_kernel(clear_denominators(IminusP));
      RationalityReport report;
      report.heuristic = false;
      for (const auto& v : kernel) {
        std::vector<long long> row;
        row.reserve(v.size());
        for (const auto& e : v) row.push_back(detail::to_long_checked(e));
        report.lattice.push_back(std::move(row));
      }
      const int rank = static_cast<int>(report.lattice.size());
      report.tag = (rank == p)   ? Rationality::Fibration
                   : (rank == 0) ? Rationality::DenseLeaves
                                 : Rationality::Mixed;
      if (rank == 0) report.lattice.clear();
      return report;
    }
  }

  // Bounded fallback search: scan half of the box (k and -k carry the same
  // information) for integer vectors with negligible transverse component.
  int box = opts.search_box;
  while (box > 2 && std::pow(2.0 * box + 1.0, n) > 3.0e7) --box;
  std::vector<IntVector> found;
  std::vector<long long> k(n, 0);
  Eigen::VectorXd kv(n);
  auto in_leaf = [&](const std::vector<long long>& vec) {
    for (int i = 0; i < n; ++i) kv(i) = static_cast<double>(vec[i]);
    const Eigen::VectorXd residual = kv - P * kv;
    return residual.norm() <= opts.relation_tol * std::max(1.0, kv.norm());
  };
  std::function<void(int)> scan = [&](int dim) {
    if (dim == n) {
      if (in_leaf(k)) {
        IntVector v(n);
        for (int i = 0; i < n; ++i) v[i] = k[i];
        found.push_back(std::move(v));
      }
      return;
    }
    for (long long c = -box; c <= box; ++c) {
      k[dim] = c;
      scan(dim + 1);
    }
    k[dim] = 0;
  };
  // only the first-nonzero-positive half space; k and -k are equivalent
  std::function<void(int)> scan_half = [&](int dim) {
    if (dim == n) return;
    for (long long lead = 1; lead <= box; ++lead) {
      k[dim] = lead;
      scan(dim + 1);
    }
    k[dim] = 0;
    scan_half(dim + 1);
  };
  scan_half(0);

  RationalityReport report;
  auto basis = row_lattice_basis(std::move(found));
  for (const auto& v : basis) {
    std::vector<long long> row;
    row.reserve(v.size());
    for (const auto& e : v) row.push_back(detail::to_long_checked(e));
    report.lattice.push_back(std::move(row));
  }
  const int rank = static_cast<int>(report.lattice.size());
  if (rank == 0) {
    report.tag = Rationality::DenseLeaves;
    report.heuristic = !opts.assume_dense;
  } else {
    report.tag = (rank == p) ? Rationality::Fibration : Rationality::Mixed;
    report.heuristic = true;
  }
  return report;
}

// Orthonormalizes the spanning vectors (modified Gram-Schmidt), completes the
// transverse frame from coordinate vectors, and classifies rationality.
inline FlatLinearFoliation build_flat_model(int n, int p,
                                            const std::vector<std::vector<double>>& span,
                                            const RationalityOptions& opts = {}) {
  if (n < 2) throw ConfigError("ambient dimension must be at least 2, got " + std::to_string(n));
  if (p < 1 || p >= n)
    throw ConfigError("leaf dimension must satisfy 1 <= p < n, got p=" + std::to_string(p) +
                      ", n=" + std::to_string(n));
  if (static_cast<int>(span.size()) != p)
    throw ConfigError("expected " + std::to_string(p) + " spanning vectors, got " +
                      std::to_string(span.size()));
  for (const auto& v : span)
    if (static_cast<int>(v.size()) != n)
      throw ConfigError("spanning vector has " + std::to_string(v.size()) +
                        " components, expected " + std::to_string(n));

  std::vector<Eigen::VectorXd> rows;
  for (int i = 0; i < p; ++i) {
    Eigen::VectorXd v(n);
    for (int j = 0; j < n; ++j) v(j) = span[i][j];
    if (!detail::mgs_append(rows, std::move(v), 1e-10))
      throw DegenerateSpan("spanning vector " + std::to_string(i) +
                           " is linearly dependent on the preceding ones");
  }

  FlatLinearFoliation model;
  model.n = n;
  model.p = p;
  model.q = n - p;
  model.U.resize(p, n);
  for (int i = 0; i < p; ++i) model.U.row(i) = rows[i].transpose();

  for (int axis = 0; axis < n && static_cast<int>(rows.size()) < n; ++axis) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(n);
    e(axis) = 1.0;
    detail::mgs_append(rows, std::move(e), 1e-6);
  }
  if (static_cast<int>(rows.size()) != n)
    throw Error("failed to complete the transverse frame");
  model.W.resize(model.q, n);
  for (int i = 0; i < model.q; ++i) model.W.row(i) = rows[p + i].transpose();

  RationalityReport report = detect_rationality(model.U, opts);
  if (report.tag == Rationality::Mixed)
    throw MixedRationality("leaf-lattice rank " + std::to_string(report.lattice.size()) +
                           " is strictly between 0 and " + std::to_string(p));
  model.rationality = report.tag;
  model.leaf_lattice = std::move(report.lattice);
  model.rationality_heuristic = report.heuristic;
  return model;
}

struct FiberedTorusModel {
  int Nx = 0, Ny = 0;
  std::vector<double> a;  // a(x_i, y_j) at index i*Ny + j
  std::vector<double> b;  // b(y_j)
  std::string a_text, b_text;

  double a_at(int ix, int iy) const { return a[static_cast<std::size_t>(ix) * Ny + iy]; }
};

// Samples the coefficient expressions on the periodic grid and enforces the
// positivity and bundle-like (b independent of x) conditions.
inline FiberedTorusModel build_fibered_model(int Nx, int Ny, const std::string& a_expression,
                                             const std::string& b_expression) {
  if (Nx < 2 || Ny < 2)
    throw ConfigError("grid sizes must be at least 2, got " + std::to_string(Nx) + "x" +
                      std::to_string(Ny));
  const Expression a_expr = Expression::parse(a_expression);
  const Expression b_expr = Expression::parse(b_expression);

  FiberedTorusModel model;
  model.Nx = Nx;
  model.Ny = Ny;
  model.a_text = a_expression;
  model.b_text = b_expression;
  model.a.resize(static_cast<std::size_t>(Nx) * Ny);
  model.b.resize(Ny);

  for (int iy = 0; iy < Ny; ++iy) {
    const double y = static_cast<double>(iy) / Ny;
    const double b0 = b_expr(0.0, y);
    for (int ix = 0; ix < Nx; ++ix) {
      const double x = static_cast<double>(ix) / Nx;
      const double bxy = b_expr(x, y);
      if (std::abs(bxy - b0) > 1e-14)
        throw TransverseLeafDependence(
            "b varies along the leaf direction: b(" + std::to_string(x) + "," +
            std::to_string(y) + ") - b(0," + std::to_string(y) + ") = " +
            std::to_string(bxy - b0));
    }
    if (!(b0 > 0.0))
      throw NonPositiveMetric("b(" + std::to_string(y) + ") = " + std::to_string(b0));
    model.b[iy] = b0;
  }
  for (int ix = 0; ix < Nx; ++ix) {
    const double x = static_cast<double>(ix) / Nx;
    for (int iy = 0; iy < Ny; ++iy) {
      const double y = static_cast<double>(iy) / Ny;
      const double axy = a_expr(x, y);
      if (!(axy > 0.0))
        throw NonPositiveMetric("a(" + std::to_string(x) + "," + std::to_string(y) +
                                ") = " + std::to_string(axy));
      model.a[static_cast<std::size_t>(ix) * Ny + iy] = axy;
    }
  }
  return model;
}

}  // namespace folspec
