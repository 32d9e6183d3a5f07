#pragma once

// Exact arithmetic helpers for rationality classification: continued-fraction
// rational reconstruction of floating entries and integer linear algebra
// (kernel / Hermite reduction) over arbitrary-precision integers.

#include <boost/multiprecision/cpp_int.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <vector>

namespace folspec {

using BigInt = boost::multiprecision::cpp_int;
using BigRational = boost::multiprecision::cpp_rational;

// Best rational approximation p/q with q <= max_denominator, accepted only if
// it reproduces v to within tol.  Continued-fraction convergents, so the
// returned fraction is in lowest terms.
inline std::optional<BigRational> reconstruct_rational(double v, std::int64_t max_denominator,
                                                       double tol) {
  if (!std::isfinite(v)) return std::nullopt;
  double x = v;
  BigInt p_prev = 1, q_prev = 0;
  BigInt p_curr = static_cast<std::int64_t>(std::floor(x)), q_curr = 1;
  x -= std::floor(x);
  for (int step = 0; step < 64; ++step) {
    const double approx = static_cast<double>(p_curr) / static_cast<double>(q_curr);
    if (std::abs(approx - v) <= tol) return BigRational(p_curr, q_curr);
    if (x == 0.0) break;
    x = 1.0 / x;
    if (x > 9.0e18) break;
    const BigInt a = static_cast<std::int64_t>(std::floor(x));
    x -= std::floor(x);
    const BigInt p_next = a * p_curr + p_prev;
    const BigInt q_next = a * q_curr + q_prev;
    if (q_next > max_denominator) break;
    p_prev = p_curr;
    q_prev = q_curr;
    p_curr = p_next;
    q_curr = q_next;
  }
  return std::nullopt;
}

using RationalMatrix = std::vector<std::vector<BigRational>>;
using IntMatrix = std::vector<std::vector<BigInt>>;
using IntVector = std::vector<BigInt>;

inline RationalMatrix rational_mat_mul(const RationalMatrix& a, const RationalMatrix& b) {
  const std::size_t m = a.size(), inner = b.size(), n = b.empty() ? 0 : b[0].size();
  RationalMatrix c(m, std::vector<BigRational>(n, BigRational(0)));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t k = 0; k < inner; ++k) {
      if (a[i][k] == 0) continue;
      for (std::size_t j = 0; j < n; ++j) c[i][j] += a[i][k] * b[k][j];
    }
  return c;
}

// Clears denominators row by row: each output row is the input row times the
// least common multiple of its denominators, divided by the row gcd.
inline IntMatrix clear_denominators(const RationalMatrix& m) {
  IntMatrix out;
  out.reserve(m.size());
  for (const auto& row : m) {
    BigInt l = 1;
    for (const auto& e : row) {
      const BigInt d = boost::multiprecision::denominator(e);
      l = boost::multiprecision::lcm(l, d);
    }
    IntVector irow;
    irow.reserve(row.size());
    BigInt g = 0;
    for (const auto& e : row) {
      BigInt scaled = boost::multiprecision::numerator(e) *
                      (l / boost::multiprecision::denominator(e));
      g = boost::multiprecision::gcd(g, scaled);
      irow.push_back(std::move(scaled));
    }
    if (g > 1)
      for (auto& e : irow) e /= g;
    out.push_back(std::move(irow));
  }
  return out;
}

// Basis of {k in Z^n : M k = 0} via unimodular column reduction.  Column
// operations are mirrored on an identity matrix; columns of the mirror whose
// image in M has been fully zeroed form the kernel basis.  Because the mirror
// stays unimodular the basis vectors are primitive and the lattice is exactly
// the integer kernel (no saturation step needed).
inline std::vector<IntVector> integer_kernel(const IntMatrix& m_in) {
  const std::size_t rows = m_in.size();
  const std::size_t n = rows == 0 ? 0 : m_in[0].size();
  IntMatrix m = m_in;
  IntMatrix c(n, IntVector(n, 0));
  for (std::size_t i = 0; i < n; ++i) c[i][i] = 1;

  std::vector<std::size_t> active;
  for (std::size_t j = 0; j < n; ++j) active.push_back(j);

  auto col_axpy = [&](std::size_t dst, std::size_t src, const BigInt& q) {
    if (q == 0) return;
    for (std::size_t r = 0; r < rows; ++r) m[r][dst] -= q * m[r][src];
    for (std::size_t r = 0; r < n; ++r) c[r][dst] -= q * c[r][src];
  };

  for (std::size_t r = 0; r < rows; ++r) {
    for (;;) {
      std::vector<std::size_t> nonzero;
      for (std::size_t j : active)
        if (m[r][j] != 0) nonzero.push_back(j);
      if (nonzero.empty()) break;  // row already clear
      if (nonzero.size() == 1) {
        // single nonzero left: this column becomes the pivot and retires
        active.erase(std::find(active.begin(), active.end(), nonzero[0]));
        break;
      }
      std::size_t imin = nonzero[0];
      for (std::size_t j : nonzero)
        if (abs(m[r][j]) < abs(m[r][imin])) imin = j;
      std::size_t imax = (imin == nonzero[0]) ? nonzero[1] : nonzero[0];
      for (std::size_t j : nonzero)
        if (j != imin && abs(m[r][j]) > abs(m[r][imax])) imax = j;
      const BigInt q = m[r][imax] / m[r][imin];  // truncated division
      col_axpy(imax, imin, q);
    }
  }

  std::vector<IntVector> basis;
  for (std::size_t j : active) {
    IntVector v(n);
    for (std::size_t r = 0; r < n; ++r) v[r] = c[r][j];
    // canonical sign: first nonzero entry positive
    for (const auto& e : v) {
      if (e == 0) continue;
      if (e < 0)
        for (auto& w : v) w = -w;
      break;
    }
    basis.push_back(std::move(v));
  }
  return basis;
}

// Row-style Hermite reduction of a set of integer vectors; returns a basis of
// the sublattice they generate (number of rows = rank).
inline std::vector<IntVector> row_lattice_basis(std::vector<IntVector> rows) {
  if (rows.empty()) return rows;
  const std::size_t n = rows[0].size();
  std::size_t pivot_row = 0;
  for (std::size_t col = 0; col < n && pivot_row < rows.size(); ++col) {
    for (;;) {
      std::size_t imin = rows.size();
      for (std::size_t i = pivot_row; i < rows.size(); ++i) {
        if (rows[i][col] == 0) continue;
        if (imin == rows.size() || abs(rows[i][col]) < abs(rows[imin][col])) imin = i;
      }
      if (imin == rows.size()) break;  // column clear below pivot_row
      std::swap(rows[pivot_row], rows[imin]);
      bool reduced_all = true;
      for (std::size_t i = pivot_row + 1; i < rows.size(); ++i) {
        if (rows[i][col] == 0) continue;
        const BigInt q = rows[i][col] / rows[pivot_row][col];
        for (std::size_t j = 0; j < n; ++j) rows[i][j] -= q * rows[pivot_row][j];
        if (rows[i][col] != 0) reduced_all = false;
      }
      if (reduced_all) {
        ++pivot_row;
        break;
      }
    }
  }
  rows.resize(pivot_row);
  for (auto& v : rows) {
    BigInt g = 0;
    for (const auto& e : v) g = boost::multiprecision::gcd(g, e);
    if (g > 1)
      for (auto& e : v) e /= g;
    for (const auto& e : v) {
      if (e == 0) continue;
      if (e < 0)
        for (auto& w : v) w = -w;
      break;
    }
  }
  return rows;
}

}  // namespace folspec
