#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "folspec/rational.hpp"

using folspec::BigInt;
using folspec::BigRational;
using folspec::IntMatrix;
using folspec::IntVector;
using folspec::RationalMatrix;

TEST_CASE("rational reconstruction recovers small fractions from doubles") {
  auto r = folspec::reconstruct_rational(0.2, 1000000, 1e-9);
  REQUIRE(r.has_value());
  CHECK(boost::multiprecision::numerator(*r) == 1);
  CHECK(boost::multiprecision::denominator(*r) == 5);

  auto t = folspec::reconstruct_rational(-7.0 / 13.0, 1000000, 1e-9);
  REQUIRE(t.has_value());
  CHECK(boost::multiprecision::numerator(*t) == -7);
  CHECK(boost::multiprecision::denominator(*t) == 13);

  auto z = folspec::reconstruct_rational(0.0, 1000000, 1e-9);
  REQUIRE(z.has_value());
  CHECK(*z == 0);
}

TEST_CASE("rational reconstruction refuses irrational inputs at the denominator cap") {
  auto s = folspec::reconstruct_rational(std::sqrt(2.0), 1000000, 1e-13);
  CHECK_FALSE(s.has_value());
  auto p = folspec::reconstruct_rational(M_PI, 1000000, 1e-13);
  CHECK_FALSE(p.has_value());
}

TEST_CASE("integer kernel of a rank one integer matrix is the orthogonal line") {
  // rows span (1, 2); kernel must be generated by (2, -1) up to sign convention
  IntMatrix m = {{BigInt(1), BigInt(2)}, {BigInt(2), BigInt(4)}};
  auto ker = folspec::integer_kernel(m);
  REQUIRE(ker.size() == 1);
  const auto& v = ker[0];
  // primitive generator of {(a,b): a + 2b = 0}
  CHECK(v[0] * 1 + v[1] * 2 == 0);
  CHECK(boost::multiprecision::gcd(boost::multiprecision::abs(v[0]),
                                   boost::multiprecision::abs(v[1])) == 1);
  CHECK((v[0] != 0 || v[1] != 0));
}

TEST_CASE("integer kernel is saturated, not merely a finite-index sublattice") {
  // rows span (2, 4) = 2*(1, 2); the kernel over Z is still generated by the
  // primitive (2, -1), not (4, -2)
  IntMatrix m = {{BigInt(2), BigInt(4)}};
  auto ker = folspec::integer_kernel(m);
  REQUIRE(ker.size() == 1);
  CHECK(boost::multiprecision::gcd(boost::multiprecision::abs(ker[0][0]),
                                   boost::multiprecision::abs(ker[0][1])) == 1);
  CHECK(ker[0][0] * 2 + ker[0][1] * 4 == 0);
}

TEST_CASE("integer kernel of the identity is empty and of zero is everything") {
  IntMatrix id = {{BigInt(1), BigInt(0)}, {BigInt(0), BigInt(1)}};
  CHECK(folspec::integer_kernel(id).empty());

  IntMatrix zero = {{BigInt(0), BigInt(0), BigInt(0)}};
  auto ker = folspec::integer_kernel(zero);
  REQUIRE(ker.size() == 3);
  // the three generators must be unimodular: |det| = 1
  long long det = 0;
  auto c = [&](int i, int j) { return static_cast<long long>(ker[i][j]); };
  det = c(0, 0) * (c(1, 1) * c(2, 2) - c(1, 2) * c(2, 1)) -
        c(0, 1) * (c(1, 0) * c(2, 2) - c(1, 2) * c(2, 0)) +
        c(0, 2) * (c(1, 0) * c(2, 1) - c(1, 1) * c(2, 0));
  CHECK(std::abs(det) == 1);
}

TEST_CASE("integer kernel handles ties between equal magnitude entries") {
  IntMatrix m = {{BigInt(3), BigInt(3)}};
  auto ker = folspec::integer_kernel(m);
  REQUIRE(ker.size() == 1);
  CHECK(ker[0][0] * 3 + ker[0][1] * 3 == 0);
  CHECK(boost::multiprecision::abs(ker[0][0]) == 1);
  CHECK(boost::multiprecision::abs(ker[0][1]) == 1);
}

TEST_CASE("clearing denominators yields primitive integer rows") {
  RationalMatrix rm = {{BigRational(1, 5), BigRational(2, 5)},
                       {BigRational(2, 5), BigRational(4, 5)}};
  auto im = folspec::clear_denominators(rm);
  REQUIRE(im.size() == 2);
  // row (1/5, 2/5) scales to the primitive (1, 2)
  CHECK(im[0][0] == 1);
  CHECK(im[0][1] == 2);
  CHECK(im[1][0] == 1);
  CHECK(im[1][1] == 2);
}

TEST_CASE("kernel vectors of the projection complement recover the leaf line") {
  // P = projection onto span{(1,2)}/sqrt(5): P = [[1/5,2/5],[2/5,4/5]]
  // I - P = [[4/5,-2/5],[-2/5,1/5]]; integer rows (2,-1) after clearing; kernel (1,2)
  RationalMatrix ip = {{BigRational(4, 5), BigRational(-2, 5)},
                       {BigRational(-2, 5), BigRational(1, 5)}};
  auto rows = folspec::clear_denominators(ip);
  auto ker = folspec::integer_kernel(rows);
  REQUIRE(ker.size() == 1);
  // generator is (1,2) up to sign
  CHECK(boost::multiprecision::abs(ker[0][0]) == 1);
  CHECK(boost::multiprecision::abs(ker[0][1]) == 2);
  CHECK(ker[0][0] * 2 == ker[0][1]);
}
