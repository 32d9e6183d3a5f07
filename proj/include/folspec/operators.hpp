#pragma once

// Operator layer: per-mode energies for flat models, sparse tangential and
// transverse Laplacians for the fibered model, the discrete (s,k) Sobolev
// norms, and the coercivity check with explicit constants.
//
// On a flat model with constant orthonormal frames the rescaled operator
// reduces per Fourier mode to eF + h^2 eH on every bigrade: the frame is
// parallel, so the mean-curvature and curvature correction terms of the full
// decomposition vanish identically and the form indices only contribute
// multiplicity.  The module therefore never assembles zero correction
// operators; mode arithmetic is exact.

#include <Eigen/Dense>

#include <cfloat>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include "folspec/errors.hpp"
#include "folspec/models.hpp"
#include "folspec/sparse.hpp"

namespace folspec {

using LatticeVector = std::vector<long long>;
// finitely supported Fourier data: lattice vector -> coefficient
using FourierCoefficients = std::vector<std::pair<LatticeVector, std::complex<double>>>;

inline constexpr double two_pi = 6.283185307179586;

// Tangential and transverse mode energies of one Fourier mode of a flat
// model; grade only matters through its multiplicity weight.
struct ModeSymbol {
  const FlatLinearFoliation* model = nullptr;
  Bigrade grade;

  explicit ModeSymbol(const FlatLinearFoliation& m, Bigrade g = {0, 0})
      : model(&m), grade(g) {}

  double eF(const LatticeVector& k) const { return energy(model->U, k); }
  double eH(const LatticeVector& k) const { return energy(model->W, k); }
  long long multiplicity() const { return grade.multiplicity(model->p, model->q); }

 private:
  static double energy(const Eigen::MatrixXd& frame, const LatticeVector& k) {
    double sum = 0.0;
    for (int r = 0; r < frame.rows(); ++r) {
      double dot = 0.0;
      for (int c = 0; c < frame.cols(); ++c) dot += frame(r, c) * static_cast<double>(k[c]);
      const double component = two_pi * dot;
      sum += component * component;
    }
    return sum;
  }
};

inline void require_scale(double h) {
  if (!(h > 0.0) || h > 1.0)
    throw ConfigError("scale h must lie in (0, 1], got " + std::to_string(h));
}

inline double mode_eigenvalue(const ModeSymbol& symbol, const LatticeVector& k, double h) {
  require_scale(h);
  return symbol.eF(k) + h * h * symbol.eH(k);
}

// A and B act on grid functions after the similarity transform
// u -> (ab)^{1/4} u, which makes both symmetric in the unweighted inner
// product; `weight` keeps the original volume weights sqrt(ab)*dx*dy for
// callers that need integrals in the geometric metric.
struct DiscreteOperatorPair {
  int Nx = 0, Ny = 0;
  SparseSym A;  // tangential Laplacian
  SparseSym B;  // transverse Laplacian
  std::vector<double> weight;
  std::vector<double> quarter_root;  // (ab)^{1/4} per node, the transform itself

  int dim() const { return Nx * Ny; }

  // y = (A + h^2 B) x
  void apply(double h, const Eigen::VectorXd& x, Eigen::VectorXd& y) const {
    A.multiply(x, y);
    Eigen::VectorXd tmp;
    B.multiply(x, tmp);
    y += (h * h) * tmp;
  }

  // The symmetrized image of the globally constant function.
  Eigen::VectorXd constant_image() const {
    Eigen::VectorXd v(dim());
    for (int i = 0; i < dim(); ++i) v(i) = quarter_root[i];
    v.normalize();
    return v;
  }
};

// Flux-form second-order differences for
//   A: u -> -(ab)^{-1/2} d/dx ( (ab)^{1/2} a^{-1} du/dx )
//   B: u -> -(ab)^{-1/2} d/dy ( (ab)^{1/2} b^{-1} du/dy )
// on the periodic grid, conjugated by (ab)^{1/4}.  Midpoint flux
// coefficients are arithmetic means of the nodal values, which keeps the
// assembled matrices exactly symmetric and their row structure conservative.
inline DiscreteOperatorPair assemble_fibered_operators(const FiberedTorusModel& model) {
  const int Nx = model.Nx, Ny = model.Ny;
  const int dim = Nx * Ny;
  DiscreteOperatorPair pair;
  pair.Nx = Nx;
  pair.Ny = Ny;
  pair.weight.resize(dim);
  pair.quarter_root.resize(dim);

  std::vector<double> rho(dim);  // sqrt(a b), the area density
  const double cell = (1.0 / Nx) * (1.0 / Ny);
  for (int ix = 0; ix < Nx; ++ix)
    for (int iy = 0; iy < Ny; ++iy) {
      const int id = ix * Ny + iy;
      rho[id] = std::sqrt(model.a_at(ix, iy) * model.b[iy]);
      pair.weight[id] = rho[id] * cell;
      pair.quarter_root[id] = std::sqrt(rho[id]);
      if (!(pair.quarter_root[id] >= DBL_MIN))
        throw SingularWeight("volume weight underflows at node (" + std::to_string(ix) + "," +
                             std::to_string(iy) + ")");
    }

  const double inv_dx2 = static_cast<double>(Nx) * Nx;
  const double inv_dy2 = static_cast<double>(Ny) * Ny;
  SparseSym::Builder builder_a(dim), builder_b(dim);

  for (int ix = 0; ix < Nx; ++ix) {
    const int ix_next = (ix + 1) % Nx;
    for (int iy = 0; iy < Ny; ++iy) {
      const int iy_next = (iy + 1) % Ny;
      const int id = ix * Ny + iy;
      const int id_xn = ix_next * Ny + iy;
      const int id_yn = ix * Ny + iy_next;

      // x-direction flux between (ix, iy) and (ix+1, iy)
      const double cx = 0.5 * (rho[id] / model.a_at(ix, iy) +
                               rho[id_xn] / model.a_at(ix_next, iy)) *
                        inv_dx2;
      const double off_x = -cx / std::sqrt(rho[id] * rho[id_xn]);
      builder_a.add(id, id, cx / rho[id]);
      builder_a.add(id_xn, id_xn, cx / rho[id_xn]);
      builder_a.add(id, id_xn, off_x);
      builder_a.add(id_xn, id, off_x);

      // y-direction flux between (ix, iy) and (ix, iy+1)
      const double cy = 0.5 * (rho[id] / model.b[iy] + rho[id_yn] / model.b[iy_next]) * inv_dy2;
      const double off_y = -cy / std::sqrt(rho[id] * rho[id_yn]);
      builder_b.add(id, id, cy / rho[id]);
      builder_b.add(id_yn, id_yn, cy / rho[id_yn]);
      builder_b.add(id, id_yn, off_y);
      builder_b.add(id_yn, id, off_y);
    }
  }
  pair.A = builder_a.build();
  pair.B = builder_b.build();
  return pair;
}

inline double sobolev_norm_sq(const FlatLinearFoliation& model,
                              const FourierCoefficients& coefficients, double s,
                              double k_tangential) {
  ModeSymbol symbol(model);
  double total = 0.0;
  for (const auto& [k, c] : coefficients) {
    const double ef = symbol.eF(k);
    const double eh = symbol.eH(k);
    const double full = 1.0 + ef + eh;
    const double tangential = 1.0 + ef;
    total += std::pow(full, s) * std::pow(tangential, k_tangential) * std::norm(c);
  }
  return total;
}

struct GardingReport {
  double lhs = 0.0;  // (L_h u, u)
  double rhs = 0.0;  // (1/2)|u|_{0,1}^2 + (1/2) h^2 |u|_{1,0}^2 - |u|^2
  bool holds = false;
};

// Coercivity with the explicit constants C1 = C2 = 1/2, C3 = 1, which hold
// mode by mode for h <= 1:
//   eF + h^2 eH + 1 - (1/2)(1+eF) - (1/2)h^2(1+eF+eH)
//     = (1/2)(1-h^2)(1+eF) + (1/2)h^2 eH >= 0.
inline GardingReport check_crude_garding(const FlatLinearFoliation& model, double h,
                                         const FourierCoefficients& trial) {
  require_scale(h);
  ModeSymbol symbol(model);
  GardingReport report;
  double l2 = 0.0, norm01 = 0.0, norm10 = 0.0;
  for (const auto& [k, c] : trial) {
    const double ef = symbol.eF(k);
    const double eh = symbol.eH(k);
    const double w = std::norm(c);
    report.lhs += (ef + h * h * eh) * w;
    l2 += w;
    norm01 += (1.0 + ef) * w;
    norm10 += (1.0 + ef + eh) * w;
  }
  report.rhs = 0.5 * norm01 + 0.5 * h * h * norm10 - l2;
  const double slack = 1e-12 * std::max({1.0, std::abs(report.lhs), std::abs(report.rhs)});
  report.holds = report.lhs >= report.rhs - slack;
  return report;
}

}  // namespace folspec
