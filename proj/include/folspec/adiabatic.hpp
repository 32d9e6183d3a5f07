#pragma once

// Right-hand sides of the asymptotic formulas, h-sweep comparisons, branch
// tracking with derivative cross-checks, and the counting-exponent fit.
//
// All three RHS evaluators share the same Stieltjes backbone: a sum over the
// atoms of N_F plus double-exponential quadrature against its continuous
// density.  Coefficients in play:
//   counting:  (4 pi)^{-q/2} / Gamma(q/2 + 1) * Int (lambda - tau)^{q/2} dN_F
//   heat:      (4 pi t)^{-q/2} h^{-q}         * Int exp(-t tau) dN_F
//   trace:     (4 pi)^{-q/2} / Gamma(q/2)     * Int Int sigma^{q/2-1} f(tau + sigma) dsigma dN_F

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

#include "folspec/errors.hpp"
#include "folspec/leafwise.hpp"
#include "folspec/models.hpp"
#include "folspec/operators.hpp"
#include "folspec/quadrature.hpp"
#include "folspec/spectra.hpp"

namespace folspec {

namespace detail {

inline void require_trust(const LeafwiseDistribution& NF, double reach) {
  if (reach > NF.N.tau_max * (1.0 + 1e-12))
    throw ConfigError("evaluation reaches tau = " + std::to_string(reach) +
                      " beyond the distribution's completeness bound " +
                      std::to_string(NF.N.tau_max) + "; rebuild it with a larger tau_max");
}

}  // namespace detail

// Coefficient of h^{-q} in the eigenvalue-counting asymptotics.
inline double rhs_counting(const LeafwiseDistribution& NF, double lambda, int q) {
  if (q < 1) throw ConfigError("codimension must be at least 1");
  if (lambda < 0.0) return 0.0;
  detail::require_trust(NF, lambda);
  const double half_q = 0.5 * q;
  double stieltjes = 0.0;
  for (const auto& [tau, w] : NF.N.atoms) {
    if (tau > lambda) break;
    stieltjes += w * std::pow(lambda - tau, half_q);
  }
  if (NF.N.has_density && lambda > 0.0) {
    QuadratureOptions qopts;
    qopts.rel_tol = 1e-10;  // tolerance 1e-10 * result on the continuous part
    stieltjes += tanh_sinh(
        [&](double tau) { return NF.N.density(tau) * std::pow(lambda - tau, half_q); }, 0.0,
        lambda, qopts);
  }
  const double prefactor = std::pow(4.0 * 3.141592653589793, -half_q) / std::tgamma(half_q + 1.0);
  return prefactor * stieltjes;
}

// Laplace transform of N_F, i.e. the leafwise heat integral.
inline double leafwise_heat_integral(const LeafwiseDistribution& NF, double t) {
  if (!(t > 0.0)) throw ConfigError("heat time must be positive");
  double total = 0.0;
  for (const auto& [tau, w] : NF.N.atoms) total += w * std::exp(-t * tau);
  if (NF.N.has_density)
    total += exp_sinh([&](double tau) { return NF.N.density(tau) * std::exp(-t * tau); });
  return total;
}

// Full heat-trace prediction (4 pi t)^{-q/2} h^{-q} * Int exp(-t tau) dN_F.
inline double rhs_heat(const LeafwiseDistribution& NF, double t, double h, int q) {
  require_scale(h);
  if (q < 1) throw ConfigError("codimension must be at least 1");
  const double coeff = std::pow(4.0 * 3.141592653589793 * t, -0.5 * q) * std::pow(h, -q);
  return coeff * leafwise_heat_integral(NF, t);
}

// Coefficient of h^{-q} in the trace-functional asymptotics.
inline double rhs_trace_of_function(const LeafwiseDistribution& NF, const TestFunction& f,
                                    int q) {
  if (q < 1) throw ConfigError("codimension must be at least 1");
  const double half_q = 0.5 * q;
  const double upper = f.upper_support();
  if (!f.decaying() && !std::isfinite(upper))
    throw UnsupportedTail("test function neither decays nor has bounded support");

  // inner weighted integral Int_0^inf sigma^{q/2-1} f(tau + sigma) dsigma
  auto inner = [&](double tau) -> double {
    if (f.decaying())
      return exp_sinh([&](double sigma) {
        const double val = f(tau + sigma);
        return val == 0.0 ? 0.0 : std::pow(sigma, half_q - 1.0) * val;
      });
    if (upper <= tau) return 0.0;
    return tanh_sinh(
        [&](double sigma) {
          const double val = f(tau + sigma);
          return val == 0.0 ? 0.0 : std::pow(sigma, half_q - 1.0) * val;
        },
        0.0, upper - tau);
  };

  double stieltjes = 0.0;
  for (const auto& [tau, w] : NF.N.atoms) {
    if (!f.decaying() && tau >= upper) break;
    stieltjes += w * inner(tau);
  }
  if (NF.N.has_density) {
    if (f.decaying())
      stieltjes += exp_sinh([&](double tau) {
        const double d = NF.N.density(tau);
        return d == 0.0 ? 0.0 : d * inner(tau);
      });
    else if (upper > 0.0)
      stieltjes += tanh_sinh([&](double tau) { return NF.N.density(tau) * inner(tau); }, 0.0,
                             upper);
  }
  const double prefactor = std::pow(4.0 * 3.141592653589793, -half_q) / std::tgamma(half_q);
  return prefactor * stieltjes;
}

struct RExponent {
  double r = 0.0;
  double residual = 0.0;       // root-mean-square residual of the log-log fit
  bool neg_infinity = false;   // every count was zero
  double bracket_lo = 0.0;     // theoretical range [0, q] for reporting
  double bracket_hi = 0.0;
};

// Least-squares slope of ln N_h(lambda) against -ln h.
inline RExponent estimate_r_exponent(const std::vector<long long>& counts,
                                     const std::vector<double>& h_schedule, int q = 0) {
  if (counts.size() != h_schedule.size())
    throw ConfigError("counts and h schedule differ in length");
  RExponent out;
  out.bracket_hi = q;
  bool any_positive = false;
  for (long long c : counts) any_positive = any_positive || c > 0;
  if (!any_positive) {
    out.neg_infinity = true;
    out.r = -std::numeric_limits<double>::infinity();
    return out;
  }
  std::vector<double> xs, ys;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (counts[i] <= 0) continue;
    xs.push_back(-std::log(h_schedule[i]));
    ys.push_back(std::log(static_cast<double>(counts[i])));
  }
  if (xs.size() < 3)
    throw InsufficientData("exponent fit needs at least 3 schedule points with positive counts, got " +
                           std::to_string(xs.size()));
  const double n = static_cast<double>(xs.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sx += xs[i];
    sy += ys[i];
    sxx += xs[i] * xs[i];
    sxy += xs[i] * ys[i];
  }
  const double denom = n * sxx - sx * sx;
  if (std::abs(denom) < 1e-14)
    throw InsufficientData("exponent fit needs distinct h values");
  out.r = (n * sxy - sx * sy) / denom;
  const double intercept = (sy - out.r * sx) / n;
  double ss = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double e = ys[i] - (out.r * xs[i] + intercept);
    ss += e * e;
  }
  out.residual = std::sqrt(ss / n);
  return out;
}

struct SweepCell {
  long long count = 0;
  bool missing = false;
  std::string failure;  // why the cell is missing
};

struct SweepReport {
  std::string model_id;
  Bigrade grade;
  int q = 1;
  std::vector<double> h_schedule;   // decreasing
  std::vector<double> lambda_grid;  // increasing
  std::vector<std::vector<SweepCell>> lhs;  // [h index][lambda index]
  std::vector<double> rhs;                  // per lambda, coefficient of h^{-q}
  // ratio h^q N_h(lambda) / rhs; NaN where rhs == 0 or the cell is missing
  std::vector<std::vector<double>> ratio;
  std::vector<std::optional<RExponent>> fitted_exponent;  // per lambda
  // cells with rhs == 0 but a positive count (the degenerate regime; must
  // stay empty on every supported model)
  std::vector<std::pair<int, int>> flagged_cells;
};

inline void validate_schedule(const std::vector<double>& h_schedule) {
  if (h_schedule.empty()) throw ConfigError("h schedule is empty");
  for (double h : h_schedule) require_scale(h);
  for (std::size_t i = 1; i < h_schedule.size(); ++i)
    if (!(h_schedule[i] < h_schedule[i - 1]))
      throw ConfigError("h schedule must be strictly decreasing");
}

// Shared sweep core: count_at(h, lambda) supplies N_h(lambda).
inline SweepReport run_sweep_core(const std::string& model_id, Bigrade grade, int q,
                                  const LeafwiseDistribution& NF,
                                  const std::vector<double>& h_schedule,
                                  const std::vector<double>& lambda_grid,
                                  const std::function<long long(double, double)>& count_at) {
  validate_schedule(h_schedule);
  if (lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (std::size_t i = 1; i < lambda_grid.size(); ++i)
    if (!(lambda_grid[i] > lambda_grid[i - 1]))
      throw ConfigError("lambda grid must be strictly increasing");

  SweepReport report;
  report.model_id = model_id;
  report.grade = grade;
  report.q = q;
  report.h_schedule = h_schedule;
  report.lambda_grid = lambda_grid;

  for (double lambda : lambda_grid) report.rhs.push_back(rhs_counting(NF, lambda, q));

  report.lhs.resize(h_schedule.size());
  report.ratio.resize(h_schedule.size());
  for (std::size_t ih = 0; ih < h_schedule.size(); ++ih) {
    report.lhs[ih].resize(lambda_grid.size());
    report.ratio[ih].assign(lambda_grid.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t il = 0; il < lambda_grid.size(); ++il) {
      SweepCell& cell = report.lhs[ih][il];
      try {
        cell.count = count_at(h_schedule[ih], lambda_grid[il]);
      } catch (const BudgetExceeded& e) {
        cell.missing = true;
        cell.failure = e.what();
        continue;
      } catch (const NoConvergence& e) {
        cell.missing = true;
        cell.failure = e.what();
        continue;
      }
      const double rhs = report.rhs[il];
      if (rhs > 0.0)
        report.ratio[ih][il] =
            std::pow(h_schedule[ih], q) * static_cast<double>(cell.count) / rhs;
      else if (cell.count > 0)
        report.flagged_cells.emplace_back(static_cast<int>(ih), static_cast<int>(il));
    }
  }

  for (std::size_t il = 0; il < lambda_grid.size(); ++il) {
    std::vector<long long> counts;
    bool usable = true;
    for (std::size_t ih = 0; ih < h_schedule.size(); ++ih) {
      if (report.lhs[ih][il].missing) {
        usable = false;
        break;
      }
      counts.push_back(report.lhs[ih][il].count);
    }
    if (!usable || h_schedule.size() < 3) {
      report.fitted_exponent.push_back(std::nullopt);
      continue;
    }
    try {
      report.fitted_exponent.push_back(estimate_r_exponent(counts, h_schedule, q));
    } catch (const InsufficientData&) {
      report.fitted_exponent.push_back(std::nullopt);
    }
  }
  return report;
}

inline SweepReport run_sweep(const FlatLinearFoliation& model, Bigrade grade,
                             const std::vector<double>& h_schedule,
                             const std::vector<double>& lambda_grid,
                             const EnumerateOptions& opts = {},
                             const std::string& model_id = "flat") {
  double top = 0.0;
  for (double l : lambda_grid) top = std::max(top, l);
  const LeafwiseDistribution NF =
      leafwise_distribution_flat(model, grade, std::max(top * 1.5, 100.0));
  return run_sweep_core(model_id, grade, model.q, NF, h_schedule, lambda_grid,
                        [&](double h, double lambda) -> long long {
                          return count_modes(model, grade, h, lambda, opts);
                        });
}

// Count discrete eigenvalues <= lambda by growing the solve until the
// spectrum passes lambda (completeness is heuristic, inherited from the
// iterative solver).  Deterministic for fixed opts.seed.
inline long long fibered_count_at(const DiscreteOperatorPair& pair, double h, double lambda,
                                  const SolveOptions& opts = {}) {
  int count = 16;
  for (;;) {
    SolveOptions local = opts;
    local.seed = opts.seed + static_cast<std::uint64_t>(count);
    const SpectrumSample sample =
        solve_fibered_spectrum(pair, h, std::min(count, pair.dim()), local);
    if (sample.raw_values.back() > lambda || count >= pair.dim()) {
      long long c = 0;
      for (double v : sample.raw_values)
        if (v <= lambda) ++c;
      return c;
    }
    count *= 2;
  }
}

inline SweepReport run_sweep(const FiberedTorusModel& model, const DiscreteOperatorPair& pair,
                             const std::vector<double>& h_schedule,
                             const std::vector<double>& lambda_grid,
                             const SolveOptions& opts = {},
                             const std::string& model_id = "fibered") {
  const LeafwiseDistribution NF = leafwise_distribution_fibered(model);
  return run_sweep_core(model_id, Bigrade{0, 0}, 1, NF, h_schedule, lambda_grid,
                        [&](double h, double lambda) -> long long {
                          return fibered_count_at(pair, h, lambda, opts);
                        });
}

struct BranchSample {
  double h = 0.0;
  double lambda = 0.0;
  // finite-difference estimate of d lambda / dh (exact 2 h eH on flat models)
  double derivative_estimate = 0.0;
  // Hellmann-Feynman value 2 h (B v, v); only distinct from the estimate on
  // the fibered model
  double hf_derivative = 0.0;
};

struct EigenBranch {
  int id = 0;
  long long multiplicity = 1;
  std::vector<BranchSample> samples;  // h strictly decreasing
  std::string matching;               // "analytic-mode" or "overlap-match"
  double limit_estimate = 0.0;
  bool richardson = false;  // limit refined through the c0 + c2 h^2 form
  bool match_ambiguity = false;  // best overlap fell below 0.5; branch truncated
  // flat models: the exact mode energies behind the branch
  double eF = 0.0, eH = 0.0;
};

// Flat-model branches are exact mode classes (eF, eH); everything is
// analytic in h, so sampling is arithmetic and the limit is eF itself.
inline std::vector<EigenBranch> track_branches(const FlatLinearFoliation& model, Bigrade grade,
                                               const std::vector<double>& h_schedule, int count,
                                               const EnumerateOptions& opts = {}) {
  validate_schedule(h_schedule);
  if (count < 1) throw ConfigError("branch count must be positive");
  const double h0 = h_schedule.front();

  // collect mode classes until count of them fit below the growing bound
  struct Class {
    double eF, eH;
    long long mult;
  };
  std::vector<Class> classes;
  double lambda_max = 50.0;
  for (int attempt = 0; attempt < 24; ++attempt) {
    classes.clear();
    std::vector<std::pair<double, double>> energies;  // (eF, eH) per admitted k
    visit_modes(model, h0, lambda_max, opts, [&](const LatticeVector& k, double) {
      ModeSymbol symbol(model, grade);
      energies.emplace_back(symbol.eF(k), symbol.eH(k));
    });
    std::sort(energies.begin(), energies.end());
    const long long mult = grade.multiplicity(model.p, model.q);
    for (const auto& [ef, eh] : energies) {
      if (!classes.empty() && std::abs(classes.back().eF - ef) <= atom_merge_tol &&
          std::abs(classes.back().eH - eh) <= atom_merge_tol)
        classes.back().mult += mult;
      else
        classes.push_back({ef, eh, mult});
    }
    // keep only classes whose h0-eigenvalue is safely inside the bound, then
    // check we have enough
    std::sort(classes.begin(), classes.end(), [&](const Class& a, const Class& b) {
      const double la = a.eF + h0 * h0 * a.eH, lb = b.eF + h0 * h0 * b.eH;
      if (la != lb) return la < lb;
      if (a.eF != b.eF) return a.eF < b.eF;
      return a.eH < b.eH;
    });
    if (static_cast<int>(classes.size()) >= count) break;
    lambda_max *= 2.0;
  }
  if (static_cast<int>(classes.size()) < count)
    throw BudgetExceeded("could not collect " + std::to_string(count) + " mode classes");

  std::vector<EigenBranch> branches;
  for (int i = 0; i < count; ++i) {
    const Class& cls = classes[i];
    EigenBranch b;
    b.id = i;
    b.multiplicity = cls.mult;
    b.matching = "analytic-mode";
    b.eF = cls.eF;
    b.eH = cls.eH;
    for (double h : h_schedule) {
      BranchSample s;
      s.h = h;
      s.lambda = cls.eF + h * h * cls.eH;
      s.derivative_estimate = 2.0 * h * cls.eH;
      s.hf_derivative = s.derivative_estimate;
      b.samples.push_back(s);
    }
    b.limit_estimate = cls.eF;  // the c0 of the exact c0 + c2 h^2 form
    b.richardson = true;
    branches.push_back(std::move(b));
  }
  return branches;
}

struct FiberedBranchOptions {
  SolveOptions solve;
  double fd_step = 1e-4;          // central difference half-step in h
  bool with_fd_derivative = true; // two extra solves per scheduled h
  double overlap_threshold = 0.5;
};

namespace detail {

// Greedy maximal-overlap assignment between two eigenvector sets.
inline std::vector<int> match_by_overlap(const Eigen::MatrixXd& prev, const Eigen::MatrixXd& next,
                                         std::vector<double>& best_overlap) {
  const int np = static_cast<int>(prev.cols());
  const int nn = static_cast<int>(next.cols());
  Eigen::MatrixXd overlap = (prev.transpose() * next).cwiseAbs();
  std::vector<int> match(np, -1);
  best_overlap.assign(np, 0.0);
  std::vector<std::tuple<double, int, int>> entries;
  for (int i = 0; i < np; ++i)
    for (int j = 0; j < nn; ++j) entries.emplace_back(overlap(i, j), i, j);
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return std::get<0>(a) > std::get<0>(b); });
  std::vector<bool> used(nn, false);
  for (const auto& [val, i, j] : entries) {
    if (match[i] != -1 || used[j]) continue;
    match[i] = j;
    used[j] = true;
    best_overlap[i] = val;
  }
  return match;
}

}  // namespace detail

// Fibered-model branches: eigenpairs at consecutive h are matched by maximal
// absolute eigenvector overlap in the symmetrized inner product.
inline std::vector<EigenBranch> track_branches(const DiscreteOperatorPair& pair,
                                               const std::vector<double>& h_schedule, int count,
                                               const FiberedBranchOptions& opts = {}) {
  validate_schedule(h_schedule);
  if (count < 1) throw ConfigError("branch count must be positive");
  const int solve_count = std::min(pair.dim(), count + 5);  // padding stabilizes matching

  std::vector<EigenBranch> branches(count);
  for (int i = 0; i < count; ++i) {
    branches[i].id = i;
    branches[i].matching = "overlap-match";
  }

  Eigen::MatrixXd prev_vectors;
  std::vector<int> column_of_branch(count);

  for (std::size_t step = 0; step < h_schedule.size(); ++step) {
    const double h = h_schedule[step];
    SolveOptions sopts = opts.solve;
    sopts.seed = opts.solve.seed + step;
    const SpectrumSample sample = solve_fibered_spectrum(pair, h, solve_count, sopts);

    std::vector<int> assignment(count);
    if (step == 0) {
      for (int i = 0; i < count; ++i) assignment[i] = i;  // ascending eigenvalue order
    } else {
      std::vector<double> overlaps;
      Eigen::MatrixXd tracked(prev_vectors.rows(), count);
      for (int i = 0; i < count; ++i) tracked.col(i) = prev_vectors.col(column_of_branch[i]);
      const std::vector<int> match =
          detail::match_by_overlap(tracked, sample.raw_vectors, overlaps);
      for (int i = 0; i < count; ++i) {
        if (branches[i].match_ambiguity) continue;
        if (match[i] < 0 || overlaps[i] < opts.overlap_threshold) {
          branches[i].match_ambiguity = true;  // truncate instead of guessing
          continue;
        }
        assignment[i] = match[i];
      }
    }

    // optional central-difference solves at h +- fd_step
    std::optional<SpectrumSample> plus, minus;
    if (opts.with_fd_derivative) {
      const double delta = opts.fd_step;
      if (h + delta <= 1.0 && h - delta > 0.0) {
        SolveOptions s2 = sopts;
        s2.seed = sopts.seed + 1000003;
        plus = solve_fibered_spectrum(pair, h + delta, solve_count, s2);
        s2.seed = sopts.seed + 2000003;
        minus = solve_fibered_spectrum(pair, h - delta, solve_count, s2);
      }
    }

    Eigen::VectorXd bv(pair.dim());
    for (int i = 0; i < count; ++i) {
      if (branches[i].match_ambiguity) continue;
      const int col = assignment[i];
      column_of_branch[i] = col;
      BranchSample s;
      s.h = h;
      s.lambda = sample.raw_values[col];
      const Eigen::VectorXd v = sample.raw_vectors.col(col);
      pair.B.multiply(v, bv);
      s.hf_derivative = 2.0 * h * v.dot(bv);
      s.derivative_estimate = s.hf_derivative;
      if (plus && minus) {
        std::vector<double> op, om;
        Eigen::MatrixXd single(pair.dim(), 1);
        single.col(0) = v;
        const std::vector<int> mp = detail::match_by_overlap(single, plus->raw_vectors, op);
        const std::vector<int> mm = detail::match_by_overlap(single, minus->raw_vectors, om);
        if (mp[0] >= 0 && mm[0] >= 0 && op[0] >= opts.overlap_threshold &&
            om[0] >= opts.overlap_threshold) {
          s.derivative_estimate = (plus->raw_values[mp[0]] - minus->raw_values[mm[0]]) /
                                  (2.0 * opts.fd_step);
        }
      }
      branches[i].samples.push_back(s);
    }
    prev_vectors = sample.raw_vectors;
  }

  for (auto& b : branches) {
    if (!b.samples.empty()) b.limit_estimate = b.samples.back().lambda;
    b.richardson = false;
  }
  return branches;
}

struct LimitSummary {
  double lambda_lim_0 = 0.0;        // smallest branch limit
  double leafwise_bottom = 0.0;     // infimum of the leafwise spectrum from N_F
  bool ordering_ok = false;         // lambda_lim_0 <= leafwise_bottom + tol
  // bottom of the tangential operator over the whole manifold: 0 on
  // functions (constants); not computed in higher degree
  std::optional<double> lambda_F_0;
  // smallest limit among branches with limit > positive_tol (the
  // zero-transverse-mode family excluded)
  std::optional<double> smallest_positive_limit;
};

inline LimitSummary limit_summary(const std::vector<EigenBranch>& branches,
                                  const LeafwiseDistribution& NF, Bigrade grade,
                                  double positive_tol = 1e-9) {
  if (branches.empty()) throw ConfigError("limit summary needs at least one branch");
  LimitSummary s;
  s.lambda_lim_0 = std::numeric_limits<double>::infinity();
  for (const auto& b : branches) {
    s.lambda_lim_0 = std::min(s.lambda_lim_0, b.limit_estimate);
    if (b.limit_estimate > positive_tol) {
      if (!s.smallest_positive_limit || b.limit_estimate < *s.smallest_positive_limit)
        s.smallest_positive_limit = b.limit_estimate;
    }
  }
  if (!NF.N.atoms.empty())
    s.leafwise_bottom = NF.N.atoms.front().first;
  else if (NF.N.has_density)
    s.leafwise_bottom = 0.0;  // support edge of the power-law density
  else
    s.leafwise_bottom = std::numeric_limits<double>::infinity();
  s.ordering_ok = s.lambda_lim_0 <= s.leafwise_bottom + 1e-9;
  if (grade.k() == 0) s.lambda_F_0 = 0.0;  // constants are tangentially harmonic
  return s;
}

}  // namespace folspec
