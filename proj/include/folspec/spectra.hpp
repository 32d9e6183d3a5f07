#pragma once

// Complete spectra below a bound and the scalar quantities derived from
// them.  Flat models are enumerated exactly over an integer box; the fibered
// model goes through the restarted Lanczos solver.  Counting functions are
// monotone Stieltjes objects shared with the leafwise module.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "folspec/errors.hpp"
#include "folspec/lanczos.hpp"
#include "folspec/models.hpp"
#include "folspec/operators.hpp"

namespace folspec {

inline constexpr double atom_merge_tol = 1e-9;

struct SpectrumSample {
  double h = 1.0;
  Bigrade grade;
  bool on_functions = true;  // false once a nontrivial bigrade weight applies
  // sorted atoms (eigenvalue, multiplicity), ties closer than atom_merge_tol
  // already merged
  std::vector<std::pair<double, long long>> eigenvalues;
  double lambda_max = 0.0;
  // complete == true: every eigenvalue <= lambda_max is present with correct
  // multiplicity.  Iterative solves set it false and record how many pairs
  // converged.
  bool complete = true;
  long long truncation_count = 0;

  // iterative solves keep the unmerged pairs for branch matching
  std::vector<double> raw_values;
  Eigen::MatrixXd raw_vectors;

  long long total_count() const {
    long long c = 0;
    for (const auto& [v, m] : eigenvalues) c += m;
    return c;
  }
};

namespace detail {

inline std::vector<std::pair<double, long long>> merge_atoms(std::vector<double> values,
                                                             long long multiplicity_each) {
  std::sort(values.begin(), values.end());
  std::vector<std::pair<double, long long>> out;
  for (double v : values) {
    if (!out.empty() && v - out.back().first <= atom_merge_tol)
      out.back().second += multiplicity_each;
    else
      out.emplace_back(v, multiplicity_each);
  }
  return out;
}

}  // namespace detail

struct EnumerateOptions {
  long long candidate_cap = 100000000;  // box size guard, not a mode-count guard
};

// Walks the integer box |k_i| <= ceil(sqrt(lambda_max)/(2 pi h)) and hands
// every admitted mode (eigenvalue <= lambda_max) to the visitor.  The box is
// conservative: eF + h^2 eH >= h^2 |2 pi k|^2, so nothing outside it can pass
// the filter.
template <typename Visitor>
void visit_modes(const FlatLinearFoliation& model, double h, double lambda_max,
                 const EnumerateOptions& opts, Visitor&& visit) {
  require_scale(h);
  if (lambda_max < 0.0)
    throw ConfigError("lambda_max must be nonnegative, got " + std::to_string(lambda_max));
  const int n = model.n;
  const long long bound =
      static_cast<long long>(std::ceil(std::sqrt(lambda_max) / (two_pi * h)));
  const double per_axis = 2.0 * static_cast<double>(bound) + 1.0;
  if (std::pow(per_axis, n) > static_cast<double>(opts.candidate_cap))
    throw BudgetExceeded("mode enumeration box of " + std::to_string(bound) +
                         "^" + std::to_string(n) + " candidates exceeds the cap of " +
                         std::to_string(opts.candidate_cap));

  ModeSymbol symbol(model);
  LatticeVector k(n, 0);
  const double h2 = h * h;
  std::function<void(int)> walk = [&](int dim) {
    if (dim == n) {
      const double ef = symbol.eF(k);
      const double eh = symbol.eH(k);
      const double lambda = ef + h2 * eh;
      if (lambda <= lambda_max) visit(k, lambda);
      return;
    }
    for (long long c = -bound; c <= bound; ++c) {
      k[dim] = c;
      walk(dim + 1);
    }
    k[dim] = 0;
  };
  walk(0);
}

inline SpectrumSample enumerate_modes(const FlatLinearFoliation& model, Bigrade grade, double h,
                                      double lambda_max, const EnumerateOptions& opts = {}) {
  const long long mult = grade.multiplicity(model.p, model.q);
  std::vector<double> values;
  visit_modes(model, h, lambda_max, opts,
              [&](const LatticeVector&, double lambda) { values.push_back(lambda); });
  SpectrumSample sample;
  sample.h = h;
  sample.grade = grade;
  sample.on_functions = (grade.i == 0 && grade.j == 0);
  sample.lambda_max = lambda_max;
  sample.complete = true;
  sample.eigenvalues = detail::merge_atoms(std::move(values), mult);
  sample.truncation_count = sample.total_count();
  return sample;
}

// Streaming count of modes with eigenvalue <= lambda; nothing is stored.
inline long long count_modes(const FlatLinearFoliation& model, Bigrade grade, double h,
                             double lambda, const EnumerateOptions& opts = {}) {
  if (lambda < 0.0) return 0;
  const long long mult = grade.multiplicity(model.p, model.q);
  long long count = 0;
  visit_modes(model, h, lambda, opts, [&](const LatticeVector&, double) { count += mult; });
  return count;
}

struct SolveOptions {
  double residual_tol = 1e-8;  // scaled by max(1, |lambda|)
  long long max_matvecs = 0;   // 0 means 2000 plus 400 per eigenvalue
  std::uint64_t seed = 0x5eed;
};

inline SpectrumSample solve_fibered_spectrum(const DiscreteOperatorPair& pair, double h,
                                             int count, const SolveOptions& opts = {}) {
  require_scale(h);
  if (count < 1 || count > pair.dim())
    throw ConfigError("eigenvalue count must lie in [1, " + std::to_string(pair.dim()) +
                      "], got " + std::to_string(count));
  LanczosOptions lopts;
  lopts.tol_scale = opts.residual_tol;
  lopts.max_matvecs = opts.max_matvecs > 0 ? opts.max_matvecs : 2000LL + 400LL * count;
  lopts.seed = opts.seed;
  auto apply = [&pair, h](const Eigen::VectorXd& x, Eigen::VectorXd& y) {
    pair.apply(h, x, y);
  };
  LowestPairs pairs = lanczos_lowest(apply, pair.dim(), count, lopts);

  SpectrumSample sample;
  sample.h = h;
  sample.grade = Bigrade{0, 0};
  sample.on_functions = true;
  sample.raw_values = pairs.values;
  sample.raw_vectors = std::move(pairs.vectors);
  sample.eigenvalues = detail::merge_atoms(pairs.values, 1);
  sample.lambda_max = pairs.values.empty() ? 0.0 : pairs.values.back();
  sample.complete = false;  // completeness below the bound is heuristic here
  sample.truncation_count = count;
  return sample;
}

// Monotone Stieltjes object: atoms plus an optional absolutely continuous
// part whose cumulative mass is power_coeff * tau^power_exponent.  The
// closed-form cumulative keeps evaluation exact; density samples for
// serialization are generated from the derivative on demand.
struct CountingFunction {
  std::vector<std::pair<double, double>> atoms;  // (tau, weight), tau strictly increasing
  bool has_density = false;
  double power_coeff = 0.0;
  double power_exponent = 1.0;
  double tau_max = std::numeric_limits<double>::infinity();

  static CountingFunction from_atoms(std::vector<std::pair<double, double>> raw,
                                     double merge_tol = atom_merge_tol) {
    std::sort(raw.begin(), raw.end());
    CountingFunction f;
    for (const auto& [tau, w] : raw) {
      if (w == 0.0) continue;
      if (!f.atoms.empty() && tau - f.atoms.back().first <= merge_tol)
        f.atoms.back().second += w;
      else
        f.atoms.emplace_back(tau, w);
    }
    return f;
  }

  static CountingFunction power_law(double coeff, double exponent) {
    CountingFunction f;
    f.has_density = true;
    f.power_coeff = coeff;
    f.power_exponent = exponent;
    return f;
  }

  // N(lambda) with the closed inequality tau <= lambda
  double operator()(double lambda) const {
    if (lambda < 0.0) return 0.0;
    double total = 0.0;
    auto it = std::upper_bound(atoms.begin(), atoms.end(),
                               std::make_pair(lambda, std::numeric_limits<double>::infinity()));
    for (auto a = atoms.begin(); a != it; ++a) total += a->second;
    if (has_density && lambda > 0.0)
      total += power_coeff * std::pow(lambda, power_exponent);
    return total;
  }

  double density(double tau) const {
    if (!has_density || tau <= 0.0) return 0.0;
    return power_coeff * power_exponent * std::pow(tau, power_exponent - 1.0);
  }

  double total_atom_mass() const {
    double m = 0.0;
    for (const auto& [tau, w] : atoms) m += w;
    return m;
  }
};

inline CountingFunction counting_function(const SpectrumSample& sample) {
  std::vector<std::pair<double, double>> raw;
  raw.reserve(sample.eigenvalues.size());
  for (const auto& [v, m] : sample.eigenvalues)
    raw.emplace_back(v, static_cast<double>(m));
  CountingFunction f = CountingFunction::from_atoms(std::move(raw));
  f.tau_max = sample.lambda_max;
  return f;
}

struct HeatTraceResult {
  double value = 0.0;
  // true when exp(-t lambda_max) <= 1e-12 * value, i.e. the unseen tail of
  // an eigenvalue list truncated at lambda_max cannot matter at this t
  bool tail_negligible = true;
};

inline HeatTraceResult heat_trace(const SpectrumSample& sample, double t) {
  if (!(t > 0.0)) throw ConfigError("heat-trace time must be positive, got " + std::to_string(t));
  HeatTraceResult r;
  for (const auto& [v, m] : sample.eigenvalues)
    r.value += static_cast<double>(m) * std::exp(-t * v);
  r.tail_negligible = std::exp(-t * sample.lambda_max) <= 1e-12 * r.value;
  return r;
}

// The built-in family of scalar test functions for trace functionals.
struct TestFunction {
  enum class Kind { Gaussian, Bump, SmoothedIndicator };
  Kind kind = Kind::Gaussian;
  double t = 1.0;            // Gaussian decay rate
  double alpha = 0.0;        // bump support
  double beta = 1.0;
  double lambda0 = 0.0;      // indicator position
  double width = 1.0;        // indicator ramp width

  static TestFunction gaussian(double t) {
    if (!(t > 0.0)) throw ConfigError("Gaussian rate must be positive");
    TestFunction f;
    f.kind = Kind::Gaussian;
    f.t = t;
    return f;
  }
  static TestFunction bump(double alpha, double beta) {
    if (!(beta > alpha)) throw ConfigError("bump support must have beta > alpha");
    TestFunction f;
    f.kind = Kind::Bump;
    f.alpha = alpha;
    f.beta = beta;
    return f;
  }
  static TestFunction smoothed_indicator(double lambda0, double width) {
    if (!(width > 0.0)) throw ConfigError("indicator ramp width must be positive");
    TestFunction f;
    f.kind = Kind::SmoothedIndicator;
    f.lambda0 = lambda0;
    f.width = width;
    return f;
  }

  double operator()(double lambda) const {
    switch (kind) {
      case Kind::Gaussian:
        return std::exp(-t * lambda);
      case Kind::Bump: {
        if (lambda <= alpha || lambda >= beta) return 0.0;
        const double c = 0.5 * (alpha + beta);
        const double u = 2.0 * (lambda - c) / (beta - alpha);
        return 0.5 * (1.0 + std::cos(3.141592653589793 * u));
      }
      case Kind::SmoothedIndicator: {
        if (lambda <= lambda0 - 0.5 * width) return 1.0;
        if (lambda >= lambda0 + 0.5 * width) return 0.0;
        return 0.5 * (1.0 - std::sin(3.141592653589793 * (lambda - lambda0) / width));
      }
    }
    return 0.0;
  }

  bool decaying() const { return kind == Kind::Gaussian; }

  // smallest S with f = 0 on (S, infinity); infinity for the Gaussian
  double upper_support() const {
    switch (kind) {
      case Kind::Gaussian: return std::numeric_limits<double>::infinity();
      case Kind::Bump: return beta;
      case Kind::SmoothedIndicator: return lambda0 + 0.5 * width;
    }
    return 0.0;
  }
};

struct TraceResult {
  double value = 0.0;
  bool tail_negligible = true;
};

inline TraceResult trace_of_function(const SpectrumSample& sample, const TestFunction& f) {
  if (!f.decaying() && f.upper_support() > sample.lambda_max)
    throw UnsupportedTail("test-function support reaches " +
                          std::to_string(f.upper_support()) +
                          " but the sample is only complete to " +
                          std::to_string(sample.lambda_max));
  TraceResult r;
  for (const auto& [v, m] : sample.eigenvalues) r.value += static_cast<double>(m) * f(v);
  if (f.decaying())
    r.tail_negligible = f(sample.lambda_max) <= 1e-12 * std::max(std::abs(r.value), 1e-300);
  return r;
}

}  // namespace folspec
