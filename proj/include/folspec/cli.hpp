#pragma once

// Command implementations behind the folspec executable.  Every command
// reads one experiment config, writes CSV/JSON into the output directory,
// and is bit-reproducible for a fixed config and seed: no timestamps, no
// wall-clock data, and sweep cells give identical bytes for any worker
// count because cells are computed independently and merged in a fixed
// order.

#include <atomic>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "folspec/adiabatic.hpp"
#include "folspec/config.hpp"
#include "folspec/criteria.hpp"
#include "folspec/leafwise.hpp"
#include "folspec/serialize.hpp"

namespace folspec {

namespace cli_detail {

inline std::string file_stem(const ExperimentConfig& cfg, const std::string& command) {
  return command + "_" + cfg.model.label() + "_g" + std::to_string(cfg.grade.i) +
         std::to_string(cfg.grade.j) + "_" + hash_of_doubles(cfg.h_schedule);
}

inline void require_functions_grade(const ExperimentConfig& cfg) {
  if (cfg.model.type == "fibered" && (cfg.grade.i != 0 || cfg.grade.j != 0))
    throw ConfigError("grade: the fibered model is computed on functions only, set i = j = 0");
}

// commas and newlines would break the one-line CSV cells
inline std::string csv_text(std::string s) {
  for (char& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

inline EnumerateOptions enumerate_options(const ExperimentConfig& cfg) {
  EnumerateOptions opts;
  opts.candidate_cap = cfg.candidate_cap;
  return opts;
}

inline SolveOptions solve_options(const ExperimentConfig& cfg) {
  SolveOptions opts;
  opts.residual_tol = cfg.residual_tol;
  opts.max_matvecs = cfg.max_matvecs;
  opts.seed = cfg.seed;
  return opts;
}

struct CellOutcome {
  long long count = 0;
  int kind = 0;  // 0 ok, 1 budget, 2 no-convergence, 3 other
  std::string message;
};

// Evaluate every (h, lambda) cell independently; safe to run on any number
// of threads because cells share no state and each carries its own seed.
template <typename Counter>
std::vector<std::vector<CellOutcome>> compute_cells(const Counter& counter,
                                                    const std::vector<double>& schedule,
                                                    const std::vector<double>& grid,
                                                    int workers) {
  std::vector<std::vector<CellOutcome>> cells(schedule.size(),
                                              std::vector<CellOutcome>(grid.size()));
  const std::size_t total = schedule.size() * grid.size();
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next.fetch_add(1); i < total; i = next.fetch_add(1)) {
      const std::size_t ih = i / grid.size(), il = i % grid.size();
      CellOutcome& cell = cells[ih][il];
      try {
        cell.count = counter(schedule[ih], grid[il]);
      } catch (const BudgetExceeded& e) {
        cell.kind = 1;
        cell.message = e.what();
      } catch (const NoConvergence& e) {
        cell.kind = 2;
        cell.message = e.what();
      } catch (const std::exception& e) {
        cell.kind = 3;
        cell.message = e.what();
      }
    }
  };
  const int threads = std::max(1, std::min(workers, static_cast<int>(total)));
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < threads; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return cells;
}

inline std::size_t index_of(const std::vector<double>& values, double v) {
  for (std::size_t i = 0; i < values.size(); ++i)
    if (values[i] == v) return i;
  throw Error("internal: sweep cell lookup failed");
}

inline nlohmann::json exponent_json(const std::optional<RExponent>& fit) {
  if (!fit) return nullptr;
  nlohmann::json j;
  j["neg_infinity"] = fit->neg_infinity;
  if (!fit->neg_infinity) {
    j["r"] = fit->r;
    j["residual"] = fit->residual;
  }
  return j;
}

inline nlohmann::json summary_json(const LimitSummary& s) {
  nlohmann::json j;
  j["lambda_lim_0"] = s.lambda_lim_0;
  j["leafwise_bottom"] = s.leafwise_bottom;
  j["ordering_ok"] = s.ordering_ok;
  j["lambda_F_0"] = s.lambda_F_0 ? nlohmann::json(*s.lambda_F_0) : nlohmann::json(nullptr);
  j["smallest_positive_limit"] = s.smallest_positive_limit
                                     ? nlohmann::json(*s.smallest_positive_limit)
                                     : nlohmann::json(nullptr);
  return j;
}

}  // namespace cli_detail

// Eigenvalue listings per scheduled h: one CSV row per counting unit (atoms
// repeat with their multiplicity), so the data-row count at a single h is
// exactly N_h(lambda_max) on enumerable models.
inline int cmd_spectrum(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  using namespace cli_detail;
  require_functions_grade(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = file_stem(cfg, "spectrum");

  CsvTable table;
  table.comments = file_stamp(cfg.config_hash, cfg.seed);
  table.columns = {"h", "eigenvalue", "multiplicity"};
  nlohmann::json runs = nlohmann::json::array();

  auto append_sample = [&](const SpectrumSample& sample) {
    for (const auto& [value, mult] : sample.eigenvalues)
      for (long long r = 0; r < mult; ++r)
        table.rows.push_back(
            {format_double(sample.h), format_double(value), format_int(mult)});
    runs.push_back({{"h", sample.h},
                    {"count", sample.total_count()},
                    {"lambda_max", sample.lambda_max},
                    {"complete", sample.complete},
                    {"truncation_count", sample.truncation_count}});
  };

  if (cfg.model.type == "flat") {
    const FlatLinearFoliation model = build_flat_from_config(cfg);
    for (double h : cfg.h_schedule)
      append_sample(enumerate_modes(model, cfg.grade, h, cfg.lambda_max,
                                    enumerate_options(cfg)));
  } else {
    const FiberedTorusModel model = build_fibered_from_config(cfg);
    const DiscreteOperatorPair pair = assemble_fibered_operators(model);
    const int count = std::min(cfg.eigen_count, pair.dim());
    for (double h : cfg.h_schedule)
      append_sample(solve_fibered_spectrum(pair, h, count, solve_options(cfg)));
  }

  const std::filesystem::path csv_path = std::filesystem::path(cfg.out_dir) / (stem + ".csv");
  write_csv_file(csv_path, table);

  nlohmann::json manifest = manifest_base("spectrum", cfg.config_hash, cfg.seed);
  manifest["config"] = resolved_config(cfg);
  manifest["runs"] = runs;
  manifest["files"] = {stem + ".csv"};
  const std::filesystem::path json_path = std::filesystem::path(cfg.out_dir) / (stem + ".json");
  write_json_file(json_path, manifest);

  log << "spectrum: " << table.rows.size() << " rows over " << cfg.h_schedule.size()
      << " value(s) of h\n";
  log << "wrote " << csv_path.string() << "\n";
  log << "wrote " << json_path.string() << "\n";
  return 0;
}

// Counting-function sweep over the (h, lambda) grid with the leafwise
// right-hand side, ratios, fitted exponents, and the degenerate-cell flags.
inline int cmd_sweep(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  using namespace cli_detail;
  require_functions_grade(cfg);
  validate_schedule(cfg.h_schedule);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = file_stem(cfg, "sweep");

  // the model-specific pieces: leafwise distribution, codimension, counter
  std::optional<FlatLinearFoliation> flat;
  std::optional<FiberedTorusModel> fibered;
  std::optional<DiscreteOperatorPair> pair;
  LeafwiseDistribution NF;
  int q = 1;
  std::function<long long(double, double)> counter;
  if (cfg.model.type == "flat") {
    flat = build_flat_from_config(cfg);
    NF = leafwise_distribution_flat(*flat, cfg.grade,
                                    std::max(cfg.lambda_grid.back() * 1.5, 100.0));
    q = flat->q;
    counter = [&, eopts = enumerate_options(cfg)](double h, double lambda) {
      return count_modes(*flat, cfg.grade, h, lambda, eopts);
    };
  } else {
    fibered = build_fibered_from_config(cfg);
    pair = assemble_fibered_operators(*fibered);
    NF = leafwise_distribution_fibered(*fibered);
    q = 1;
    counter = [&, sopts = solve_options(cfg)](double h, double lambda) {
      return fibered_count_at(*pair, h, lambda, sopts);
    };
  }

  const auto cells = compute_cells(counter, cfg.h_schedule, cfg.lambda_grid, cfg.workers);
  const SweepReport report = run_sweep_core(
      cfg.model.label(), cfg.grade, q, NF, cfg.h_schedule, cfg.lambda_grid,
      [&](double h, double lambda) -> long long {
        const CellOutcome& cell =
            cells[index_of(cfg.h_schedule, h)][index_of(cfg.lambda_grid, lambda)];
        if (cell.kind == 1) throw BudgetExceeded(cell.message);
        if (cell.kind == 2) throw NoConvergence(cell.message);
        if (cell.kind == 3) throw Error(cell.message);
        return cell.count;
      });

  CsvTable table;
  table.comments = file_stamp(cfg.config_hash, cfg.seed);
  table.columns = {"h", "lambda", "count", "missing", "failure", "rhs", "ratio"};
  long long missing = 0;
  for (std::size_t ih = 0; ih < report.h_schedule.size(); ++ih)
    for (std::size_t il = 0; il < report.lambda_grid.size(); ++il) {
      const SweepCell& cell = report.lhs[ih][il];
      missing += cell.missing ? 1 : 0;
      table.rows.push_back({format_double(report.h_schedule[ih]),
                            format_double(report.lambda_grid[il]), format_int(cell.count),
                            cell.missing ? "1" : "0", csv_text(cell.failure),
                            format_double(report.rhs[il]),
                            format_double(report.ratio[ih][il])});
    }
  const std::filesystem::path csv_path = std::filesystem::path(cfg.out_dir) / (stem + ".csv");
  write_csv_file(csv_path, table);

  CsvTable leafwise;
  leafwise.comments = file_stamp(cfg.config_hash, cfg.seed);
  leafwise.columns = {"tau", "jump_or_density", "kind"};
  const char* kind = to_string(NF.kind);
  for (const auto& [tau, weight] : NF.N.atoms)
    leafwise.rows.push_back({format_double(tau), format_double(weight), kind});
  if (NF.N.has_density)
    for (double lambda : report.lambda_grid)
      leafwise.rows.push_back(
          {format_double(lambda), format_double(NF.N.density(lambda)), kind});
  const std::filesystem::path nf_path =
      std::filesystem::path(cfg.out_dir) / (stem + "_leafwise.csv");
  write_csv_file(nf_path, leafwise);

  nlohmann::json manifest = manifest_base("sweep", cfg.config_hash, cfg.seed);
  manifest["config"] = resolved_config(cfg);
  manifest["model_id"] = report.model_id;
  manifest["q"] = report.q;
  manifest["rhs"] = report.rhs;
  nlohmann::json fits = nlohmann::json::array();
  for (const auto& fit : report.fitted_exponent) fits.push_back(exponent_json(fit));
  manifest["fitted_exponent"] = fits;
  nlohmann::json flagged = nlohmann::json::array();
  for (const auto& [ih, il] : report.flagged_cells) flagged.push_back({ih, il});
  manifest["flagged_cells"] = flagged;
  manifest["flags_empty"] = report.flagged_cells.empty();
  manifest["missing_cells"] = missing;
  manifest["all_cells_present"] = missing == 0;
  manifest["files"] = {stem + ".csv", stem + "_leafwise.csv"};
  const std::filesystem::path json_path = std::filesystem::path(cfg.out_dir) / (stem + ".json");
  write_json_file(json_path, manifest);

  log << "sweep: " << table.rows.size() << " cells, " << missing << " missing, "
      << report.flagged_cells.size() << " flagged\n";
  log << "wrote " << csv_path.string() << "\n";
  log << "wrote " << nf_path.string() << "\n";
  log << "wrote " << json_path.string() << "\n";
  return 0;
}

// Heat traces against the leafwise heat right-hand side for every scheduled
// (t, h) pair, with the fitted O(h) envelope per t.
inline int cmd_heat(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  using namespace cli_detail;
  require_functions_grade(cfg);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = file_stem(cfg, "heat");

  double t_min = cfg.t_values.front();
  for (double t : cfg.t_values) t_min = std::min(t_min, t);

  CsvTable table;
  table.comments = file_stamp(cfg.config_hash, cfg.seed);
  table.columns = {"t", "h", "trace", "rhs", "ratio", "tail_negligible"};
  nlohmann::json per_t = nlohmann::json::array();

  auto emit = [&](double t, double h, const HeatTraceResult& tr, double rhs, double& c_fit) {
    const double ratio = rhs != 0.0 ? tr.value / rhs : std::numeric_limits<double>::quiet_NaN();
    if (rhs != 0.0) c_fit = std::max(c_fit, std::abs(ratio - 1.0) / h);
    table.rows.push_back({format_double(t), format_double(h), format_double(tr.value),
                          format_double(rhs), format_double(ratio),
                          tr.tail_negligible ? "1" : "0"});
  };

  if (cfg.model.type == "flat") {
    const FlatLinearFoliation model = build_flat_from_config(cfg);
    const LeafwiseDistribution NF = leafwise_distribution_flat(
        model, cfg.grade, std::max(100.0, 40.0 / t_min));
    for (double t : cfg.t_values) {
      double c_fit = 0.0;
      for (double h : cfg.h_schedule) {
        // grow the enumeration window until the dropped tail is negligible
        double lambda_max = std::max(cfg.lambda_max, 40.0 / t);
        SpectrumSample sample;
        HeatTraceResult tr;
        for (int attempt = 0; attempt < 4; ++attempt) {
          sample = enumerate_modes(model, cfg.grade, h, lambda_max, enumerate_options(cfg));
          tr = heat_trace(sample, t);
          if (tr.tail_negligible) break;
          lambda_max *= 2.0;
        }
        emit(t, h, tr, rhs_heat(NF, t, h, model.q), c_fit);
      }
      per_t.push_back({{"t", t}, {"fitted_C", c_fit}});
    }
  } else {
    const FiberedTorusModel model = build_fibered_from_config(cfg);
    const DiscreteOperatorPair pair = assemble_fibered_operators(model);
    const LeafwiseDistribution NF = leafwise_distribution_fibered(model);
    const int count = std::min(cfg.eigen_count, pair.dim());
    for (double t : cfg.t_values) {
      double c_fit = 0.0;
      for (double h : cfg.h_schedule) {
        const SpectrumSample sample = solve_fibered_spectrum(pair, h, count, solve_options(cfg));
        emit(t, h, heat_trace(sample, t), rhs_heat(NF, t, h, 1), c_fit);
      }
      per_t.push_back({{"t", t}, {"fitted_C", c_fit}});
    }
  }

  const std::filesystem::path csv_path = std::filesystem::path(cfg.out_dir) / (stem + ".csv");
  write_csv_file(csv_path, table);
  nlohmann::json manifest = manifest_base("heat", cfg.config_hash, cfg.seed);
  manifest["config"] = resolved_config(cfg);
  manifest["per_t"] = per_t;
  manifest["files"] = {stem + ".csv"};
  const std::filesystem::path json_path = std::filesystem::path(cfg.out_dir) / (stem + ".json");
  write_json_file(json_path, manifest);

  log << "heat: " << table.rows.size() << " (t, h) pairs\n";
  log << "wrote " << csv_path.string() << "\n";
  log << "wrote " << json_path.string() << "\n";
  return 0;
}

// Eigenvalue branches along the h schedule with both derivative estimates,
// adiabatic limits, and the ordering summary against the leafwise spectrum.
inline int cmd_branches(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  using namespace cli_detail;
  require_functions_grade(cfg);
  validate_schedule(cfg.h_schedule);
  std::filesystem::create_directories(cfg.out_dir);
  const std::string stem = file_stem(cfg, "branches");

  std::vector<EigenBranch> branches;
  LeafwiseDistribution NF;
  if (cfg.model.type == "flat") {
    const FlatLinearFoliation model = build_flat_from_config(cfg);
    branches = track_branches(model, cfg.grade, cfg.h_schedule, cfg.branch_count,
                              enumerate_options(cfg));
    NF = leafwise_distribution_flat(model, cfg.grade, 1e4);
  } else {
    const FiberedTorusModel model = build_fibered_from_config(cfg);
    const DiscreteOperatorPair pair = assemble_fibered_operators(model);
    FiberedBranchOptions opts;
    opts.solve = solve_options(cfg);
    opts.fd_step = cfg.fd_step;
    branches = track_branches(pair, cfg.h_schedule, std::min(cfg.branch_count, pair.dim()),
                              opts);
    NF = leafwise_distribution_fibered(model);
  }
  const LimitSummary summary = limit_summary(branches, NF, cfg.grade);

  CsvTable table;
  table.comments = file_stamp(cfg.config_hash, cfg.seed);
  table.columns = {"branch",     "multiplicity",        "matching", "h",
                   "lambda",     "derivative_estimate", "hf_derivative"};
  nlohmann::json blist = nlohmann::json::array();
  for (const auto& b : branches) {
    for (const auto& s : b.samples)
      table.rows.push_back({format_int(b.id), format_int(b.multiplicity), b.matching,
                            format_double(s.h), format_double(s.lambda),
                            format_double(s.derivative_estimate),
                            format_double(s.hf_derivative)});
    blist.push_back({{"id", b.id},
                     {"multiplicity", b.multiplicity},
                     {"matching", b.matching},
                     {"limit_estimate", b.limit_estimate},
                     {"richardson", b.richardson},
                     {"match_ambiguity", b.match_ambiguity},
                     {"eF", b.eF},
                     {"eH", b.eH},
                     {"samples", b.samples.size()}});
  }
  const std::filesystem::path csv_path = std::filesystem::path(cfg.out_dir) / (stem + ".csv");
  write_csv_file(csv_path, table);

  nlohmann::json manifest = manifest_base("branches", cfg.config_hash, cfg.seed);
  manifest["config"] = resolved_config(cfg);
  manifest["branches"] = blist;
  manifest["limit_summary"] = summary_json(summary);
  manifest["files"] = {stem + ".csv"};
  const std::filesystem::path json_path = std::filesystem::path(cfg.out_dir) / (stem + ".json");
  write_json_file(json_path, manifest);

  log << "branches: " << branches.size() << " branches, ordering "
      << (summary.ordering_ok ? "ok" : "VIOLATED") << "\n";
  log << "wrote " << csv_path.string() << "\n";
  log << "wrote " << json_path.string() << "\n";
  return 0;
}

// Invariant checks on top of the reduced acceptance checklist; the exit code
// is the id of the first failing row, zero when everything holds.
inline int cmd_verify(const ExperimentConfig& cfg, std::ostream& log = std::cout) {
  using namespace cli_detail;
  using criteria_detail::fmt;
  std::filesystem::create_directories(cfg.out_dir);

  CriteriaOptions copts;
  copts.reduced = true;
  copts.hf_model = cfg.model.fibered;
  copts.exponent_schedule = cfg.h_schedule;
  copts.seed = cfg.seed;
  std::vector<CriterionResult> results = run_acceptance_criteria(copts);

  auto push = [&](int id, const std::string& name, auto&& body) {
    CriterionResult r;
    r.id = id;
    r.name = name;
    const auto start = std::chrono::steady_clock::now();
    try {
      const criteria_detail::Verdict v = body();
      r.pass = v.pass;
      r.detail = v.detail;
    } catch (const std::exception& e) {
      r.pass = false;
      r.detail = e.what();
    }
    r.elapsed_s =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(std::move(r));
  };

  // 13: frame rows stay orthonormal to 1e-12 on every flat model in play
  push(13, "frame-orthonormality", [&]() -> criteria_detail::Verdict {
    std::vector<FlatLinearFoliation> models = {criteria_detail::kronecker(),
                                               criteria_detail::axis(),
                                               criteria_detail::slope32()};
    if (cfg.model.type == "flat") models.push_back(build_flat_from_config(cfg));
    double worst = 0.0;
    for (const auto& m : models) {
      Eigen::MatrixXd frame(m.n, m.n);
      frame.topRows(m.p) = m.U;
      frame.bottomRows(m.q) = m.W;
      const Eigen::MatrixXd defect =
          frame * frame.transpose() - Eigen::MatrixXd::Identity(m.n, m.n);
      worst = std::max(worst, defect.cwiseAbs().maxCoeff());
    }
    return {worst <= 1e-12, "worst frame defect " + fmt(worst) + " (tol 1e-12)"};
  });

  // 14: assembled operators are symmetric, annihilate the constant, and stay
  // nonnegative on random Ritz vectors
  push(14, "assembly-positivity", [&]() -> criteria_detail::Verdict {
    const FiberedTorusModel model = build_fibered_model(
        cfg.model.fibered.nx, cfg.model.fibered.ny, cfg.model.fibered.a, cfg.model.fibered.b);
    const DiscreteOperatorPair pair = assemble_fibered_operators(model);
    const double scale = std::max(pair.A.max_abs_row_sum(), pair.B.max_abs_row_sum());
    const double asym = std::max(pair.A.max_asymmetry(), pair.B.max_asymmetry());
    if (asym > 1e-12 * scale)
      return {false, "asymmetry " + fmt(asym) + " exceeds 1e-12 * " + fmt(scale)};
    const Eigen::VectorXd c = pair.constant_image();
    Eigen::VectorXd img(pair.dim());
    pair.A.multiply(c, img);
    double kernel_defect = img.cwiseAbs().maxCoeff();
    pair.B.multiply(c, img);
    kernel_defect = std::max(kernel_defect, img.cwiseAbs().maxCoeff());
    if (kernel_defect > 1e-10 * scale)
      return {false, "constant image defect " + fmt(kernel_defect) + " exceeds 1e-10 * " +
                         fmt(scale)};
    std::mt19937_64 rng(cfg.seed ^ 0x9152'7ee1u);
    std::normal_distribution<double> gauss(0.0, 1.0);
    double min_ritz = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      Eigen::VectorXd v(pair.dim());
      for (int i = 0; i < pair.dim(); ++i) v(i) = gauss(rng);
      v.normalize();
      pair.apply(0.5, v, img);
      min_ritz = std::min(min_ritz, v.dot(img));
    }
    if (min_ritz < -1e-9)
      return {false, "negative Ritz value " + fmt(min_ritz) + " below -1e-9"};
    return {true, "symmetry/kernel/positivity hold (worst Ritz " + fmt(min_ritz) + ")"};
  });

  // 15: tangential and transverse mode energies recombine into |2 pi k|^2
  push(15, "mode-energy-identity", [&]() -> criteria_detail::Verdict {
    std::mt19937_64 rng(cfg.seed ^ 0x51de'ca11u);
    std::uniform_int_distribution<long long> ki(-50, 50);
    double worst = 0.0;
    for (const auto& model : {criteria_detail::kronecker(), criteria_detail::slope32()}) {
      const ModeSymbol symbol(model);
      for (int trial = 0; trial < 100; ++trial) {
        const LatticeVector k{ki(rng), ki(rng)};
        const double total = criteria_detail::four_pi_sq *
                             static_cast<double>(k[0] * k[0] + k[1] * k[1]);
        const double err = std::abs(symbol.eF(k) + symbol.eH(k) - total);
        worst = std::max(worst, err / std::max(1.0, total));
      }
    }
    return {worst <= 1e-10, "worst energy-split defect " + fmt(worst) + " (tol 1e-10)"};
  });

  // 16: on flat models the h-derivative of a mode eigenvalue matches 2 h eH
  push(16, "mode-derivative", [&]() -> criteria_detail::Verdict {
    const FlatLinearFoliation model = criteria_detail::kronecker();
    const ModeSymbol symbol(model);
    const double delta = 1e-4;
    double worst = 0.0;
    for (const LatticeVector& k :
         {LatticeVector{1, 0}, LatticeVector{2, -1}, LatticeVector{-3, 4}})
      for (double h : {0.9, 0.5, 0.1}) {
        const double fd = (mode_eigenvalue(symbol, k, h + delta) -
                           mode_eigenvalue(symbol, k, h - delta)) /
                          (2.0 * delta);
        const double exact = 2.0 * h * symbol.eH(k);
        worst = std::max(worst, std::abs(fd - exact) / std::max(1.0, std::abs(exact)));
      }
    return {worst <= 1e-10, "worst derivative defect " + fmt(worst) + " (tol 1e-10)"};
  });

  // 17: the iterative solve is deterministic for a fixed seed
  push(17, "solver-determinism", [&]() -> criteria_detail::Verdict {
    const FiberedTorusModel model = build_fibered_model(16, 16, cfg.model.fibered.a,
                                                        cfg.model.fibered.b);
    const DiscreteOperatorPair pair = assemble_fibered_operators(model);
    SolveOptions sopts;
    sopts.seed = cfg.seed;
    const SpectrumSample first = solve_fibered_spectrum(pair, 0.5, 6, sopts);
    const SpectrumSample second = solve_fibered_spectrum(pair, 0.5, 6, sopts);
    if (first.raw_values.size() != second.raw_values.size())
      return {false, "repeat solve returned a different eigenvalue count"};
    for (std::size_t i = 0; i < first.raw_values.size(); ++i)
      if (first.raw_values[i] != second.raw_values[i])
        return {false, "eigenvalue " + std::to_string(i) + " differs between repeat solves"};
    return {true, "repeat solves agree bit for bit"};
  });

  int first_fail = 0;
  for (const auto& r : results) {
    char line[512];
    std::snprintf(line, sizeof(line), "[%2d] %s %-26s %s (%.2fs)", r.id,
                  r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str(), r.elapsed_s);
    log << line << "\n";
    if (!r.pass && first_fail == 0) first_fail = r.id;
  }
  if (first_fail == 0)
    log << "verify: PASS (" << results.size() << " checks)\n";
  else
    log << "verify: FAIL (first failing check " << first_fail << ")\n";

  nlohmann::json manifest = manifest_base("verify", cfg.config_hash, cfg.seed);
  manifest["config"] = resolved_config(cfg);
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : results)
    rows.push_back({{"id", r.id}, {"name", r.name}, {"pass", r.pass}, {"detail", r.detail}});
  manifest["checks"] = rows;
  manifest["pass"] = first_fail == 0;
  manifest["first_failure"] = first_fail;
  const std::filesystem::path json_path =
      std::filesystem::path(cfg.out_dir) / "verify_report.json";
  write_json_file(json_path, manifest);
  log << "wrote " << json_path.string() << "\n";
  return first_fail;
}

}  // namespace folspec
