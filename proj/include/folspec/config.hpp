#pragma once

// Experiment configuration: one structured JSON file per run.  Every field
// has a recorded default, so a bare model block is a complete experiment.
// Validation is strict: unknown keys and out-of-range values are rejected
// with the offending field path in the message.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "folspec/errors.hpp"
#include "folspec/expressions.hpp"
#include "folspec/models.hpp"
#include "folspec/serialize.hpp"

namespace folspec {

struct FlatModelConfig {
  int n = 2;
  int p = 1;
  // resolved numeric span; entries given as strings keep their text too
  std::vector<std::vector<double>> span = {{1.0, std::sqrt(2.0)}};
  bool assume_dense = false;
};

struct FiberedModelConfig {
  int nx = 64;
  int ny = 64;
  std::string a = "1 + 0.3*cos(2*pi*x)*cos(2*pi*y)";
  std::string b = "1 + 0.5*sin(2*pi*y)*sin(2*pi*y)";
};

struct ModelConfig {
  std::string type = "flat";  // "flat" | "fibered"
  std::string id;             // filename label; derived from shape when empty
  FlatModelConfig flat;
  FiberedModelConfig fibered;

  std::string label() const {
    if (!id.empty()) return id;
    if (type == "flat")
      return "flat" + std::to_string(flat.n) + "p" + std::to_string(flat.p);
    return "fib" + std::to_string(fibered.nx) + "x" + std::to_string(fibered.ny);
  }
};

struct TestFunctionConfig {
  std::string kind = "gaussian";  // gaussian | bump | smoothed_indicator
  double t = 1.0;                 // gaussian
  double alpha = 0.0;             // bump support
  double beta = 100.0;
  double lambda0 = 50.0;  // smoothed indicator
  double width = 1.0;
};

struct ExperimentConfig {
  ModelConfig model;
  Bigrade grade;
  std::vector<double> h_schedule = {0.2, 0.1, 0.05, 0.025};
  std::vector<double> lambda_grid;  // default: 10..100 in 10 steps
  double lambda_max = 100.0;
  std::vector<double> t_values = {0.5};
  int eigen_count = 20;
  int branch_count = 5;
  double fd_step = 1e-4;
  long long candidate_cap = 100000000;
  long long max_matvecs = 0;  // 0: solver default
  double residual_tol = 1e-8;
  TestFunctionConfig test_function;
  std::string out_dir = "out";
  std::uint64_t seed = 0x5eed;
  int workers = 1;

  std::string config_hash = "0000000000000000";  // of the raw config bytes

  ExperimentConfig() {
    for (int i = 0; i < 10; ++i) lambda_grid.push_back(10.0 * (i + 1));
  }
};

namespace config_detail {

inline void require_keys(const nlohmann::json& obj, const std::string& path,
                         std::initializer_list<const char*> allowed) {
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* key : allowed)
      if (item.key() == key) known = true;
    if (!known) throw ConfigError(path + ": unknown field \"" + item.key() + "\"");
  }
}

inline double as_number(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path + ": expected a number, got " + j.dump());
  return j.get<double>();
}

inline long long as_integer(const nlohmann::json& j, const std::string& path) {
  if (!j.is_number_integer()) throw ConfigError(path + ": expected an integer, got " + j.dump());
  return j.get<long long>();
}

inline std::string as_string(const nlohmann::json& j, const std::string& path) {
  if (!j.is_string()) throw ConfigError(path + ": expected a string, got " + j.dump());
  return j.get<std::string>();
}

// span entries are numbers or constant expressions like "sqrt(2)"
inline double as_constant(const nlohmann::json& j, const std::string& path) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    try {
      return parse_constant(j.get<std::string>());
    } catch (const Error& e) {
      throw ConfigError(path + ": " + e.what());
    }
  }
  throw ConfigError(path + ": expected a number or constant expression, got " + j.dump());
}

inline std::vector<double> parse_positive_list(const nlohmann::json& j, const std::string& path,
                                               double upper) {
  if (!j.is_array() || j.empty())
    throw ConfigError(path + ": expected a non-empty list of numbers");
  std::vector<double> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string entry = path + "[" + std::to_string(i) + "]";
    const double v = as_number(j[i], entry);
    if (!(v > 0.0) || v > upper)
      throw ConfigError(entry + ": must lie in (0, " + format_double(upper) + "], got " +
                        format_double(v));
    out.push_back(v);
  }
  return out;
}

// list form, or {"h0":..,"factor":..,"count":..} for a geometric schedule
inline std::vector<double> parse_schedule(const nlohmann::json& j, const std::string& path) {
  if (j.is_array()) return parse_positive_list(j, path, 1.0);
  if (j.is_object()) {
    require_keys(j, path, {"h0", "factor", "count"});
    if (!j.contains("h0") || !j.contains("factor") || !j.contains("count"))
      throw ConfigError(path + ": geometric schedule needs h0, factor, count");
    const double h0 = as_number(j["h0"], path + ".h0");
    const double factor = as_number(j["factor"], path + ".factor");
    const long long count = as_integer(j["count"], path + ".count");
    if (!(h0 > 0.0) || h0 > 1.0)
      throw ConfigError(path + ".h0: must lie in (0, 1], got " + format_double(h0));
    if (!(factor > 0.0) || !(factor < 1.0))
      throw ConfigError(path + ".factor: must lie in (0, 1), got " + format_double(factor));
    if (count < 1 || count > 64)
      throw ConfigError(path + ".count: must lie in [1, 64], got " + std::to_string(count));
    std::vector<double> out;
    double h = h0;
    for (long long i = 0; i < count; ++i, h *= factor) out.push_back(h);
    return out;
  }
  throw ConfigError(path + ": expected a list or {h0, factor, count}");
}

// list form, or {"min":..,"max":..,"count":..} for a uniform grid
inline std::vector<double> parse_grid(const nlohmann::json& j, const std::string& path) {
  if (j.is_array()) {
    if (j.empty()) throw ConfigError(path + ": expected a non-empty list of numbers");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
      const std::string entry = path + "[" + std::to_string(i) + "]";
      const double v = as_number(j[i], entry);
      if (v < 0.0) throw ConfigError(entry + ": must be nonnegative, got " + format_double(v));
      if (!out.empty() && v <= out.back())
        throw ConfigError(entry + ": grid must be strictly increasing");
      out.push_back(v);
    }
    return out;
  }
  if (j.is_object()) {
    require_keys(j, path, {"min", "max", "count"});
    if (!j.contains("min") || !j.contains("max") || !j.contains("count"))
      throw ConfigError(path + ": uniform grid needs min, max, count");
    const double lo = as_number(j["min"], path + ".min");
    const double hi = as_number(j["max"], path + ".max");
    const long long count = as_integer(j["count"], path + ".count");
    if (lo < 0.0) throw ConfigError(path + ".min: must be nonnegative, got " + format_double(lo));
    if (!(hi > lo)) throw ConfigError(path + ".max: must exceed min");
    if (count < 2 || count > 100000)
      throw ConfigError(path + ".count: must lie in [2, 100000], got " + std::to_string(count));
    std::vector<double> out;
    for (long long i = 0; i < count; ++i)
      out.push_back(lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1));
    return out;
  }
  throw ConfigError(path + ": expected a list or {min, max, count}");
}

inline void parse_model(const nlohmann::json& j, ModelConfig& model) {
  require_keys(j, "model", {"type", "id", "flat", "fibered"});
  if (j.contains("type")) {
    model.type = as_string(j["type"], "model.type");
    if (model.type != "flat" && model.type != "fibered")
      throw ConfigError("model.type: expected \"flat\" or \"fibered\", got \"" + model.type +
                        "\"");
  }
  if (j.contains("id")) {
    model.id = as_string(j["id"], "model.id");
    for (char c : model.id)
      if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_')
        throw ConfigError("model.id: only [A-Za-z0-9_-] allowed, got \"" + model.id + "\"");
  }
  if (j.contains("flat")) {
    const nlohmann::json& f = j["flat"];
    require_keys(f, "model.flat", {"n", "p", "span", "assume_dense"});
    if (f.contains("n")) {
      const long long n = as_integer(f["n"], "model.flat.n");
      if (n < 2 || n > 8)
        throw ConfigError("model.flat.n: must lie in [2, 8], got " + std::to_string(n));
      model.flat.n = static_cast<int>(n);
    }
    if (f.contains("p")) {
      const long long p = as_integer(f["p"], "model.flat.p");
      if (p < 1 || p >= model.flat.n)
        throw ConfigError("model.flat.p: must lie in [1, n-1], got " + std::to_string(p));
      model.flat.p = static_cast<int>(p);
    }
    if (f.contains("span")) {
      const nlohmann::json& s = f["span"];
      if (!s.is_array() || s.size() != static_cast<std::size_t>(model.flat.p))
        throw ConfigError("model.flat.span: expected " + std::to_string(model.flat.p) +
                          " row(s)");
      model.flat.span.clear();
      for (std::size_t r = 0; r < s.size(); ++r) {
        const std::string row_path = "model.flat.span[" + std::to_string(r) + "]";
        if (!s[r].is_array() || s[r].size() != static_cast<std::size_t>(model.flat.n))
          throw ConfigError(row_path + ": expected " + std::to_string(model.flat.n) +
                            " entries");
        std::vector<double> row;
        for (std::size_t c = 0; c < s[r].size(); ++c)
          row.push_back(as_constant(s[r][c], row_path + "[" + std::to_string(c) + "]"));
        model.flat.span.push_back(row);
      }
    } else if (model.flat.n != 2 || model.flat.p != 1) {
      throw ConfigError("model.flat.span: required when n or p is not the default");
    }
    if (f.contains("assume_dense")) {
      if (!f["assume_dense"].is_boolean())
        throw ConfigError("model.flat.assume_dense: expected a boolean");
      model.flat.assume_dense = f["assume_dense"].get<bool>();
    }
  }
  if (j.contains("fibered")) {
    const nlohmann::json& f = j["fibered"];
    require_keys(f, "model.fibered", {"nx", "ny", "a", "b"});
    auto grid_side = [&](const char* key, int fallback) {
      if (!f.contains(key)) return fallback;
      const long long v = as_integer(f[key], std::string("model.fibered.") + key);
      if (v < 4 || v > 1024)
        throw ConfigError(std::string("model.fibered.") + key + ": must lie in [4, 1024], got " +
                          std::to_string(v));
      return static_cast<int>(v);
    };
    model.fibered.nx = grid_side("nx", model.fibered.nx);
    model.fibered.ny = grid_side("ny", model.fibered.ny);
    if (f.contains("a")) model.fibered.a = as_string(f["a"], "model.fibered.a");
    if (f.contains("b")) model.fibered.b = as_string(f["b"], "model.fibered.b");
    // surface grammar errors with the field path; leaf-dependence of b is
    // checked at build time against the grid
    for (const char* key : {"a", "b"}) {
      const std::string text = key[0] == 'a' ? model.fibered.a : model.fibered.b;
      try {
        Expression::parse(text);
      } catch (const Error& e) {
        throw ConfigError(std::string("model.fibered.") + key + ": " + e.what());
      }
    }
  }
}

inline void parse_test_function(const nlohmann::json& j, TestFunctionConfig& tf) {
  require_keys(j, "test_function", {"kind", "t", "alpha", "beta", "lambda0", "width"});
  if (j.contains("kind")) {
    tf.kind = as_string(j["kind"], "test_function.kind");
    if (tf.kind != "gaussian" && tf.kind != "bump" && tf.kind != "smoothed_indicator")
      throw ConfigError(
          "test_function.kind: expected \"gaussian\", \"bump\" or \"smoothed_indicator\", "
          "got \"" +
          tf.kind + "\"");
  }
  if (j.contains("t")) tf.t = as_number(j["t"], "test_function.t");
  if (j.contains("alpha")) tf.alpha = as_number(j["alpha"], "test_function.alpha");
  if (j.contains("beta")) tf.beta = as_number(j["beta"], "test_function.beta");
  if (j.contains("lambda0")) tf.lambda0 = as_number(j["lambda0"], "test_function.lambda0");
  if (j.contains("width")) tf.width = as_number(j["width"], "test_function.width");
  if (tf.kind == "gaussian" && !(tf.t > 0.0))
    throw ConfigError("test_function.t: must be positive, got " + format_double(tf.t));
  if (tf.kind == "bump" && !(tf.beta > tf.alpha))
    throw ConfigError("test_function.beta: must exceed alpha");
  if (tf.kind == "bump" && tf.alpha < 0.0)
    throw ConfigError("test_function.alpha: must be nonnegative, got " +
                      format_double(tf.alpha));
  if (tf.kind == "smoothed_indicator" && !(tf.lambda0 > 0.0))
    throw ConfigError("test_function.lambda0: must be positive, got " +
                      format_double(tf.lambda0));
  if (tf.kind == "smoothed_indicator" && !(tf.width > 0.0))
    throw ConfigError("test_function.width: must be positive, got " + format_double(tf.width));
}

}  // namespace config_detail

inline ExperimentConfig parse_config(const nlohmann::json& j) {
  using namespace config_detail;
  ExperimentConfig cfg;
  if (!j.is_object()) throw ConfigError("config root: expected a JSON object");
  require_keys(j, "config",
               {"model", "grade", "h_schedule", "lambda_grid", "lambda_max", "t_values",
                "eigen_count", "branch_count", "fd_step", "budgets", "tolerances",
                "test_function", "out_dir", "seed", "workers"});
  if (j.contains("model")) parse_model(j["model"], cfg.model);
  if (j.contains("grade")) {
    const nlohmann::json& g = j["grade"];
    require_keys(g, "grade", {"i", "j"});
    if (g.contains("i")) cfg.grade.i = static_cast<int>(as_integer(g["i"], "grade.i"));
    if (g.contains("j")) cfg.grade.j = static_cast<int>(as_integer(g["j"], "grade.j"));
    const int p = cfg.model.type == "flat" ? cfg.model.flat.p : 1;
    const int q = cfg.model.type == "flat" ? cfg.model.flat.n - cfg.model.flat.p : 1;
    if (cfg.grade.i < 0 || cfg.grade.i > p)
      throw ConfigError("grade.i: must lie in [0, " + std::to_string(p) + "], got " +
                        std::to_string(cfg.grade.i));
    if (cfg.grade.j < 0 || cfg.grade.j > q)
      throw ConfigError("grade.j: must lie in [0, " + std::to_string(q) + "], got " +
                        std::to_string(cfg.grade.j));
  }
  if (j.contains("h_schedule")) cfg.h_schedule = parse_schedule(j["h_schedule"], "h_schedule");
  if (j.contains("lambda_grid")) cfg.lambda_grid = parse_grid(j["lambda_grid"], "lambda_grid");
  if (j.contains("lambda_max")) {
    cfg.lambda_max = as_number(j["lambda_max"], "lambda_max");
    if (!(cfg.lambda_max > 0.0))
      throw ConfigError("lambda_max: must be positive, got " + format_double(cfg.lambda_max));
  }
  if (j.contains("t_values")) cfg.t_values = parse_positive_list(j["t_values"], "t_values", 1e6);
  if (j.contains("eigen_count")) {
    const long long v = as_integer(j["eigen_count"], "eigen_count");
    if (v < 1 || v > 100000)
      throw ConfigError("eigen_count: must lie in [1, 100000], got " + std::to_string(v));
    cfg.eigen_count = static_cast<int>(v);
  }
  if (j.contains("branch_count")) {
    const long long v = as_integer(j["branch_count"], "branch_count");
    if (v < 1 || v > 10000)
      throw ConfigError("branch_count: must lie in [1, 10000], got " + std::to_string(v));
    cfg.branch_count = static_cast<int>(v);
  }
  if (j.contains("fd_step")) {
    cfg.fd_step = as_number(j["fd_step"], "fd_step");
    if (!(cfg.fd_step > 0.0) || cfg.fd_step >= 0.5)
      throw ConfigError("fd_step: must lie in (0, 0.5), got " + format_double(cfg.fd_step));
  }
  if (j.contains("budgets")) {
    const nlohmann::json& b = j["budgets"];
    require_keys(b, "budgets", {"candidate_cap", "max_matvecs"});
    if (b.contains("candidate_cap")) {
      cfg.candidate_cap = as_integer(b["candidate_cap"], "budgets.candidate_cap");
      if (cfg.candidate_cap < 1)
        throw ConfigError("budgets.candidate_cap: must be positive, got " +
                          std::to_string(cfg.candidate_cap));
    }
    if (b.contains("max_matvecs")) {
      cfg.max_matvecs = as_integer(b["max_matvecs"], "budgets.max_matvecs");
      if (cfg.max_matvecs < 0)
        throw ConfigError("budgets.max_matvecs: must be nonnegative, got " +
                          std::to_string(cfg.max_matvecs));
    }
  }
  if (j.contains("tolerances")) {
    const nlohmann::json& t = j["tolerances"];
    require_keys(t, "tolerances", {"residual_tol"});
    if (t.contains("residual_tol")) {
      cfg.residual_tol = as_number(t["residual_tol"], "tolerances.residual_tol");
      if (!(cfg.residual_tol > 0.0))
        throw ConfigError("tolerances.residual_tol: must be positive, got " +
                          format_double(cfg.residual_tol));
    }
  }
  if (j.contains("test_function")) parse_test_function(j["test_function"], cfg.test_function);
  if (j.contains("out_dir")) cfg.out_dir = as_string(j["out_dir"], "out_dir");
  if (j.contains("seed")) {
    const long long v = as_integer(j["seed"], "seed");
    if (v < 0) throw ConfigError("seed: must be nonnegative, got " + std::to_string(v));
    cfg.seed = static_cast<std::uint64_t>(v);
  }
  if (j.contains("workers")) {
    const long long v = as_integer(j["workers"], "workers");
    if (v < 1 || v > 256)
      throw ConfigError("workers: must lie in [1, 256], got " + std::to_string(v));
    cfg.workers = static_cast<int>(v);
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream stream(path, std::ios::binary);
  if (!stream) throw ConfigError("cannot read config file " + path);
  std::stringstream buffer;
  buffer << stream.rdbuf();
  const std::string raw = buffer.str();
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(raw);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg = parse_config(doc);
  cfg.config_hash = hex16(fnv1a64(raw));
  return cfg;
}

// every field, defaults applied; embedded in output manifests
inline nlohmann::json resolved_config(const ExperimentConfig& cfg) {
  nlohmann::json doc;
  doc["model"]["type"] = cfg.model.type;
  doc["model"]["id"] = cfg.model.label();
  doc["model"]["flat"] = {{"n", cfg.model.flat.n},
                          {"p", cfg.model.flat.p},
                          {"span", cfg.model.flat.span},
                          {"assume_dense", cfg.model.flat.assume_dense}};
  doc["model"]["fibered"] = {{"nx", cfg.model.fibered.nx},
                             {"ny", cfg.model.fibered.ny},
                             {"a", cfg.model.fibered.a},
                             {"b", cfg.model.fibered.b}};
  doc["grade"] = {{"i", cfg.grade.i}, {"j", cfg.grade.j}};
  doc["h_schedule"] = cfg.h_schedule;
  doc["lambda_grid"] = cfg.lambda_grid;
  doc["lambda_max"] = cfg.lambda_max;
  doc["t_values"] = cfg.t_values;
  doc["eigen_count"] = cfg.eigen_count;
  doc["branch_count"] = cfg.branch_count;
  doc["fd_step"] = cfg.fd_step;
  doc["budgets"] = {{"candidate_cap", cfg.candidate_cap}, {"max_matvecs", cfg.max_matvecs}};
  doc["tolerances"] = {{"residual_tol", cfg.residual_tol}};
  doc["test_function"] = {{"kind", cfg.test_function.kind},
                          {"t", cfg.test_function.t},
                          {"alpha", cfg.test_function.alpha},
                          {"beta", cfg.test_function.beta},
                          {"lambda0", cfg.test_function.lambda0},
                          {"width", cfg.test_function.width}};
  // execution context (out_dir, workers) is deliberately not echoed: results
  // are identical regardless of where they are written or how many workers
  // ran, and the files must be byte-identical too
  doc["seed"] = cfg.seed;
  return doc;
}

inline FlatLinearFoliation build_flat_from_config(const ExperimentConfig& cfg) {
  RationalityOptions opts;
  opts.assume_dense = cfg.model.flat.assume_dense;
  return build_flat_model(cfg.model.flat.n, cfg.model.flat.p, cfg.model.flat.span, opts);
}

inline FiberedTorusModel build_fibered_from_config(const ExperimentConfig& cfg) {
  return build_fibered_model(cfg.model.fibered.nx, cfg.model.fibered.ny, cfg.model.fibered.a,
                             cfg.model.fibered.b);
}

}  // namespace folspec
