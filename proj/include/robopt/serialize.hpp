#pragma once

#include <cmath>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "robopt/bayesopt.hpp"
#include "robopt/distribution.hpp"
#include "robopt/gp.hpp"
#include "robopt/robust.hpp"
#include "robopt/warp.hpp"

namespace robopt {

using Json = nlohmann::json;

// Non-finite numbers are written as null and read back as NaN.
inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline double num_from(const Json& j) {
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

inline Json vec_json(const Vector& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v[i]));
  return a;
}

inline Vector vec_from(const Json& j) {
  if (!j.is_array()) throw SchemaError("expected a numeric array");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = num_from(j[i]);
  return v;
}

/// Row-major list of rows.
inline Json mat_json(const Matrix& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec_json(m.row(r).transpose()));
  return a;
}

inline Matrix mat_from(const Json& j, Eigen::Index cols = -1) {
  if (!j.is_array()) throw SchemaError("expected an array of rows");
  if (j.empty()) return Matrix(0, cols < 0 ? 0 : cols);
  const auto n = static_cast<Eigen::Index>(j[0].size());
  Matrix m(static_cast<Eigen::Index>(j.size()), n);
  for (std::size_t r = 0; r < j.size(); ++r) {
    if (static_cast<Eigen::Index>(j[r].size()) != n) throw SchemaError("ragged matrix rows");
    m.row(static_cast<Eigen::Index>(r)) = vec_from(j[r]).transpose();
  }
  return m;
}

/// Adds the schema header to an artifact document.
inline Json artifact(const std::string& kind) {
  return Json{{"schema_version", kSchemaVersion}, {"kind", kind}};
}

inline void check_artifact(const Json& j, const std::string& kind) {
  if (!j.is_object() || !j.contains("schema_version"))
    throw SchemaError("artifact has no schema_version");
  if (j.at("schema_version") != kSchemaVersion)
    throw SchemaError("unsupported schema_version " + j.at("schema_version").dump() +
                      " (expected " + std::to_string(kSchemaVersion) + ")");
  if (j.value("kind", std::string()) != kind)
    throw SchemaError("expected artifact kind '" + kind + "', found '" +
                      j.value("kind", std::string()) + "'");
}

inline Json to_json(const BoxDomain& d) {
  return Json{{"lower", vec_json(d.lower())},
              {"upper", vec_json(d.upper())},
              {"labels", d.labels()},
              {"units", d.units()}};
}

inline BoxDomain domain_from(const Json& j) {
  return BoxDomain(vec_from(j.at("lower")), vec_from(j.at("upper")),
                   j.value("labels", std::vector<std::string>{}), j.value("units", std::string()));
}

inline Json to_json(const GPHyperparams& h) {
  return Json{{"mu0", h.mu0}, {"sigma0_sq", h.sigma0_sq}, {"length_scales", vec_json(h.length_scales)}};
}

inline GPHyperparams hyper_from(const Json& j) {
  return {j.at("mu0").get<double>(), j.at("sigma0_sq").get<double>(), vec_from(j.at("length_scales"))};
}

/// Hyperparameters and training data; the factorization is rebuilt on load.
inline Json to_json(const GPModel& g) {
  return Json{{"hyper", to_json(g.hyper())},
              {"train_points", mat_json(g.train_points())},
              {"train_values", vec_json(g.train_values())},
              {"jitter", g.jitter()}};
}

inline GPModel gp_from(const Json& j) {
  const Vector y = vec_from(j.at("train_values"));
  const Matrix x = mat_from(j.at("train_points"));
  return GPModel(x, y, hyper_from(j.at("hyper")));
}

inline Json to_json(const WarpParams& w) {
  return Json{{"y_lower", w.y_lower},           {"y_lower_cutoff", w.y_lower_cutoff},
              {"b_lower", w.b_lower},           {"a_lower", w.a_lower},
              {"m_linear", w.m_linear},         {"b_linear", w.b_linear},
              {"y_tilde_cutoff", w.y_tilde_cutoff}};
}

inline WarpParams warp_from(const Json& j) {
  return derive_warp(j.at("y_lower").get<double>(), j.at("y_lower_cutoff").get<double>(),
                     j.at("b_lower").get<double>());
}

inline Json to_json(const WarpedGPModel& m) {
  Json j = artifact("warped_gp");
  j["gp"] = to_json(m.gp);
  j["warp"] = to_json(m.warp);
  j["affine_fallback"] = m.affine_fallback;
  return j;
}

inline WarpedGPModel warped_from(const Json& j) {
  check_artifact(j, "warped_gp");
  return WarpedGPModel{gp_from(j.at("gp")), warp_from(j.at("warp")), j.at("affine_fallback").get<bool>()};
}

inline Json to_json(const RobustEstimate& e) {
  return Json{{"median", num(e.median)},
              {"sigma_minus", num(e.sigma_minus)},
              {"sigma_plus", num(e.sigma_plus)},
              {"sigma_mc", num(e.sigma_mc)},
              {"sigma_gp_sq", num(e.sigma_gp_sq)},
              {"sigma_median", num(e.sigma_median)},
              {"n_total", e.n_total},
              {"converged", e.converged},
              {"n_failed", e.n_failed}};
}

inline RobustEstimate estimate_from(const Json& j) {
  RobustEstimate e;
  e.median = num_from(j.at("median"));
  e.sigma_minus = num_from(j.at("sigma_minus"));
  e.sigma_plus = num_from(j.at("sigma_plus"));
  e.sigma_mc = num_from(j.at("sigma_mc"));
  e.sigma_gp_sq = num_from(j.at("sigma_gp_sq"));
  e.sigma_median = num_from(j.at("sigma_median"));
  e.n_total = j.at("n_total").get<std::size_t>();
  e.converged = j.at("converged").get<bool>();
  e.n_failed = j.value("n_failed", std::size_t{0});
  return e;
}

inline std::string to_string(StopMode m) { return m == StopMode::as_printed ? "as_printed" : "min_samples"; }
inline std::string to_string(VarianceSpace s) { return s == VarianceSpace::bounded ? "bounded" : "transformed"; }

inline StopMode stop_mode_from(const std::string& s) {
  if (s == "as_printed") return StopMode::as_printed;
  if (s == "min_samples") return StopMode::min_samples;
  throw SchemaError("unknown stop_mode '" + s + "' (as_printed|min_samples)");
}

inline VarianceSpace variance_space_from(const std::string& s) {
  if (s == "bounded") return VarianceSpace::bounded;
  if (s == "transformed") return VarianceSpace::transformed;
  throw SchemaError("unknown variance_space '" + s + "' (bounded|transformed)");
}

inline Json to_json(const Alg1Config& c) {
  return Json{{"batch", c.batch},
              {"rel_tol", c.rel_tol},
              {"n_cap", c.n_cap},
              {"stop_mode", to_string(c.stop_mode)},
              {"variance_space", to_string(c.variance_space)},
              {"n_hard_cap", c.n_hard_cap}};
}

inline Json to_json(const ManufacturingDistribution& d) {
  return Json{{"mean", vec_json(d.mean)}, {"covariance", mat_json(d.covariance)}};
}

/// One JSON-lines record per BO evaluation.
inline Json to_json(const HistoryRecord& h) {
  Json j{{"iteration", h.iteration},
         {"point", vec_json(h.point)},
         {"value", num(h.value)},
         {"incumbent", num(h.incumbent)},
         {"failed", h.failed},
         {"seed", h.seed},
         {"sobol_fallback", h.sobol_fallback}};
  if (!h.error.empty()) j["error"] = h.error;
  return j;
}

inline Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw SchemaError("cannot open " + path);
  try {
    return Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw SchemaError(path + ": " + e.what());
  }
}

/// Pretty-printed with sorted keys and a trailing newline, so equal documents are equal bytes.
inline void write_json_file(const std::string& path, const Json& j) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp);
    out << j.dump(1) << '\n';
    if (!out) throw Error("write failed: " + tmp);
  }
  if (std::rename(tmp.c_str(), path.c_str()) != 0) throw Error("cannot rename " + tmp + " to " + path);
}

}  // namespace robopt
