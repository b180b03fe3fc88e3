#pragma once

#include <cstdio>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "robopt/pipeline.hpp"
#include "robopt/serialize.hpp"

namespace robopt {

/// Invalid configuration; carries one message per offending field.
struct ConfigError : Error {
  std::vector<std::string> fields;
  explicit ConfigError(std::vector<std::string> f) : Error(join(f)), fields(std::move(f)) {}

  static std::string join(const std::vector<std::string>& f) {
    std::string s = "invalid configuration:";
    for (const auto& m : f) s += "\n  " + m;
    return s;
  }
};

/// Built-in objective name plus numeric parameters, or an external command.
struct ModelSpec {
  std::string kind = "ridge_plateau";
  std::map<std::string, std::vector<double>> params;
  std::string command;
  std::size_t concurrency = 1;
  double lower_bound = 0.0;

  bool operator==(const ModelSpec&) const = default;
};

struct PassSettings {
  std::size_t n_train = 4096;
  std::size_t n_eval = 4096;
  std::optional<double> outlier_threshold;
  double cluster_radius = 0.25;
  std::size_t n_candidates = 6;
  std::size_t bo_budget = 64;
  std::size_t n_verify = 64;
  std::size_t sobol_skip = 0;
  std::optional<Alg1Config> algorithm1;  // overrides the campaign-wide settings

  bool operator==(const PassSettings& o) const;
};

struct NaiveSettings {
  bool enabled = true;
  std::size_t bo_budget = 64;
  std::size_t n_verify = 512;
  bool operator==(const NaiveSettings&) const = default;
};

struct CampaignConfig {
  std::string name = "campaign";
  std::uint64_t master_seed = 0;
  std::size_t parallelism = 1;
  std::string output_dir = "campaign";
  ModelSpec model;
  Vector lower, upper;
  std::vector<std::string> labels;
  std::string units;
  Vector sigma_manuf;
  Alg1Config algorithm1;
  std::size_t gp_restarts = 8;
  std::size_t gp_max_fit_points = 512;
  BOOptions bo;
  PassSettings pass1;
  PassSettings pass2;
  double narrow_half_width_sigmas = 5.0;
  NaiveSettings naive;

  BoxDomain domain() const { return BoxDomain(lower, upper, labels, units); }
  Alg1Config alg1_for(int pass) const {
    const auto& o = pass == 1 ? pass1.algorithm1 : pass2.algorithm1;
    return o ? *o : algorithm1;
  }
};

inline bool same_alg1(const Alg1Config& a, const Alg1Config& b) {
  return a.batch == b.batch && a.rel_tol == b.rel_tol && a.n_cap == b.n_cap && a.stop_mode == b.stop_mode &&
         a.variance_space == b.variance_space && a.n_hard_cap == b.n_hard_cap;
}

inline bool PassSettings::operator==(const PassSettings& o) const {
  if (algorithm1.has_value() != o.algorithm1.has_value()) return false;
  if (algorithm1 && !same_alg1(*algorithm1, *o.algorithm1)) return false;
  return n_train == o.n_train && n_eval == o.n_eval && outlier_threshold == o.outlier_threshold &&
         cluster_radius == o.cluster_radius && n_candidates == o.n_candidates && bo_budget == o.bo_budget &&
         n_verify == o.n_verify && sobol_skip == o.sobol_skip;
}

inline bool operator==(const CampaignConfig& a, const CampaignConfig& b) {
  return a.name == b.name && a.master_seed == b.master_seed && a.parallelism == b.parallelism &&
         a.output_dir == b.output_dir && a.model == b.model && a.lower == b.lower && a.upper == b.upper &&
         a.labels == b.labels && a.units == b.units && a.sigma_manuf == b.sigma_manuf &&
         same_alg1(a.algorithm1, b.algorithm1) && a.gp_restarts == b.gp_restarts &&
         a.gp_max_fit_points == b.gp_max_fit_points && a.bo.acq_starts == b.bo.acq_starts &&
         a.bo.acq_refine == b.bo.acq_refine && a.bo.refine_evals == b.bo.refine_evals &&
         a.bo.gp_restarts == b.bo.gp_restarts && a.bo.gp_max_fit_points == b.bo.gp_max_fit_points &&
         a.pass1 == b.pass1 && a.pass2 == b.pass2 && a.narrow_half_width_sigmas == b.narrow_half_width_sigmas &&
         a.naive == b.naive;
}

namespace detail {

/// Reads typed fields from a mapping and records every problem instead of stopping.
class FieldReader {
 public:
  FieldReader(const YAML::Node& node, std::string path, std::vector<std::string>& errors)
      : node_(node), path_(std::move(path)), errors_(errors) {
    if (node_ && !node_.IsNull() && !node_.IsMap()) errors_.push_back(path_ + ": expected a mapping");
  }

  bool has(const std::string& key) const { return node_ && node_.IsMap() && node_[key]; }
  YAML::Node child(const std::string& key) {
    seen_.insert(key);
    return has(key) ? node_[key] : YAML::Node();
  }
  std::string where(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  void get(const std::string& key, T& out, bool required = false) {
    seen_.insert(key);
    if (!has(key)) {
      if (required) errors_.push_back(where(key) + ": required field missing");
      return;
    }
    try {
      out = node_[key].as<T>();
    } catch (const YAML::Exception&) {
      errors_.push_back(where(key) + ": wrong type");
    }
  }

  void get_vec(const std::string& key, Vector& out, bool required = false) {
    std::vector<double> v;
    const bool present = has(key);
    get(key, v, required);
    if (present) out = to_vector(v);
  }

  void get_size(const std::string& key, std::size_t& out, bool required = false) {
    long long v = static_cast<long long>(out);
    const bool present = has(key);
    get(key, v, required);
    if (!present) return;
    if (v < 0)
      errors_.push_back(where(key) + ": must be non-negative");
    else
      out = static_cast<std::size_t>(v);
  }

  /// Rejects keys that were never requested.
  void finish() {
    if (!node_ || !node_.IsMap()) return;
    for (const auto& kv : node_) {
      const std::string k = kv.first.as<std::string>();
      if (!seen_.count(k)) errors_.push_back(where(k) + ": unknown key");
    }
  }

 private:
  YAML::Node node_;
  std::string path_;
  std::vector<std::string>& errors_;
  std::set<std::string> seen_;
};

inline Alg1Config read_alg1(const YAML::Node& n, const std::string& path, const Alg1Config& base,
                            std::vector<std::string>& errors) {
  Alg1Config c = base;
  FieldReader r(n, path, errors);
  r.get_size("batch", c.batch);
  r.get("rel_tol", c.rel_tol);
  r.get_size("n_cap", c.n_cap);
  r.get_size("n_hard_cap", c.n_hard_cap);
  std::string mode = to_string(c.stop_mode), space = to_string(c.variance_space);
  r.get("stop_mode", mode);
  r.get("variance_space", space);
  try {
    c.stop_mode = stop_mode_from(mode);
  } catch (const SchemaError& e) {
    errors.push_back(r.where("stop_mode") + ": " + e.what());
  }
  try {
    c.variance_space = variance_space_from(space);
  } catch (const SchemaError& e) {
    errors.push_back(r.where("variance_space") + ": " + e.what());
  }
  r.finish();
  try {
    c.validate();
  } catch (const Error& e) {
    errors.push_back(path + ": " + e.what());
  }
  return c;
}

inline PassSettings read_pass(const YAML::Node& n, const std::string& path, PassSettings p, const Alg1Config& base,
                              std::vector<std::string>& errors) {
  FieldReader r(n, path, errors);
  r.get_size("n_train", p.n_train);
  r.get_size("n_eval", p.n_eval);
  if (r.has("outlier_threshold")) {
    double t = 0.0;
    r.get("outlier_threshold", t);
    p.outlier_threshold = t;
  } else {
    r.child("outlier_threshold");
  }
  r.get("cluster_radius", p.cluster_radius);
  r.get_size("n_candidates", p.n_candidates);
  r.get_size("bo_budget", p.bo_budget);
  r.get_size("n_verify", p.n_verify);
  r.get_size("sobol_skip", p.sobol_skip);
  if (r.has("algorithm1")) p.algorithm1 = read_alg1(r.child("algorithm1"), r.where("algorithm1"), base, errors);
  r.finish();
  return p;
}

inline const std::map<std::string, std::vector<std::string>>& model_param_names() {
  static const std::map<std::string, std::vector<std::string>> names{
      {"ridge_plateau",
       {"plateau_center", "plateau_width", "plateau_height", "ridge_center", "ridge_widths", "ridge_height"}},
      {"gaussian_bump", {"center", "width", "height", "baseline"}},
      {"constant", {"value"}},
      {"cosine_product", {"offset", "amplitude", "periods", "phases"}},
      {"external", {}}};
  return names;
}

}  // namespace detail

/// Parses and validates a campaign configuration. Unknown keys are errors.
inline CampaignConfig parse_config(const YAML::Node& root) {
  std::vector<std::string> errors;
  CampaignConfig c;
  detail::FieldReader r(root, "", errors);
  int version = kSchemaVersion;
  r.get("schema_version", version);
  if (version != kSchemaVersion) errors.push_back("schema_version: unsupported value " + std::to_string(version));
  r.get("name", c.name);
  long long seed = 0;
  r.get("master_seed", seed, true);
  c.master_seed = static_cast<std::uint64_t>(seed);
  r.get_size("parallelism", c.parallelism);
  r.get("output_dir", c.output_dir);

  {
    detail::FieldReader m(r.child("model"), "model", errors);
    m.get("kind", c.model.kind, true);
    const auto& names = detail::model_param_names();
    const auto it = names.find(c.model.kind);
    if (it == names.end()) {
      errors.push_back("model.kind: unknown model '" + c.model.kind +
                       "' (ridge_plateau|gaussian_bump|constant|cosine_product|external)");
    } else if (c.model.kind == "external") {
      m.get("command", c.model.command, true);
      m.get_size("concurrency", c.model.concurrency);
      m.get("lower_bound", c.model.lower_bound);
    } else {
      detail::FieldReader p(m.child("params"), "model.params", errors);
      for (const auto& key : it->second) {
        const YAML::Node v = p.child(key);
        if (!v) {
          errors.push_back("model.params." + key + ": required field missing");
          continue;
        }
        try {
          c.model.params[key] = v.IsSequence() ? v.as<std::vector<double>>() : std::vector<double>{v.as<double>()};
        } catch (const YAML::Exception&) {
          errors.push_back("model.params." + key + ": expected a number or list of numbers");
        }
      }
      p.finish();
    }
    m.finish();
  }

  {
    detail::FieldReader d(r.child("domain"), "domain", errors);
    d.get_vec("lower", c.lower, true);
    d.get_vec("upper", c.upper, true);
    d.get("labels", c.labels);
    d.get("units", c.units);
    d.finish();
  }
  r.get_vec("sigma_manuf", c.sigma_manuf, true);
  c.algorithm1 = detail::read_alg1(r.child("algorithm1"), "algorithm1", c.algorithm1, errors);
  {
    detail::FieldReader s(r.child("surrogate"), "surrogate", errors);
    s.get_size("restarts", c.gp_restarts);
    s.get_size("max_fit_points", c.gp_max_fit_points);
    s.finish();
  }
  {
    detail::FieldReader b(r.child("bo"), "bo", errors);
    b.get_size("acq_starts", c.bo.acq_starts);
    b.get_size("acq_refine", c.bo.acq_refine);
    b.get_size("refine_evals", c.bo.refine_evals);
    b.get_size("gp_restarts", c.bo.gp_restarts);
    b.get_size("gp_max_fit_points", c.bo.gp_max_fit_points);
    b.finish();
  }
  c.pass1 = detail::read_pass(r.child("pass1"), "pass1", c.pass1, c.algorithm1, errors);
  PassSettings p2 = c.pass1;
  p2.n_candidates = 1;
  p2.n_verify = 512;
  p2.algorithm1.reset();
  c.pass2 = detail::read_pass(r.child("pass2"), "pass2", p2, c.algorithm1, errors);
  r.get("narrow_half_width_sigmas", c.narrow_half_width_sigmas);
  {
    detail::FieldReader n(r.child("naive"), "naive", errors);
    n.get("enabled", c.naive.enabled);
    n.get_size("bo_budget", c.naive.bo_budget);
    n.get_size("n_verify", c.naive.n_verify);
    n.finish();
  }
  r.finish();

  // Semantic checks that need the whole document.
  if (errors.empty()) {
    try {
      const BoxDomain d = c.domain();
      check_sigma(c.sigma_manuf, d.dim(), "sigma_manuf");
      for (std::size_t i = 0; i < d.dim(); ++i)
        if (d.edge(i) < 6.0 * c.sigma_manuf[static_cast<Eigen::Index>(i)])
          errors.push_back("domain: axis " + d.labels()[i] + " span " + std::to_string(d.edge(i)) +
                           " is below 6 sigma_manuf = " +
                           std::to_string(6.0 * c.sigma_manuf[static_cast<Eigen::Index>(i)]));
    } catch (const Error& e) {
      errors.push_back(std::string("domain: ") + e.what());
    }
    for (int pass : {1, 2}) {
      const PassSettings& p = pass == 1 ? c.pass1 : c.pass2;
      const std::string pre = "pass" + std::to_string(pass) + ".";
      if (p.n_train < 2) errors.push_back(pre + "n_train: must be at least 2");
      if (p.n_eval < 1) errors.push_back(pre + "n_eval: must be at least 1");
      if (p.n_verify < 2) errors.push_back(pre + "n_verify: must be at least 2");
      if (p.n_candidates < 1) errors.push_back(pre + "n_candidates: must be at least 1");
      if (!(p.cluster_radius >= 0.0)) errors.push_back(pre + "cluster_radius: must be non-negative");
    }
    if (!(c.narrow_half_width_sigmas >= 3.0))
      errors.push_back("narrow_half_width_sigmas: must be at least 3 so the narrowed domain has an evaluation region");
    if (c.naive.n_verify < 2) errors.push_back("naive.n_verify: must be at least 2");
    if (c.gp_restarts < 1) errors.push_back("surrogate.restarts: must be at least 1");
    if (c.model.kind == "external" && c.model.concurrency < 1)
      errors.push_back("model.concurrency: must be at least 1");
  }
  if (!errors.empty()) throw ConfigError(errors);
  return c;
}

inline CampaignConfig parse_config_text(const std::string& text) {
  YAML::Node root;
  try {
    root = YAML::Load(text);
  } catch (const YAML::Exception& e) {
    throw ConfigError({std::string("syntax: ") + e.what()});
  }
  return parse_config(root);
}

inline CampaignConfig load_config(const std::string& path) {
  YAML::Node root;
  try {
    root = YAML::LoadFile(path);
  } catch (const YAML::BadFile&) {
    throw ConfigError({"cannot read config file " + path});
  } catch (const YAML::Exception& e) {
    throw ConfigError({std::string("syntax: ") + e.what()});
  }
  return parse_config(root);
}

namespace detail {

inline void emit_vec(YAML::Emitter& e, const std::vector<double>& v) {
  e << YAML::Flow << YAML::BeginSeq;
  for (double x : v) e << x;
  e << YAML::EndSeq;
}

inline void emit_alg1(YAML::Emitter& e, const Alg1Config& a) {
  e << YAML::BeginMap;
  e << YAML::Key << "batch" << YAML::Value << a.batch;
  e << YAML::Key << "rel_tol" << YAML::Value << a.rel_tol;
  e << YAML::Key << "n_cap" << YAML::Value << a.n_cap;
  e << YAML::Key << "stop_mode" << YAML::Value << to_string(a.stop_mode);
  e << YAML::Key << "variance_space" << YAML::Value << to_string(a.variance_space);
  e << YAML::Key << "n_hard_cap" << YAML::Value << a.n_hard_cap;
  e << YAML::EndMap;
}

inline void emit_pass(YAML::Emitter& e, const PassSettings& p) {
  e << YAML::BeginMap;
  e << YAML::Key << "n_train" << YAML::Value << p.n_train;
  e << YAML::Key << "n_eval" << YAML::Value << p.n_eval;
  if (p.outlier_threshold) e << YAML::Key << "outlier_threshold" << YAML::Value << *p.outlier_threshold;
  e << YAML::Key << "cluster_radius" << YAML::Value << p.cluster_radius;
  e << YAML::Key << "n_candidates" << YAML::Value << p.n_candidates;
  e << YAML::Key << "bo_budget" << YAML::Value << p.bo_budget;
  e << YAML::Key << "n_verify" << YAML::Value << p.n_verify;
  e << YAML::Key << "sobol_skip" << YAML::Value << p.sobol_skip;
  if (p.algorithm1) {
    e << YAML::Key << "algorithm1" << YAML::Value;
    emit_alg1(e, *p.algorithm1);
  }
  e << YAML::EndMap;
}

}  // namespace detail

/// Canonical YAML with every field written out. Parsing the result gives back `c`.
inline std::string serialize_config(const CampaignConfig& c) {
  YAML::Emitter e;
  e.SetDoublePrecision(17);
  e << YAML::BeginMap;
  e << YAML::Key << "schema_version" << YAML::Value << kSchemaVersion;
  e << YAML::Key << "name" << YAML::Value << c.name;
  e << YAML::Key << "master_seed" << YAML::Value << static_cast<long long>(c.master_seed);
  e << YAML::Key << "parallelism" << YAML::Value << c.parallelism;
  e << YAML::Key << "output_dir" << YAML::Value << c.output_dir;

  e << YAML::Key << "model" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "kind" << YAML::Value << c.model.kind;
  if (c.model.kind == "external") {
    e << YAML::Key << "command" << YAML::Value << c.model.command;
    e << YAML::Key << "concurrency" << YAML::Value << c.model.concurrency;
    e << YAML::Key << "lower_bound" << YAML::Value << c.model.lower_bound;
  } else {
    e << YAML::Key << "params" << YAML::Value << YAML::BeginMap;
    for (const auto& [k, v] : c.model.params) {
      e << YAML::Key << k << YAML::Value;
      detail::emit_vec(e, v);
    }
    e << YAML::EndMap;
  }
  e << YAML::EndMap;

  e << YAML::Key << "domain" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "lower" << YAML::Value;
  detail::emit_vec(e, to_std(c.lower));
  e << YAML::Key << "upper" << YAML::Value;
  detail::emit_vec(e, to_std(c.upper));
  e << YAML::Key << "labels" << YAML::Value << YAML::Flow << c.labels;
  e << YAML::Key << "units" << YAML::Value << c.units;
  e << YAML::EndMap;

  e << YAML::Key << "sigma_manuf" << YAML::Value;
  detail::emit_vec(e, to_std(c.sigma_manuf));
  e << YAML::Key << "algorithm1" << YAML::Value;
  detail::emit_alg1(e, c.algorithm1);

  e << YAML::Key << "surrogate" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "restarts" << YAML::Value << c.gp_restarts;
  e << YAML::Key << "max_fit_points" << YAML::Value << c.gp_max_fit_points;
  e << YAML::EndMap;

  e << YAML::Key << "bo" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "acq_starts" << YAML::Value << c.bo.acq_starts;
  e << YAML::Key << "acq_refine" << YAML::Value << c.bo.acq_refine;
  e << YAML::Key << "refine_evals" << YAML::Value << c.bo.refine_evals;
  e << YAML::Key << "gp_restarts" << YAML::Value << c.bo.gp_restarts;
  e << YAML::Key << "gp_max_fit_points" << YAML::Value << c.bo.gp_max_fit_points;
  e << YAML::EndMap;

  e << YAML::Key << "pass1" << YAML::Value;
  detail::emit_pass(e, c.pass1);
  e << YAML::Key << "pass2" << YAML::Value;
  detail::emit_pass(e, c.pass2);
  e << YAML::Key << "narrow_half_width_sigmas" << YAML::Value << c.narrow_half_width_sigmas;

  e << YAML::Key << "naive" << YAML::Value << YAML::BeginMap;
  e << YAML::Key << "enabled" << YAML::Value << c.naive.enabled;
  e << YAML::Key << "bo_budget" << YAML::Value << c.naive.bo_budget;
  e << YAML::Key << "n_verify" << YAML::Value << c.naive.n_verify;
  e << YAML::EndMap;
  e << YAML::EndMap;
  return std::string(e.c_str()) + "\n";
}

inline std::string config_hash(const CampaignConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(serialize_config(c))));
  return buf;
}

/// PassConfig for pass 1 (wide domain) or pass 2 (given narrowed domain).
inline PassConfig pass_config(const CampaignConfig& c, int pass, const BoxDomain& train_domain) {
  const PassSettings& s = pass == 1 ? c.pass1 : c.pass2;
  PassConfig p;
  p.train_domain = train_domain;
  p.n_train = s.n_train;
  p.sigma_manuf = c.sigma_manuf;
  p.outlier_threshold = s.outlier_threshold;
  p.n_eval = s.n_eval;
  p.cluster_radius = s.cluster_radius;
  p.n_candidates = s.n_candidates;
  p.bo_budget_per_candidate = s.bo_budget;
  p.n_verify = s.n_verify;
  p.sobol_skip = s.sobol_skip;
  p.alg1 = c.alg1_for(pass);
  p.gp_restarts = c.gp_restarts;
  p.gp_max_fit_points = c.gp_max_fit_points;
  p.bo = c.bo;
  p.seed = stream_seed(c.master_seed, "pass" + std::to_string(pass));
  return p;
}

}  // namespace robopt
