#pragma once

#include <cerrno>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <fcntl.h>
#include <unistd.h>

#include "robopt/config.hpp"
#include "robopt/external.hpp"
#include "robopt/pipeline.hpp"
#include "robopt/serialize.hpp"

namespace robopt {

/// A stage failed; `stage` names it. Artifacts of earlier stages stay on disk.
struct StageError : Error {
  std::string stage;
  StageError(std::string s, const std::string& what) : Error("stage " + s + " failed: " + what), stage(std::move(s)) {}
};

/// Thrown after the stage named by CampaignOptions::stop_after has been persisted.
struct StopRequested : Error {
  using Error::Error;
};

/// Another process holds the campaign directory.
struct LockError : Error {
  using Error::Error;
};

// ---------------------------------------------------------------------------------------
// Model registry

inline double scalar_param(const ModelSpec& m, const std::string& key) {
  const auto& v = m.params.at(key);
  if (v.size() != 1) throw ConfigError({"model.params." + key + ": expected a single number"});
  return v.front();
}

inline Vector vector_param(const ModelSpec& m, const std::string& key, std::size_t dim) {
  const auto& v = m.params.at(key);
  if (v.size() == 1 && dim > 1) return Vector::Constant(static_cast<Eigen::Index>(dim), v.front());
  if (v.size() != dim)
    throw ConfigError({"model.params." + key + ": expected " + std::to_string(dim) + " entries, got " +
                       std::to_string(v.size())});
  return to_vector(v);
}

/// Builds the forward model named in the configuration over the campaign domain.
inline ObjectiveModel build_model(const CampaignConfig& c) {
  const BoxDomain d = c.domain();
  const ModelSpec& m = c.model;
  const std::size_t n = d.dim();
  try {
    if (m.kind == "ridge_plateau") {
      RidgePlateauSpec s;
      s.plateau_center = vector_param(m, "plateau_center", n);
      s.plateau_width = scalar_param(m, "plateau_width");
      s.plateau_height = scalar_param(m, "plateau_height");
      s.ridge_center = vector_param(m, "ridge_center", n);
      s.ridge_widths = vector_param(m, "ridge_widths", n);
      s.ridge_height = scalar_param(m, "ridge_height");
      return make_ridge_plateau(s, d);
    }
    if (m.kind == "gaussian_bump")
      return make_gaussian_bump(vector_param(m, "center", n), scalar_param(m, "width"), scalar_param(m, "height"),
                                scalar_param(m, "baseline"), d);
    if (m.kind == "constant") return make_constant(scalar_param(m, "value"), d);
    if (m.kind == "cosine_product")
      return make_cosine_product(scalar_param(m, "offset"), scalar_param(m, "amplitude"),
                                 vector_param(m, "periods", n), vector_param(m, "phases", n), d);
    if (m.kind == "external") return make_external(m.command, d, m.concurrency, m.lower_bound);
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    throw ConfigError({std::string("model: ") + e.what()});
  }
  throw ConfigError({"model.kind: unknown model '" + m.kind + "'"});
}

// ---------------------------------------------------------------------------------------
// Artifact converters

inline Json to_json(const TrainingSet& t, const BoxDomain& domain) {
  Json j = artifact("training_set");
  j["domain"] = to_json(domain);
  j["model"] = t.model;
  j["skip"] = t.skip;
  j["points"] = mat_json(t.points);
  j["values"] = vec_json(t.values);
  j["failed_indices"] = t.failed_indices;
  j["failed_errors"] = t.failed_errors;
  return j;
}

inline TrainingSet training_set_from(const Json& j) {
  check_artifact(j, "training_set");
  TrainingSet t;
  t.model = j.at("model").get<std::string>();
  t.skip = j.at("skip").get<std::size_t>();
  t.values = vec_from(j.at("values"));
  t.points = mat_from(j.at("points"), static_cast<Eigen::Index>(domain_from(j.at("domain")).dim()));
  t.failed_indices = j.at("failed_indices").get<std::vector<std::size_t>>();
  t.failed_errors = j.at("failed_errors").get<std::vector<std::string>>();
  return t;
}

inline Json to_json(const FilterResult& f) {
  Json j = artifact("filtered_training_set");
  j["threshold"] = num(f.threshold);
  j["default_rule"] = f.default_rule;
  j["kept"] = f.kept.size();
  Json removed = Json::array();
  for (const auto& r : f.removed)
    removed.push_back({{"index", r.index}, {"point", vec_json(r.point)}, {"value", num(r.value)}, {"reason", r.reason}});
  j["removed"] = removed;
  return j;
}

/// Rebuilds the filter result by dropping the recorded rows from the unfiltered set.
inline FilterResult filter_from(const Json& j, const TrainingSet& train) {
  check_artifact(j, "filtered_training_set");
  FilterResult f;
  f.threshold = num_from(j.at("threshold"));
  f.default_rule = j.at("default_rule").get<bool>();
  std::vector<bool> drop(train.size(), false);
  for (const auto& r : j.at("removed")) {
    const auto idx = r.at("index").get<std::size_t>();
    if (idx >= train.size()) throw SchemaError("filtered_training_set: removed index out of range");
    drop[idx] = true;
    f.removed.push_back({idx, vec_from(r.at("point")), num_from(r.at("value")), r.at("reason").get<std::string>()});
  }
  f.kept = train;
  const auto kept = static_cast<Eigen::Index>(std::count(drop.begin(), drop.end(), false));
  f.kept.points.resize(kept, train.points.cols());
  f.kept.values.resize(kept);
  Eigen::Index k = 0;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (drop[i]) continue;
    f.kept.points.row(k) = train.points.row(static_cast<Eigen::Index>(i));
    f.kept.values[k++] = train.values[static_cast<Eigen::Index>(i)];
  }
  return f;
}

inline Json to_json(const MapEntry& e) {
  return {{"index", e.index}, {"point", vec_json(e.point)}, {"estimate", to_json(e.estimate)}};
}

inline MapEntry map_entry_from(const Json& j) {
  return {j.at("index").get<std::size_t>(), vec_from(j.at("point")), estimate_from(j.at("estimate"))};
}

inline Json to_json(const ConvergedCandidate& c) {
  return {{"start", vec_json(c.start)},
          {"point", vec_json(c.point)},
          {"estimate", to_json(c.estimate)},
          {"origin", c.origin},
          {"bo_evaluations", c.history.size()}};
}

inline ConvergedCandidate converged_from(const Json& j) {
  return {vec_from(j.at("start")), vec_from(j.at("point")), estimate_from(j.at("estimate")),
          j.at("origin").get<std::size_t>(), {}};
}

inline Json to_json(const VerifiedCandidate& v) {
  return {{"point", vec_json(v.point)}, {"estimate", to_json(v.estimate)}, {"origin", v.origin}};
}

inline VerifiedCandidate verified_from(const Json& j) {
  return {vec_from(j.at("point")), estimate_from(j.at("estimate")), j.at("origin").get<std::size_t>()};
}

inline Json to_json(const EvaluationRecord& r) {
  Json j{{"stage", r.stage}, {"index", r.index}, {"point", vec_json(r.point)}, {"value", num(r.value)}, {"failed", r.failed}};
  if (!r.error.empty()) j["error"] = r.error;
  return j;
}

// ---------------------------------------------------------------------------------------
// Campaign directory

/// Exclusive `.lock` file holding the owner's pid; a lock left by a dead process is taken over.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& dir) : path_(dir / ".lock") {
    for (int attempt = 0; attempt < 2; ++attempt) {
      const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY | O_CLOEXEC, 0644);
      if (fd >= 0) {
        const std::string pid = std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto w = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        held_ = true;
        return;
      }
      if (errno != EEXIST) throw LockError("cannot create lock file " + path_.string());
      long owner = 0;
      std::ifstream(path_) >> owner;
      if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM))
        throw LockError("campaign directory is locked by process " + std::to_string(owner) + " (" + path_.string() + ")");
      std::filesystem::remove(path_);
    }
    throw LockError("cannot acquire lock " + path_.string());
  }
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;
  ~DirectoryLock() {
    if (held_) {
      std::error_code ec;
      std::filesystem::remove(path_, ec);
    }
  }

 private:
  std::filesystem::path path_;
  bool held_ = false;
};

inline const std::vector<std::string>& campaign_stages() {
  static const std::vector<std::string> s{
      "pass1/train",  "pass1/filter", "pass1/surrogate", "pass1/map", "pass1/converge", "pass1/verify",
      "pass2/train",  "pass2/filter", "pass2/surrogate", "pass2/map", "pass2/converge", "pass2/verify",
      "naive",        "result"};
  return s;
}

/// Files of one campaign: config snapshot, manifest, one JSON artifact per stage and
/// JSON-lines logs. Wall-clock timing goes to timing.jsonl only.
class CampaignStore {
 public:
  CampaignStore(std::filesystem::path dir, const CampaignConfig& cfg, bool resume)
      : dir_(std::move(dir)), cfg_(cfg), hash_(config_hash(cfg)) {
    std::filesystem::create_directories(dir_);
    lock_.emplace(dir_);
    const auto manifest = dir_ / "manifest.json";
    if (resume && std::filesystem::exists(manifest)) {
      const Json m = read_json_file(manifest.string());
      check_artifact(m, "manifest");
      if (m.at("config_hash") != hash_)
        throw ConfigError({"config: hash " + hash_ + " does not match the campaign snapshot " +
                           m.at("config_hash").get<std::string>() + "; refusing to resume"});
      for (const auto& s : m.at("stages"))
        if (s.at("status") == "complete") completed_.push_back(s.at("name").get<std::string>());
    } else {
      for (const char* f : {"evaluations.jsonl", "bo_history.jsonl", "timing.jsonl"})
        std::filesystem::remove(dir_ / f);
      for (const auto& s : campaign_stages()) std::filesystem::remove(artifact_path(s));
    }
    std::ofstream(dir_ / "config.yaml", std::ios::trunc) << serialize_config(cfg_);
    write_manifest();
  }

  const std::filesystem::path& dir() const { return dir_; }
  const std::string& hash() const { return hash_; }

  std::filesystem::path artifact_path(const std::string& stage) const {
    std::string f = stage;
    std::replace(f.begin(), f.end(), '/', '_');
    return dir_ / (f + ".json");
  }

  bool completed(const std::string& stage) const {
    return std::find(completed_.begin(), completed_.end(), stage) != completed_.end();
  }

  /// Loads the stage artifact if the stage already completed; otherwise runs `compute`,
  /// persists its artifact and log lines, and marks the stage complete. Callers always
  /// decode the returned document, so fresh and resumed runs see identical data.
  Json run_stage(const std::string& stage, const std::function<Json(std::vector<std::string>&, std::vector<std::string>&)>& compute,
                 const std::optional<std::string>& stop_after = {}) {
    if (completed(stage)) return read_json_file(artifact_path(stage).string());
    std::vector<std::string> eval_lines, bo_lines;
    const auto t0 = std::chrono::steady_clock::now();
    Json j;
    try {
      j = compute(eval_lines, bo_lines);
    } catch (const StageError&) {
      throw;
    } catch (const std::exception& e) {
      failed_ = {stage, e.what()};
      write_manifest();
      throw StageError(stage, e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    append("evaluations.jsonl", eval_lines);
    append("bo_history.jsonl", bo_lines);
    write_json_file(artifact_path(stage).string(), j);
    completed_.push_back(stage);
    write_manifest();
    append("timing.jsonl", {Json{{"stage", stage}, {"seconds", secs}}.dump()});
    j = read_json_file(artifact_path(stage).string());
    if (stop_after && *stop_after == stage) throw StopRequested("stopped after stage " + stage);
    return j;
  }

 private:
  void append(const std::string& file, const std::vector<std::string>& lines) {
    if (lines.empty()) return;
    std::ofstream out(dir_ / file, std::ios::app);
    for (const auto& l : lines) out << l << '\n';
  }

  void write_manifest() const {
    Json m = artifact("manifest");
    m["config_hash"] = hash_;
    m["master_seed"] = cfg_.master_seed;
    Json streams = Json::object();
    for (const char* s : {"pass1", "pass2", "naive", "reevaluate"})
      streams[s] = stream_seed(cfg_.master_seed, s);
    m["streams"] = streams;
    Json stages = Json::array();
    for (const auto& s : campaign_stages()) {
      const bool done = completed(s);
      Json e{{"name", s}, {"status", done ? "complete" : "pending"}};
      if (done) e["artifact"] = artifact_path(s).filename().string();
      if (failed_ && failed_->first == s) {
        e["status"] = "failed";
        e["error"] = failed_->second;
      }
      stages.push_back(e);
    }
    m["stages"] = stages;
    write_json_file((dir_ / "manifest.json").string(), m);
  }

  std::filesystem::path dir_;
  CampaignConfig cfg_;
  std::string hash_;
  std::optional<DirectoryLock> lock_;
  std::vector<std::string> completed_;
  std::optional<std::pair<std::string, std::string>> failed_;
};

// ---------------------------------------------------------------------------------------
// Two-pass driver

struct PassResult {
  BoxDomain train_domain;
  BoxDomain eval_domain;
  TrainingSet train;
  FilterResult filtered;
  WarpedGPModel surrogate;
  std::vector<MapEntry> robust_map;
  std::vector<ConvergedCandidate> candidates;
  std::vector<VerifiedCandidate> verified;
  Vector selected;
};

struct CampaignResult {
  PassResult pass1, pass2;
  std::vector<std::size_t> clipped_axes;
  std::optional<NaiveResult> naive;
  Json report;
};

struct CampaignOptions {
  std::size_t parallelism = 1;
  std::optional<std::string> stop_after;
  std::function<void(const std::string&)> log;
};

namespace detail {

inline EvaluationSink line_sink(std::vector<std::string>& lines) {
  return [&lines](const EvaluationRecord& r) { lines.push_back(to_json(r).dump()); };
}

inline void note(const CampaignOptions& o, const std::string& s) {
  if (o.log) o.log(s);
}

inline TrainingSet train_stage(CampaignStore& store, const ObjectiveModel& model, const PassConfig& pc,
                               const std::string& name, const CampaignOptions& opt) {
  const Json j = store.run_stage(
      name,
      [&](auto& ev, auto&) {
        if (!is_power_of_two(pc.n_train))
          note(opt, "warning: n_train = " + std::to_string(pc.n_train) + " is not a power of two");
        return to_json(generate_training_data(model, pc.train_domain, pc.n_train, pc.sobol_skip, opt.parallelism,
                                              line_sink(ev), name),
                       pc.train_domain);
      },
      opt.stop_after);
  return training_set_from(j);
}

inline PassResult run_pass(CampaignStore& store, const ObjectiveModel& model, const PassConfig& pc, int pass,
                           const CampaignOptions& opt) {
  const std::string pre = "pass" + std::to_string(pass) + "/";
  pc.validate();
  PassResult r;
  r.train_domain = pc.train_domain;
  r.eval_domain = shrink_eval_domain(pc.train_domain, pc.sigma_manuf);
  note(opt, pre + "train: " + std::to_string(pc.n_train) + " model evaluations");
  r.train = train_stage(store, model, pc, pre + "train", opt);

  r.filtered = filter_from(store.run_stage(
                               pre + "filter",
                               [&](auto&, auto&) {
                                 return to_json(filter_outliers(r.train, pc.outlier_threshold, model.lower_bound));
                               },
                               opt.stop_after),
                           r.train);

  note(opt, pre + "surrogate");
  const Json sj = store.run_stage(
      pre + "surrogate",
      [&](auto&, auto&) {
        WarpFitOptions fo;
        fo.restarts = pc.gp_restarts;
        fo.max_fit_points = pc.gp_max_fit_points;
        fo.seed = stream_seed(pc.seed, "surrogate");
        fo.y_lower = model.lower_bound;
        Json j = artifact("surrogate");
        j["train_domain"] = to_json(pc.train_domain);
        j["eval_domain"] = to_json(r.eval_domain);
        j["sigma_manuf"] = vec_json(pc.sigma_manuf);
        j["model"] = to_json(fit_warped(r.filtered.kept.points, r.filtered.kept.values, fo));
        return j;
      },
      opt.stop_after);
  check_artifact(sj, "surrogate");
  r.surrogate = warped_from(sj.at("model"));

  note(opt, pre + "map: " + std::to_string(pc.n_eval) + " robust estimates");
  const Json mj = store.run_stage(
      pre + "map",
      [&](auto&, auto&) {
        const auto map = batch_robust_map(r.surrogate, r.eval_domain, pc.n_eval, pc.sigma_manuf, pc.alg1,
                                          stream_seed(pc.seed, "map"), opt.parallelism);
        Json j = artifact("robust_map");
        j["eval_domain"] = to_json(r.eval_domain);
        j["entries"] = Json::array();
        for (const auto& e : map) j["entries"].push_back(to_json(e));
        return j;
      },
      opt.stop_after);
  check_artifact(mj, "robust_map");
  for (const auto& e : mj.at("entries")) r.robust_map.push_back(map_entry_from(e));

  note(opt, pre + "converge");
  const Json cj = store.run_stage(
      pre + "converge",
      [&](auto&, auto& bo_lines) {
        auto clustered = cluster_filter(r.robust_map, r.eval_domain, pc.cluster_radius);
        clustered.resize(std::min(clustered.size(), pc.n_candidates));
        ConvergeOptions co{pc.alg1, pc.bo_budget_per_candidate, pc.cluster_radius, pc.bo};
        const auto conv = converge_candidates(r.surrogate, clustered, r.robust_map, r.eval_domain, pc.sigma_manuf, co,
                                              stream_seed(pc.seed, "converge"));
        Json j = artifact("converged_candidates");
        j["starts"] = Json::array();
        for (const auto& c : clustered) j["starts"].push_back(to_json(c));
        j["candidates"] = Json::array();
        for (const auto& c : conv) {
          j["candidates"].push_back(to_json(c));
          for (const auto& h : c.history) {
            Json hj = to_json(h);
            hj["stage"] = pre + "converge";
            hj["candidate"] = c.origin;
            bo_lines.push_back(hj.dump());
          }
        }
        return j;
      },
      opt.stop_after);
  check_artifact(cj, "converged_candidates");
  for (const auto& c : cj.at("candidates")) r.candidates.push_back(converged_from(c));

  note(opt, pre + "verify: " + std::to_string(r.candidates.size()) + " x " + std::to_string(pc.n_verify) +
                " model evaluations");
  const Json vj = store.run_stage(
      pre + "verify",
      [&](auto& ev, auto&) {
        std::vector<Vector> pts;
        for (const auto& c : r.candidates) pts.push_back(c.point);
        auto v = verify_candidates(model, pts, pc.sigma_manuf, pc.n_verify, opt.parallelism,
                                   stream_seed(pc.seed, "verify"), line_sink(ev), pre + "verify");
        Json j = artifact("verified_candidates");
        j["entries"] = Json::array();
        for (const auto& e : v) j["entries"].push_back(to_json(e));
        j["selected"] = vec_json(v.front().point);
        return j;
      },
      opt.stop_after);
  check_artifact(vj, "verified_candidates");
  for (const auto& e : vj.at("entries")) r.verified.push_back(verified_from(e));
  r.selected = vec_from(vj.at("selected"));
  return r;
}

inline Json summary_json(const PassResult& p) {
  return {{"train_domain", to_json(p.train_domain)},
          {"eval_domain", to_json(p.eval_domain)},
          {"n_train", p.train.size()},
          {"n_removed", p.filtered.removed.size()},
          {"selected", vec_json(p.selected)},
          {"estimate", to_json(p.verified.front().estimate)},
          {"surrogate_estimate", to_json(p.candidates.front().estimate)}};
}

inline Json naive_json(const NaiveResult& n) {
  Json j = artifact("naive_result");
  j["point"] = vec_json(n.point);
  j["value"] = num(n.value);
  j["estimate"] = to_json(n.estimate);
  j["bo_evaluations"] = n.history.size();
  return j;
}

inline NaiveResult naive_from(const Json& j) {
  check_artifact(j, "naive_result");
  NaiveResult n;
  n.point = vec_from(j.at("point"));
  n.value = num_from(j.at("value"));
  n.estimate = estimate_from(j.at("estimate"));
  return n;
}

inline NaiveResult naive_stage(CampaignStore& store, const ObjectiveModel& model, const CampaignConfig& cfg,
                               const TrainingSet& train, const CampaignOptions& opt) {
  const Json j = store.run_stage(
      "naive",
      [&](auto& ev, auto&) {
        note(opt, "naive: bo budget " + std::to_string(cfg.naive.bo_budget));
        return naive_json(naive_optimize(model, cfg.domain(), train, cfg.naive.bo_budget, cfg.sigma_manuf,
                                         cfg.naive.n_verify, opt.parallelism, stream_seed(cfg.master_seed, "naive"),
                                         cfg.bo, line_sink(ev)));
      },
      opt.stop_after);
  return naive_from(j);
}

}  // namespace detail

/// Runs or resumes the full two-pass campaign. Each stage's artifact is persisted before
/// the next stage starts.
inline CampaignResult run_two_pass(const ObjectiveModel& model, const CampaignConfig& cfg, CampaignStore& store,
                                   const CampaignOptions& opt = {}) {
  CampaignResult out;
  out.pass1 = detail::run_pass(store, model, pass_config(cfg, 1, cfg.domain()), 1, opt);
  const ClippedDomain narrow =
      narrow_domain_clipped(out.pass1.selected, cfg.sigma_manuf, cfg.domain(), cfg.narrow_half_width_sigmas);
  out.clipped_axes = narrow.clipped_axes;
  if (!narrow.clipped_axes.empty()) {
    std::string axes;
    for (auto a : narrow.clipped_axes) axes += (axes.empty() ? "" : ",") + cfg.domain().labels()[a];
    detail::note(opt, "narrow domain clipped to the wide domain on axes " + axes);
  }
  out.pass2 = detail::run_pass(store, model, pass_config(cfg, 2, narrow.domain), 2, opt);
  if (cfg.naive.enabled) out.naive = detail::naive_stage(store, model, cfg, out.pass1.train, opt);

  out.report = store.run_stage(
      "result",
      [&](auto&, auto&) {
        Json j = artifact("campaign_result");
        j["config_hash"] = store.hash();
        j["name"] = cfg.name;
        j["labels"] = cfg.domain().labels();
        j["units"] = cfg.units;
        j["sigma_manuf"] = vec_json(cfg.sigma_manuf);
        j["pass1"] = detail::summary_json(out.pass1);
        j["pass2"] = detail::summary_json(out.pass2);
        j["narrow"] = {{"center", vec_json(out.pass1.selected)}, {"clipped_axes", out.clipped_axes}};
        j["final"] = {{"point", vec_json(out.pass2.selected)}, {"estimate", to_json(out.pass2.verified.front().estimate)}};
        j["naive"] = out.naive ? detail::naive_json(*out.naive) : Json(nullptr);
        return j;
      },
      opt.stop_after);
  return out;
}

/// Naive baseline only: the pass-1 training set is loaded or generated first.
inline NaiveResult run_naive(const ObjectiveModel& model, const CampaignConfig& cfg, CampaignStore& store,
                             const CampaignOptions& opt = {}) {
  const PassConfig pc = pass_config(cfg, 1, cfg.domain());
  pc.validate();
  const TrainingSet train = detail::train_stage(store, model, pc, "pass1/train", opt);
  return detail::naive_stage(store, model, cfg, train, opt);
}

// ---------------------------------------------------------------------------------------
// Reporting

/// "(median ± sigma_median) -sigma_minus/+sigma_plus"
inline std::string format_estimate(const RobustEstimate& e) {
  std::ostringstream s;
  s.precision(6);
  s << "(" << e.median << " ± " << e.sigma_median << ") -" << e.sigma_minus << "/+" << e.sigma_plus;
  return s.str();
}

inline std::string format_point(const Vector& p, const std::vector<std::string>& labels, const std::string& units) {
  std::ostringstream s;
  s.precision(6);
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (i) s << ", ";
    const auto k = static_cast<std::size_t>(i);
    s << (k < labels.size() ? labels[k] : "x" + std::to_string(i)) << " = " << p[i];
    if (!units.empty()) s << " " << units;
  }
  return s.str();
}

inline std::string format_report(const Json& r) {
  check_artifact(r, "campaign_result");
  const auto labels = r.at("labels").get<std::vector<std::string>>();
  const auto units = r.at("units").get<std::string>();
  std::ostringstream s;
  s << "campaign " << r.at("name").get<std::string>() << " (config " << r.at("config_hash").get<std::string>() << ")\n";
  for (const char* p : {"pass1", "pass2"}) {
    const Json& q = r.at(p);
    s << p << ": selected " << format_point(vec_from(q.at("selected")), labels, units) << "\n"
      << "  verified   " << format_estimate(estimate_from(q.at("estimate"))) << "\n"
      << "  surrogate  " << format_estimate(estimate_from(q.at("surrogate_estimate"))) << "\n";
  }
  const auto clipped = r.at("narrow").at("clipped_axes").get<std::vector<std::size_t>>();
  if (!clipped.empty()) s << "narrow domain clipped on " << clipped.size() << " axis(es)\n";
  s << "robust design: " << format_point(vec_from(r.at("final").at("point")), labels, units) << "\n"
    << "  median " << format_estimate(estimate_from(r.at("final").at("estimate"))) << "\n";
  if (!r.at("naive").is_null()) {
    const NaiveResult n = detail::naive_from(r.at("naive"));
    s << "naive argmax: " << format_point(n.point, labels, units) << "\n"
      << "  value " << n.value << ", robust median " << format_estimate(n.estimate) << "\n";
  }
  return s.str();
}

}  // namespace robopt
