// robopt: command-line front end for robust design campaigns.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "robopt/campaign.hpp"

namespace fs = std::filesystem;
using namespace robopt;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUsage = 2;

struct Common {
  std::string config;
  std::string dir;
  bool resume = false;
  std::optional<long long> seed_override;
  std::optional<std::size_t> parallelism;
  std::string stop_after;
};

/// --dir, then $ROBOPT_OUTPUT_DIR, then the config's output_dir.
fs::path resolve_dir(const Common& c, const std::optional<CampaignConfig>& cfg) {
  if (!c.dir.empty()) return c.dir;
  if (const char* env = std::getenv("ROBOPT_OUTPUT_DIR"); env && *env) return env;
  if (cfg) return cfg->output_dir;
  throw ConfigError({"--dir: no campaign directory given (use --dir or ROBOPT_OUTPUT_DIR)"});
}

CampaignConfig load_effective_config(const Common& c) {
  std::string path = c.config;
  if (path.empty() && c.resume && !c.dir.empty()) path = (fs::path(c.dir) / "config.yaml").string();
  if (path.empty()) throw ConfigError({"--config: required"});
  CampaignConfig cfg = load_config(path);
  if (c.seed_override) cfg.master_seed = static_cast<std::uint64_t>(*c.seed_override);
  if (c.parallelism) cfg.parallelism = *c.parallelism;
  return cfg;
}

CampaignOptions campaign_options(const CampaignConfig& cfg, const Common& c) {
  CampaignOptions o;
  o.parallelism = std::max<std::size_t>(cfg.parallelism, 1);
  if (!c.stop_after.empty()) o.stop_after = c.stop_after;
  o.log = [](const std::string& s) { std::cerr << "[robopt] " << s << "\n"; };
  return o;
}

Vector parse_list(const std::string& s, const char* what) {
  std::vector<double> v;
  std::stringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError({std::string(what) + ": '" + tok + "' is not a number"});
    }
  }
  if (v.empty()) throw ConfigError({std::string(what) + ": empty list"});
  return to_vector(v);
}

CampaignConfig snapshot_config(const fs::path& dir) {
  const fs::path p = dir / "config.yaml";
  if (!fs::exists(p)) throw Error("no campaign in " + dir.string() + " (config.yaml missing)");
  return load_config(p.string());
}

Json load_artifact(const fs::path& dir, const std::string& file, const std::string& what) {
  const fs::path p = dir / file;
  if (!fs::exists(p)) throw Error(what + " missing: " + p.string());
  return read_json_file(p.string());
}

int cmd_run(const Common& c) {
  const CampaignConfig cfg = load_effective_config(c);
  const fs::path dir = resolve_dir(c, cfg);
  const ObjectiveModel model = build_model(cfg);
  CampaignStore store(dir, cfg, c.resume);
  const CampaignResult r = run_two_pass(model, cfg, store, campaign_options(cfg, c));
  std::cout << format_report(r.report) << "campaign directory: " << dir.string() << "\n";
  return 0;
}

int cmd_naive(const Common& c) {
  const CampaignConfig cfg = load_effective_config(c);
  const fs::path dir = resolve_dir(c, cfg);
  const ObjectiveModel model = build_model(cfg);
  CampaignStore store(dir, cfg, true);
  const NaiveResult n = run_naive(model, cfg, store, campaign_options(cfg, c));
  std::cout << "naive argmax: " << format_point(n.point, cfg.domain().labels(), cfg.units) << "\n"
            << "  raw value " << n.value << "\n"
            << "  robust median " << format_estimate(n.estimate) << "\n";
  if (fs::exists(dir / "result.json")) {
    const Json res = read_json_file((dir / "result.json").string());
    const RobustEstimate two = estimate_from(res.at("final").at("estimate"));
    std::cout << "two-pass robust median " << format_estimate(two) << "\n";
  }
  return 0;
}

int cmd_reevaluate(const Common& c, const std::string& sigma_text) {
  const fs::path dir = resolve_dir(c, std::nullopt);
  const CampaignConfig cfg = snapshot_config(dir);
  const Json sj = load_artifact(dir, "pass2_surrogate.json", "pass-2 surrogate");
  check_artifact(sj, "surrogate");
  const WarpedGPModel surrogate = warped_from(sj.at("model"));
  const BoxDomain train_domain = domain_from(sj.at("train_domain"));
  const Vector sigma = parse_list(sigma_text, "--sigma");
  if (static_cast<std::size_t>(sigma.size()) != train_domain.dim())
    throw ConfigError({"--sigma: expected " + std::to_string(train_domain.dim()) + " values"});

  ReevaluateOptions o;
  o.n_eval = cfg.pass2.n_eval;
  o.n_candidates = cfg.pass2.n_candidates;
  o.converge = {cfg.alg1_for(2), cfg.pass2.bo_budget, cfg.pass2.cluster_radius, cfg.bo};
  o.parallelism = c.parallelism ? *c.parallelism : std::max<std::size_t>(cfg.parallelism, 1);
  o.seed = stream_seed(cfg.master_seed, "reevaluate");
  const ReevaluateResult r = reevaluate_uncertainty(surrogate, train_domain, sigma, o);

  Json j = artifact("reevaluation");
  j["sigma_manuf"] = vec_json(sigma);
  j["eval_domain"] = to_json(r.eval_domain);
  j["point"] = vec_json(r.point);
  j["estimate"] = to_json(r.estimate);
  j["top"] = Json::array();
  for (const auto& e : r.top) j["top"].push_back(to_json(e));
  char name[64];
  std::snprintf(name, sizeof name, "reevaluate_%016llx.json",
                static_cast<unsigned long long>(fnv1a64(vec_json(sigma).dump())));
  write_json_file((dir / name).string(), j);

  std::cout << "sigma_manuf = " << vec_json(sigma).dump() << "\n"
            << "robust design: " << format_point(r.point, cfg.domain().labels(), cfg.units) << "\n"
            << "  surrogate median " << format_estimate(r.estimate) << "\n"
            << "written " << (dir / name).string() << "\n";
  return 0;
}

struct SliceArgs {
  std::string axes = "0,1";
  std::size_t grid = 41;
  std::string center = "selected";
  std::string source = "surrogate";
  double extent = 5.0;
  std::string out = "slice.csv";
};

int cmd_slice(const Common& c, const SliceArgs& a) {
  const fs::path dir = resolve_dir(c, std::nullopt);
  const CampaignConfig cfg = snapshot_config(dir);
  const std::size_t n = cfg.domain().dim();
  const Vector ax = parse_list(a.axes, "--axes");
  if (ax.size() != 2) throw ConfigError({"--axes: expected two axis indices"});
  for (Eigen::Index k = 0; k < 2; ++k)
    if (ax[k] < 0 || ax[k] != std::floor(ax[k]) || ax[k] >= static_cast<double>(n))
      throw ConfigError({"--axes: axis index out of range [0, " + std::to_string(n) + ")"});
  const auto i = static_cast<std::size_t>(ax[0]), j = static_cast<std::size_t>(ax[1]);
  if (i == j) throw ConfigError({"--axes: axes must differ"});
  if (a.grid < 2) throw ConfigError({"--grid: must be at least 2"});

  Vector center;
  if (a.center == "selected") {
    const Json res = load_artifact(dir, "result.json", "campaign result");
    center = vec_from(res.at("final").at("point"));
  } else {
    center = parse_list(a.center, "--center");
    if (static_cast<std::size_t>(center.size()) != n)
      throw ConfigError({"--center: expected " + std::to_string(n) + " values"});
  }

  LandscapeSlice s;
  if (a.source == "surrogate") {
    const Json sj = load_artifact(dir, "pass2_surrogate.json", "pass-2 surrogate");
    s = landscape_slice(warped_from(sj.at("model")), center, cfg.sigma_manuf, i, j, a.grid, a.extent);
  } else if (a.source == "model") {
    s = landscape_slice(build_model(cfg).eval, center, cfg.sigma_manuf, i, j, a.grid, a.extent);
  } else {
    throw ConfigError({"--source: expected surrogate or model"});
  }

  std::ofstream csv(a.out, std::ios::trunc);
  if (!csv) throw Error("cannot write " + a.out);
  csv << "i,j,p_i,p_j,value\n";
  char line[160];
  for (Eigen::Index x = 0; x < s.xs.size(); ++x)
    for (Eigen::Index y = 0; y < s.ys.size(); ++y) {
      std::snprintf(line, sizeof line, "%lld,%lld,%.17g,%.17g,%.17g\n", static_cast<long long>(x),
                    static_cast<long long>(y), s.xs[x], s.ys[y], s.values(x, y));
      csv << line;
    }
  Json side = artifact("slice");
  side["axes"] = {i, j};
  side["labels"] = {cfg.domain().labels()[i], cfg.domain().labels()[j]};
  side["center"] = vec_json(center);
  side["source"] = a.source;
  side["grid"] = a.grid;
  side["ellipses"] = Json::array();
  for (std::size_t k = 0; k < s.ellipses.size(); ++k)
    side["ellipses"].push_back({{"k_sigma", k + 1},
                                {"center", {center[static_cast<Eigen::Index>(i)], center[static_cast<Eigen::Index>(j)]}},
                                {"semi_axis_i", s.ellipses[k].first},
                                {"semi_axis_j", s.ellipses[k].second}});
  const fs::path sidecar = fs::path(a.out).replace_extension(".json");
  write_json_file(sidecar.string(), side);
  std::cout << "written " << a.out << " (" << a.grid * a.grid << " rows) and " << sidecar.string() << "\n";
  return 0;
}

int cmd_validate(const Common& c) {
  const CampaignConfig cfg = load_effective_config(c);
  pass_config(cfg, 1, cfg.domain()).validate();
  std::cout << "config ok: " << cfg.name << " (hash " << config_hash(cfg) << ")\n";
  return 0;
}

int cmd_report(const Common& c) {
  const fs::path dir = resolve_dir(c, std::nullopt);
  std::cout << format_report(load_artifact(dir, "result.json", "campaign result"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robust design optimization under manufacturing scatter"};
  app.require_subcommand(1);
  Common c;
  std::string sigma;
  SliceArgs slice;

  auto add_dir = [&](CLI::App* s) { s->add_option("--dir", c.dir, "Campaign directory"); };
  auto add_parallel = [&](CLI::App* s) { s->add_option("--parallelism", c.parallelism, "Concurrent evaluations"); };

  auto* run = app.add_subcommand("run", "Run or resume a two-pass campaign");
  run->add_option("--config", c.config, "Campaign configuration (YAML)");
  add_dir(run);
  run->add_flag("--resume", c.resume, "Continue from the last completed stage");
  run->add_option("--seed-override", c.seed_override, "Replace the master seed");
  add_parallel(run);
  run->add_option("--stop-after", c.stop_after)->group("");

  auto* naive = app.add_subcommand("naive", "Maximize the raw model and verify the argmax");
  naive->add_option("--config", c.config, "Campaign configuration (YAML)")->required();
  add_dir(naive);
  naive->add_option("--seed-override", c.seed_override, "Replace the master seed");
  add_parallel(naive);

  auto* reev = app.add_subcommand("reevaluate", "Re-run the robust search on the pass-2 surrogate with new scatter");
  add_dir(reev);
  reev->add_option("--sigma", sigma, "Comma-separated standard deviations per axis")->required();
  add_parallel(reev);

  auto* sl = app.add_subcommand("slice", "Export a 2-D landscape slice as CSV");
  add_dir(sl);
  sl->add_option("--axes", slice.axes, "Two axis indices, e.g. 0,1");
  sl->add_option("--grid", slice.grid, "Grid points per axis");
  sl->add_option("--center", slice.center, "'selected' or comma-separated point");
  sl->add_option("--source", slice.source, "surrogate or model");
  sl->add_option("--extent", slice.extent, "Half-width in standard deviations");
  sl->add_option("--out", slice.out, "CSV output path");

  auto* val = app.add_subcommand("validate", "Check a configuration without running it");
  val->add_option("--config", c.config, "Campaign configuration (YAML)")->required();

  auto* rep = app.add_subcommand("report", "Print the summary of a finished campaign");
  add_dir(rep);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  std::string stage;
  try {
    if (run->parsed()) return cmd_run(c);
    if (naive->parsed()) return cmd_naive(c);
    if (reev->parsed()) return cmd_reevaluate(c, sigma);
    if (sl->parsed()) return cmd_slice(c, slice);
    if (val->parsed()) return cmd_validate(c);
    if (rep->parsed()) return cmd_report(c);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DomainTooSmallError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const StopRequested& e) {
    std::cerr << "[robopt] " << e.what() << "\n";
    return 0;
  } catch (const StageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitFailure;
  }
  return kExitFailure;
}
