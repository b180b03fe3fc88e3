#include <gtest/gtest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "robopt/campaign.hpp"

using namespace robopt;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& name) {
  const fs::path p = fs::path(testing::TempDir()) / ("robopt_campaign_" + name);
  fs::remove_all(p);
  return p;
}

CampaignConfig small_config() { return load_config(ROBOPT_TEST_DATA "/small_2d.yaml"); }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

// Wraps a model and counts calls.
struct Counted {
  ObjectiveModel model;
  std::shared_ptr<std::atomic<std::size_t>> calls = std::make_shared<std::atomic<std::size_t>>(0);

  explicit Counted(ObjectiveModel m) : model(std::move(m)) {
    auto inner = model.eval;
    auto c = calls;
    model.eval = [inner, c](const Vector& p) {
      ++*c;
      return inner(p);
    };
  }
};

std::size_t count_lines(const fs::path& p, const std::string& needle) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);)
    if (l.find(needle) != std::string::npos) ++n;
  return n;
}

const std::vector<std::string> kArtifacts{"config.yaml",      "manifest.json",      "pass1_train.json",
                                          "pass1_filter.json", "pass1_surrogate.json", "pass1_map.json",
                                          "pass1_converge.json", "pass1_verify.json", "pass2_train.json",
                                          "pass2_filter.json", "pass2_surrogate.json", "pass2_map.json",
                                          "pass2_converge.json", "pass2_verify.json", "naive.json",
                                          "result.json",      "evaluations.jsonl",  "bo_history.jsonl"};

}  // namespace

TEST(BuildModel, AllKinds) {
  CampaignConfig c = small_config();
  const ObjectiveModel m = build_model(c);
  EXPECT_EQ(m.name, "ridge_plateau");
  EXPECT_NEAR(m.eval((Vector(2) << 6.0, 5.0).finished()), 1.0, 1e-3);

  c.model.kind = "constant";
  c.model.params = {{"value", {2.5}}};
  EXPECT_EQ(build_model(c).eval(Vector::Zero(2)), 2.5);

  c.model.kind = "gaussian_bump";
  c.model.params = {{"center", {5.0}}, {"width", {1.0}}, {"height", {2.0}}, {"baseline", {0.5}}};
  EXPECT_EQ(build_model(c).eval(Vector::Constant(2, 5.0)), 2.5);

  c.model.kind = "cosine_product";
  c.model.params = {{"offset", {1.0}}, {"amplitude", {1.0}}, {"periods", {4.0, 4.0}}, {"phases", {0.0, 0.0}}};
  EXPECT_EQ(build_model(c).eval(Vector::Zero(2)), 2.0);

  c.model.params["periods"] = {4.0, 4.0, 4.0};
  EXPECT_THROW(build_model(c), ConfigError);
  c.model.params["periods"] = {4.0, 4.0};
  c.model.params["amplitude"] = {2.0};
  EXPECT_THROW(build_model(c), ConfigError);
}

TEST(ExternalModel, JsonLinesProtocol) {
  const std::string script =
      "python3 -u -c \"import sys, json\n"
      "for line in sys.stdin:\n"
      "    p = json.loads(line)['params']\n"
      "    print(json.dumps({'error': 'negative'} if p[0] < 0 else {'value': p[0] + 2 * p[1]}))\"";
  const ObjectiveModel m = make_external(script, BoxDomain(Vector::Constant(2, -1.0), Vector::Ones(2)), 2);
  EXPECT_EQ(m.eval((Vector(2) << 0.25, 0.5).finished()), 1.25);
  EXPECT_THROW(m.eval((Vector(2) << -0.5, 0.0).finished()), EvaluationError);

  const Matrix pts = scale_to_domain(sobol_sequence(2, 32), m.default_domain);
  const BatchEvaluation ev = evaluate_batch(m, pts, 4);
  for (Eigen::Index i = 0; i < pts.rows(); ++i) {
    const bool negative = pts(i, 0) < 0.0;
    EXPECT_EQ(ev.failed[static_cast<std::size_t>(i)], negative);
    if (!negative) {
      EXPECT_DOUBLE_EQ(ev.values[i], pts(i, 0) + 2.0 * pts(i, 1));
    }
  }
}

TEST(ExternalModel, CommandThatExitsFailsEvaluation) {
  const ObjectiveModel m = make_external("exit 0", BoxDomain(Vector::Zero(1), Vector::Ones(1)));
  EXPECT_THROW(m.eval(Vector::Zero(1)), EvaluationError);
  const ObjectiveModel g = make_external("echo garbage", BoxDomain(Vector::Zero(1), Vector::Ones(1)));
  EXPECT_THROW(g.eval(Vector::Zero(1)), EvaluationError);
}

TEST(Campaign, RunsAllStagesWithNestedDomains) {
  const CampaignConfig cfg = small_config();
  const fs::path dir = fresh_dir("stages");
  CampaignStore store(dir, cfg, false);
  const CampaignResult r = run_two_pass(build_model(cfg), cfg, store);

  const Json m = read_json_file((dir / "manifest.json").string());
  EXPECT_EQ(m.at("schema_version"), kSchemaVersion);
  EXPECT_EQ(m.at("config_hash"), config_hash(cfg));
  EXPECT_EQ(m.at("streams").at("pass1").get<std::uint64_t>(), stream_seed(cfg.master_seed, "pass1"));
  for (const auto& s : m.at("stages")) EXPECT_EQ(s.at("status"), "complete") << s.dump();
  for (const auto& f : kArtifacts) EXPECT_TRUE(fs::exists(dir / f)) << f;
  EXPECT_TRUE(fs::exists(dir / ".lock"));

  for (const PassResult* p : {&r.pass1, &r.pass2}) {
    EXPECT_TRUE(p->train_domain.contains(p->eval_domain));
    for (const auto& c : p->candidates) EXPECT_TRUE(p->eval_domain.contains(c.point, 1e-12));
    EXPECT_TRUE(p->eval_domain.contains(p->selected, 1e-12));
    EXPECT_EQ(p->selected, p->verified.front().point);
    for (std::size_t k = 1; k < p->verified.size(); ++k)
      EXPECT_GE(p->verified[k - 1].estimate.median, p->verified[k].estimate.median);
  }
  EXPECT_TRUE(r.pass1.train_domain.contains(r.pass2.train_domain));
  const auto narrow = narrow_domain_clipped(r.pass1.selected, cfg.sigma_manuf, cfg.domain());
  EXPECT_EQ(r.pass2.train_domain, narrow.domain);
  ASSERT_TRUE(r.naive.has_value());
  EXPECT_LT(r.naive->estimate.median, r.pass2.verified.front().estimate.median);
  EXPECT_NE(format_report(r.report).find("robust design: a = "), std::string::npos);
}

TEST(Campaign, RepeatedRunsAreByteIdentical) {
  const CampaignConfig cfg = small_config();
  const fs::path a = fresh_dir("det_a"), b = fresh_dir("det_b");
  {
    CampaignStore s(a, cfg, false);
    run_two_pass(build_model(cfg), cfg, s);
  }
  {
    CampaignStore s(b, cfg, false);
    CampaignOptions o;
    o.parallelism = 3;
    run_two_pass(build_model(cfg), cfg, s, o);
  }
  for (const auto& f : kArtifacts) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
}

TEST(Campaign, ResumeSkipsCompletedStagesWithoutModelCalls) {
  const CampaignConfig cfg = small_config();
  const fs::path full = fresh_dir("resume_full"), part = fresh_dir("resume_part");
  {
    CampaignStore s(full, cfg, false);
    run_two_pass(build_model(cfg), cfg, s);
  }
  Counted model(build_model(cfg));
  {
    CampaignStore s(part, cfg, false);
    CampaignOptions o;
    o.stop_after = "pass1/surrogate";
    EXPECT_THROW(run_two_pass(model.model, cfg, s, o), StopRequested);
  }
  EXPECT_EQ(model.calls->load(), cfg.pass1.n_train);
  const Json m = read_json_file((part / "manifest.json").string());
  EXPECT_EQ(m.at("stages")[2].at("status"), "complete");
  EXPECT_EQ(m.at("stages")[3].at("status"), "pending");

  model.calls->store(0);
  {
    CampaignStore s(part, cfg, true);
    run_two_pass(model.model, cfg, s);
  }
  EXPECT_EQ(count_lines(part / "evaluations.jsonl", "\"stage\":\"pass1/train\""), cfg.pass1.n_train);
  EXPECT_EQ(count_lines(part / "timing.jsonl", "pass1/train"), 1u);
  const std::size_t expected_calls = count_lines(part / "evaluations.jsonl", "\"stage\":") - cfg.pass1.n_train;
  EXPECT_EQ(model.calls->load(), expected_calls);
  for (const auto& f : kArtifacts) EXPECT_EQ(slurp(full / f), slurp(part / f)) << f;
}

TEST(Campaign, ResumeRefusesChangedConfig) {
  CampaignConfig cfg = small_config();
  const fs::path dir = fresh_dir("hash");
  {
    CampaignStore s(dir, cfg, false);
    CampaignOptions o;
    o.stop_after = "pass1/train";
    EXPECT_THROW(run_two_pass(build_model(cfg), cfg, s, o), StopRequested);
  }
  cfg.master_seed += 1;
  EXPECT_THROW(CampaignStore(dir, cfg, true), ConfigError);
}

TEST(Campaign, LockPreventsConcurrentRuns) {
  const CampaignConfig cfg = small_config();
  const fs::path dir = fresh_dir("lock");
  {
    CampaignStore first(dir, cfg, false);
    EXPECT_THROW(CampaignStore(dir, cfg, true), LockError);
  }
  EXPECT_FALSE(fs::exists(dir / ".lock"));
  EXPECT_NO_THROW(CampaignStore(dir, cfg, true));
}

TEST(Campaign, StaleLockIsTakenOver) {
  const CampaignConfig cfg = small_config();
  const fs::path dir = fresh_dir("stale");
  fs::create_directories(dir);
  std::ofstream(dir / ".lock") << "999999999\n";
  EXPECT_NO_THROW(CampaignStore(dir, cfg, false));
}

TEST(Campaign, StageFailureIsNamedAndEarlierArtifactsKept) {
  const CampaignConfig cfg = small_config();
  const fs::path dir = fresh_dir("fail");
  ObjectiveModel m = build_model(cfg);
  auto inner = m.eval;
  std::atomic<std::size_t> calls{0};
  m.eval = [&, inner](const Vector& p) {
    if (++calls > cfg.pass1.n_train) return std::nan("");
    return inner(p);
  };
  CampaignStore s(dir, cfg, false);
  try {
    run_two_pass(m, cfg, s);
    FAIL() << "expected StageError";
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage, "pass1/verify");
  }
  EXPECT_TRUE(fs::exists(dir / "pass1_converge.json"));
  const Json man = read_json_file((dir / "manifest.json").string());
  EXPECT_EQ(man.at("stages")[5].at("status"), "failed");
  EXPECT_NE(man.at("stages")[5].at("error").get<std::string>().find("failed"), std::string::npos);
}

TEST(Campaign, EdgeOptimumClipsNarrowDomain) {
  const CampaignConfig cfg = load_config(ROBOPT_TEST_DATA "/edge_2d.yaml");
  const fs::path dir = fresh_dir("edge");
  CampaignStore s(dir, cfg, false);
  const CampaignResult r = run_two_pass(build_model(cfg), cfg, s);
  EXPECT_FALSE(r.clipped_axes.empty());
  EXPECT_TRUE(cfg.domain().contains(r.pass2.train_domain));
  EXPECT_TRUE(r.pass2.eval_domain.contains(r.pass2.selected, 1e-12));
  EXPECT_FALSE(r.naive.has_value());
  EXPECT_TRUE(read_json_file((dir / "result.json").string()).at("naive").is_null());
}

TEST(Campaign, NaiveGeneratesTrainingDataWhenAbsent) {
  const CampaignConfig cfg = small_config();
  const fs::path dir = fresh_dir("naive");
  CampaignStore s(dir, cfg, true);
  const NaiveResult n = run_naive(build_model(cfg), cfg, s);
  EXPECT_TRUE(fs::exists(dir / "pass1_train.json"));
  EXPECT_TRUE(fs::exists(dir / "naive.json"));
  EXPECT_FALSE(fs::exists(dir / "pass1_map.json"));
  EXPECT_NEAR(n.point[0], 2.5, 0.2);
}

TEST(Report, EstimateNotation) {
  RobustEstimate e;
  e.median = 3.6;
  e.sigma_median = 1.1;
  e.sigma_minus = 0.5;
  e.sigma_plus = 0.7;
  EXPECT_EQ(format_estimate(e), "(3.6 ± 1.1) -0.5/+0.7");
}
