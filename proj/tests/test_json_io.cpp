#include <catch_amalgamated.hpp>

#include "ewoc/json_io.hpp"

using namespace ewoc;

namespace {

bool has_field(const ValidationError& e, const std::string& field) {
  for (const auto& f : e.errors())
    if (f.field == field) return true;
  return false;
}

}  // namespace

TEST_CASE("trial config round trips through JSON", "[json]") {
  TrialConfig c;
  c.scheme = DoseScheme::equally_spaced(0, 1, 0.2, Rounding::Down);
  c.feasibility = FeasibilitySchedule::increasing(0.1, 0.02, 0.4);
  c.model.prior_gamma = {2, 5};
  c.model.working_link = LinkFunction::skew_normal(0, 2, -3);
  c.mtd_estimator = MtdEstimator::AlphaQuantile;
  c.backend.kind = Backend::Metropolis;
  c.backend.draws = 1234;
  c.cohort_size = 2;
  const auto back = trial_config_from_json(json::parse(to_json(c).dump()));
  CHECK(back == c);
}

TEST_CASE("defaults fill missing fields", "[json]") {
  const auto c = trial_config_from_json(json::parse(R"({"scheme": {"kind": "discrete", "spacing": 0.25}})"));
  CHECK(c.scheme.grid == std::vector<double>{0, 0.25, 0.5, 0.75, 1});
  CHECK(c.model.theta == 0.33);
  CHECK(c.sample_size == 20);
}

TEST_CASE("config errors name the fields", "[json]") {
  try {
    trial_config_from_json(json::parse(R"({"model": {"theta": 1.5}, "sample_size": "x", "bogus": 1})"));
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "sample_size"));
    CHECK(has_field(e, "bogus"));
  }
  try {
    trial_config_from_json(json::parse(R"({"model": {"theta": 1.5}})"));
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "model.theta"));
  }
  try {
    trial_config_from_json(json::parse(R"({"scheme": {"kind": "discrete", "grid": [0, 0.5, 0.5, 1]}})"));
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "scheme.grid"));
  }
  try {
    trial_config_from_json(json::parse(R"({"scheme": {"kind": "discrete", "spacing": 0.3}})"));
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "scheme.spacing"));
  }
}

TEST_CASE("snapshots round trip and replay", "[json]") {
  TrialConfig c;
  c.sample_size = 4;
  c.backend.resolution = 101;
  auto s = new_trial(c);
  s = record_outcome(s, 0.0, 0);
  s = record_outcome(s, recommend_next(s).administered_dose, 0);
  const auto back = trial_from_json(json::parse(to_json(s).dump()));
  CHECK(back == s);
  auto j = to_json(s);
  j["records"][1]["dose"] = 0.9;
  CHECK_THROWS_AS(trial_from_json(j), IntegrityError);
  j = to_json(s);
  j["status"] = "Complete";
  CHECK_THROWS_AS(trial_from_json(j), IntegrityError);
  j = to_json(s);
  for (int i = 0; i < 5; ++i) j["records"].push_back({{"dose", 0.0}, {"dlt", 0}});
  CHECK_THROWS_AS(trial_from_json(j), IntegrityError);
}

TEST_CASE("study config parsing", "[json]") {
  const auto s = study_config_from_json(json::parse(R"({
    "trial": {"feasibility": {"kind": "conditional", "alpha0": 0.05, "step": 0.05}},
    "true_models": [{"link": {"family": "skewnormal", "location": 0, "scale": 2, "shape": 3}, "true_mtd": 0.4}],
    "schemes": [{"kind": "continuous"}, {"kind": "discrete", "spacing": 0.1}],
    "sample_sizes": [20, 40],
    "replicates": 10,
    "seed": 5})"));
  CHECK(s.true_models.size() == 1);
  CHECK(s.true_models[0].true_rho0 == 0.05);
  CHECK(s.schemes[1].grid.size() == 11);
  CHECK(s.trial.feasibility.alpha0 == 0.05);
  CHECK(to_json(study_config_from_json(to_json(s))) == to_json(s));
  CHECK_THROWS_AS(study_config_from_json(json::parse(R"({"replicates": 0})")), ValidationError);
}
