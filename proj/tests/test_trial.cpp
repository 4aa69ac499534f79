#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ewoc/random.hpp"
#include "ewoc/trial.hpp"
#include "oracles.hpp"

using namespace ewoc;
using Catch::Matchers::WithinAbs;

namespace {

TrialConfig paper_config() { return TrialConfig{}; }

TrialConfig grid_config(double spacing) {
  TrialConfig c;
  c.scheme = DoseScheme::equally_spaced(0, 1, spacing);
  return c;
}

bool has_field(const ValidationError& e, const std::string& field) {
  for (const auto& f : e.errors())
    if (f.field == field) return true;
  return false;
}

}  // namespace

TEST_CASE("new trial is ready to dose at the starting dose", "[trial]") {
  const auto s = new_trial(paper_config());
  CHECK(s.status() == TrialStatus::ReadyToDose);
  const auto rec = recommend_next(s);
  CHECK(rec.continuous_dose == 0.0);
  CHECK(rec.administered_dose == 0.0);
  CHECK(rec.alpha_used == 0.25);
}

TEST_CASE("invalid configurations list every violated field", "[trial]") {
  auto c = grid_config(0.25);
  c.starting_dose = 0.3;
  c.cohort_size = 0;
  c.model.theta = 1.5;
  try {
    new_trial(c);
    FAIL("expected a validation error");
  } catch (const ValidationError& e) {
    CHECK(has_field(e, "starting_dose"));
    CHECK(has_field(e, "cohort_size"));
    CHECK(has_field(e, "model.theta"));
  }
  auto d = paper_config();
  d.scheme = DoseScheme::discrete({0, 0.25, 0.25, 1});
  CHECK_THROWS_AS(new_trial(d), ValidationError);
}

TEST_CASE("second recommendation equals the posterior alpha quantile", "[trial]") {
  auto s = new_trial(paper_config());
  s = record_outcome(s, 0.0, 0);
  const auto rec = recommend_next(s);
  CHECK_THAT(rec.alpha_used, WithinAbs(0.30, 1e-15));
  const std::vector<double> probs{rec.alpha_used};
  const auto post = posterior_summary(s.records(), s.config().model, s.config().backend, probs);
  CHECK(rec.continuous_dose == post.quantile(rec.alpha_used));
  CHECK(rec.administered_dose == rec.continuous_dose);
}

TEST_CASE("no-skip caps the second grid dose", "[trial]") {
  auto c = grid_config(0.2);
  c.feasibility = FeasibilitySchedule::fixed(0.45);
  auto s = new_trial(c);
  s = record_outcome(s, 0.0, 0);
  const auto rec = recommend_next(s);
  REQUIRE(rec.continuous_dose > 0.3);
  CHECK(rec.administered_dose == 0.2);
}

TEST_CASE("outcome transitions", "[trial]") {
  auto c = paper_config();
  c.sample_size = 3;
  auto s = new_trial(c);
  const auto before = s;
  s = record_outcome(s, 0.0, 0);
  CHECK(s.size() == 1);
  CHECK(before.size() == 0);
  CHECK_THROWS_AS(record_outcome(s, 0.123, 0), IntegrityError);
  s = record_outcome(s, recommend_next(s).administered_dose, 1);
  s = record_outcome(s, recommend_next(s).administered_dose, 0);
  CHECK(s.status() == TrialStatus::Complete);
  CHECK_THROWS_AS(recommend_next(s), SequencingError);
  CHECK_THROWS_AS(record_outcome(s, 0.0, 0), SequencingError);
}

TEST_CASE("cohorts of two", "[trial]") {
  auto c = paper_config();
  c.cohort_size = 2;
  c.sample_size = 4;
  auto s = new_trial(c);
  s = record_outcome(s, 0.0, 0);
  CHECK(s.status() == TrialStatus::AwaitingOutcome);
  CHECK_THROWS_AS(recommend_next(s), SequencingError);
  CHECK(current_cohort_dose(s) == 0.0);
  s = record_outcome(s, 0.0, 0);
  CHECK(s.status() == TrialStatus::ReadyToDose);
}

TEST_CASE("MTD estimate without data is the prior median", "[trial]") {
  const auto est = estimate_mtd(new_trial(paper_config()));
  CHECK_THAT(est.estimate, WithinAbs(0.5, 1e-9));
  CHECK(est.interim);
  auto c = paper_config();
  c.model.prior_gamma = {2, 5};
  CHECK_THAT(estimate_mtd(new_trial(c)).estimate, WithinAbs(oracle::beta_quantile(2, 5, 0.5), 1e-4));
  CHECK_THAT(estimate_mtd(new_trial(c)).estimate, WithinAbs(0.26445, 1e-4));
}

TEST_CASE("alpha-quantile estimator uses the terminal alpha", "[trial]") {
  auto c = paper_config();
  c.mtd_estimator = MtdEstimator::AlphaQuantile;
  c.sample_size = 2;
  auto s = new_trial(c);
  s = record_outcome(s, 0.0, 0);
  s = record_outcome(s, recommend_next(s).administered_dose, 0);
  const auto est = estimate_mtd(s);
  CHECK_FALSE(est.interim);
  CHECK_THAT(est.alpha, WithinAbs(0.35, 1e-15));
  CHECK(est.estimate == est.posterior.quantile(est.alpha));
}

TEST_CASE("replay reproduces recommendations bit for bit", "[trial]") {
  auto c = grid_config(0.1);
  c.sample_size = 8;
  auto s = new_trial(c);
  Stream rng(3, 0, 0);
  std::vector<DoseRecommendation> issued;
  while (s.status() != TrialStatus::Complete) {
    issued.push_back(recommend_next(s));
    s = record_outcome(s, issued.back(), rng.bernoulli(0.3) ? 1 : 0);
  }
  std::vector<DoseRecommendation> replayed;
  const auto again = replay(c, s.records(), &replayed);
  CHECK(again == s);
  REQUIRE(replayed.size() == issued.size());
  for (std::size_t i = 0; i < issued.size(); ++i) {
    CHECK(replayed[i].continuous_dose == issued[i].continuous_dose);
    CHECK(replayed[i].administered_dose == issued[i].administered_dose);
  }
  std::vector<ToxicityRecord> tampered(s.records().begin(), s.records().end());
  tampered[3].dose += 0.1;
  CHECK_THROWS_AS(replay(c, tampered), IntegrityError);
  tampered.assign(s.records().begin(), s.records().end());
  tampered.push_back({0.0, 0});
  CHECK_THROWS_AS(replay(c, tampered), IntegrityError);
}
