#include <catch_amalgamated.hpp>

#include <cmath>
#include <vector>

#include "ewoc/simulation.hpp"
#include "oracles.hpp"

using namespace ewoc;
using Catch::Matchers::WithinAbs;

namespace {

TrueModel logistic_truth(double mtd, double rho0 = 0.05) {
  return TrueModel::make(LinkFunction::logistic(), mtd, rho0, 0.33, 0.0);
}

TrialRecord record_with(double estimate, std::vector<double> doses, std::vector<int> ys) {
  TrialRecord r;
  r.mtd_estimate = estimate;
  r.mtd_estimate_grid = estimate;
  r.doses = std::move(doses);
  r.outcomes = std::move(ys);
  int dlts = 0;
  for (int y : r.outcomes) dlts += y;
  r.dlt_proportion = static_cast<double>(dlts) / static_cast<double>(r.outcomes.size());
  return r;
}

}  // namespace

TEST_CASE("true probability under the default truth", "[simulation]") {
  const auto m = logistic_truth(0.6);
  const double b0 = oracle::logit(0.05);
  const double b1 = (oracle::logit(0.33) - b0) / 0.6;
  CHECK_THAT(true_prob(m, 0.3), WithinAbs(oracle::expit(b0 + b1 * 0.3), 1e-14));
  CHECK_THAT(true_prob(m, 0.3), WithinAbs(0.13868, 1e-5));
  CHECK_THAT(true_prob(m, 0.0), WithinAbs(0.05, 1e-14));
  CHECK_THAT(true_prob(m, 0.6), WithinAbs(0.33, 1e-14));
}

TEST_CASE("normal truth scale is absorbed", "[simulation]") {
  const auto a = TrueModel::make(LinkFunction::normal(0, 2), 0.4, 0.05, 0.33, 0.0);
  const auto b = TrueModel::make(LinkFunction::normal(0, 1), 0.4, 0.05, 0.33, 0.0);
  for (double d = 0; d <= 1.0; d += 0.01) CHECK_THAT(a.prob(d), WithinAbs(b.prob(d), 1e-12));
}

TEST_CASE("degenerate truths", "[simulation]") {
  TrialConfig c;
  c.sample_size = 6;
  c.backend.resolution = 101;
  Stream s1(1, 0, 0), s2(1, 0, 1);
  const auto never = simulate_trajectory([](double) { return 0.0; }, c, s1);
  for (int y : never.outcomes) CHECK(y == 0);
  CHECK(never.dlt_proportion == 0.0);
  const auto always = simulate_trajectory([](double) { return 1.0; }, c, s2);
  for (int y : always.outcomes) CHECK(y == 1);
  CHECK(always.dlt_proportion == 1.0);
  for (std::size_t i = 1; i < never.doses.size(); ++i) CHECK(never.doses[i] >= never.doses[i - 1]);
}

TEST_CASE("single-trial operating characteristics", "[simulation]") {
  const auto m = logistic_truth(0.4);
  auto r = record_with(0.45, {0.0, 0.4, 0.45}, {0, 1, 0});
  flag_patients(r, m, {});
  const std::vector<TrialRecord> one{r};
  const auto oc = operating_characteristics(one, m);
  CHECK_THAT(oc.bias, WithinAbs(0.05, 1e-14));
  CHECK_THAT(oc.mse, WithinAbs(0.0025, 1e-14));
  CHECK_THAT(oc.avg_dlt_rate, WithinAbs(1.0 / 3.0, 1e-14));
  CHECK(oc.pct_trials_dlt_outside == 0.0);
  CHECK(oc.pct_trials_mtd_in_mtd_interval == 100.0);
  CHECK_THAT(oc.avg_pct_patients_optimal_mtd, WithinAbs(200.0 / 3.0, 1e-12));
}

TEST_CASE("exact estimates give zero bias and mse", "[simulation]") {
  const auto m = logistic_truth(0.6);
  std::vector<TrialRecord> rs;
  for (int i = 0; i < 5; ++i) rs.push_back(record_with(0.6, {0.6}, {0}));
  const auto oc = operating_characteristics(rs, m);
  CHECK(oc.bias == 0.0);
  CHECK(oc.mse == 0.0);
  CHECK(oc.pct_trials_mtd_in_mtd_interval == 100.0);
}

TEST_CASE("ten-trial fixture", "[simulation]") {
  // Hand-computed: estimates for a true MTD of 0.4 (interval [0.34, 0.46]).
  const auto m = logistic_truth(0.4);
  const std::vector<double> est{0.30, 0.35, 0.40, 0.42, 0.46, 0.50, 0.38, 0.44, 0.20, 0.60};
  const std::vector<std::vector<int>> ys{{0, 0, 1}, {0, 1, 1}, {0, 0, 0}, {1, 0, 0}, {0, 1, 0},
                                         {0, 0, 1}, {1, 1, 1}, {0, 0, 0}, {0, 1, 0}, {0, 0, 1}};
  std::vector<TrialRecord> rs;
  for (std::size_t i = 0; i < est.size(); ++i) {
    rs.push_back(record_with(est[i], {0.0, 0.35, 0.5}, ys[i]));
    flag_patients(rs.back(), m, {});
  }
  const auto oc = operating_characteristics(rs, m);
  double mean = 0, sq = 0;
  for (double e : est) {
    mean += e / 10;
    sq += (e - 0.4) * (e - 0.4) / 10;
  }
  CHECK_THAT(oc.bias, WithinAbs(mean - 0.4, 1e-14));
  CHECK_THAT(oc.mse, WithinAbs(sq, 1e-14));
  // In [0.34, 0.46]: 0.35 0.40 0.42 0.46 0.38 0.44.
  CHECK_THAT(oc.pct_trials_mtd_in_mtd_interval, WithinAbs(60.0, 1e-12));
  // DLT proportions 1/3 (x6), 2/3, 0 (x2), 1: outside 0.33 +- 0.1 for 4 trials.
  CHECK_THAT(oc.pct_trials_dlt_outside, WithinAbs(40.0, 1e-12));
  CHECK_THAT(oc.avg_dlt_rate, WithinAbs((6.0 / 3 + 2.0 / 3 + 0 + 1) / 10, 1e-14));
  // Only the 0.35 patient is in the MTD interval.
  CHECK_THAT(oc.avg_pct_patients_optimal_mtd, WithinAbs(100.0 / 3.0, 1e-12));
}

TEST_CASE("relative loss", "[simulation]") {
  OCSet d, c;
  d.mse = 0.02;
  c.mse = 0.01;
  d.bias = 0.1;
  c.bias = 0.0;
  const auto loss = relative_loss(d, c);
  CHECK(loss[1].characteristic == "mse");
  CHECK_THAT(loss[1].value, WithinAbs(1.0, 1e-14));
  CHECK_FALSE(loss[1].unstable);
  CHECK(loss[0].unstable);
  CHECK_THAT(loss[0].value, WithinAbs(0.1 / 1e-9, 1e-3));
}

TEST_CASE("cell summaries", "[simulation]") {
  std::vector<double> v;
  for (int i = 1; i <= 12; ++i) v.push_back(i);
  const auto q = summarize_cells(v);
  CHECK(q.median == 6.5);
  CHECK_THAT(q.q25, WithinAbs(3.75, 1e-14));
  CHECK_THAT(q.q75, WithinAbs(9.25, 1e-14));
  CHECK_THROWS_AS(summarize_cells({}), DomainError);
}

TEST_CASE("optimal MTD interval census", "[simulation]") {
  const auto m = logistic_truth(0.6);
  auto c = optimal_dose_census(DoseScheme::equally_spaced(0, 1, 0.25), m, CensusKind::MtdInterval);
  CHECK(c.count == 0);
  CHECK(format_percentage(c.percentage) == "0.0");
  c = optimal_dose_census(DoseScheme::equally_spaced(0, 1, 0.1), logistic_truth(0.8), CensusKind::MtdInterval);
  CHECK(c.count == 3);
  CHECK(format_percentage(c.percentage) == "27.3");
  c = optimal_dose_census(DoseScheme::equally_spaced(0, 1, 0.25), logistic_truth(0.2), CensusKind::MtdInterval);
  CHECK(c.count == 0);
}

TEST_CASE("toxicity census against a forced truth", "[simulation]") {
  // Logistic truth through (0, 0.05) and (0.6, 0.33): P(DLT) is in [0.23, 0.43]
  // exactly for doses in [0.46581, 0.71438].
  const TrueModel m = logistic_truth(0.6);
  const double b0 = oracle::logit(0.05);
  const double b1 = (oracle::logit(0.33) - b0) / 0.6;
  const double lo = (oracle::logit(0.23) - b0) / b1;
  const double hi = (oracle::logit(0.43) - b0) / b1;
  CHECK_THAT(lo, WithinAbs(0.46581, 1e-5));
  CHECK_THAT(hi, WithinAbs(0.71438, 1e-5));
  const std::vector<std::pair<double, std::size_t>> expected{{0.05, 5}, {0.10, 3}, {0.20, 1}, {0.25, 1}};
  for (const auto& [spacing, count] : expected) {
    const auto grid = DoseScheme::equally_spaced(0, 1, spacing);
    CHECK(optimal_dose_census(grid, m, CensusKind::ToxInterval).count == count);
  }
}

TEST_CASE("percentages round half away from zero", "[simulation]") {
  CHECK(format_percentage(100.0 / 21.0) == "4.8");
  CHECK(format_percentage(0.05) == "0.1");
  CHECK(format_percentage(0.0) == "0.0");
  CHECK(format_percentage(100.0 / 6.0) == "16.7");
}

TEST_CASE("study results do not depend on thread count", "[simulation]") {
  StudyConfig s;
  s.trial.backend.resolution = 61;
  s.trial.feasibility = FeasibilitySchedule::conditional(0.05, 0.05);
  s.true_models = {logistic_truth(0.4)};
  s.schemes = {DoseScheme::continuous(), DoseScheme::equally_spaced(0, 1, 0.2)};
  s.sample_sizes = {6};
  s.replicates = 12;
  s.seed = 77;
  RunOptions one;
  one.threads = 1;
  one.keep_records = true;
  RunOptions four = one;
  four.threads = 4;
  const auto a = run_study(s, one);
  const auto b = run_study(s, four);
  REQUIRE(a.cells.size() == 2);
  for (std::size_t k = 0; k < a.cells.size(); ++k) {
    CHECK(oc_fields(a.cells[k].oc) == oc_fields(b.cells[k].oc));
    for (std::size_t r = 0; r < a.cells[k].records.size(); ++r)
      CHECK(a.cells[k].records[r].doses == b.cells[k].records[r].doses);
  }
  CHECK(a.total_failures() == 0);
}

TEST_CASE("study validation", "[simulation]") {
  StudyConfig s;
  CHECK_THROWS_AS(run_study(s), ValidationError);
}
