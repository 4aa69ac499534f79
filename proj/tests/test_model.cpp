#include <catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <vector>

#include "ewoc/model.hpp"
#include "ewoc/random.hpp"
#include "oracles.hpp"

using namespace ewoc;
using Catch::Matchers::WithinAbs;

namespace {
ModelConfig paper_model() { return ModelConfig{}; }
}  // namespace

TEST_CASE("betas_from on the logistic working model", "[model]") {
  const auto b = betas_from(0.05, 0.6, paper_model());
  const double b0 = oracle::logit(0.05);
  const double b1 = (oracle::logit(0.33) - oracle::logit(0.05)) / 0.6;
  CHECK_THAT(b.beta0, WithinAbs(b0, 1e-13));
  CHECK_THAT(b.beta1, WithinAbs(b1, 1e-13));
  CHECK_THAT(b.beta0, WithinAbs(-2.94444, 1e-5));
  CHECK_THAT(b.beta1, WithinAbs(3.72709, 1e-5));
  CHECK_THAT(oracle::expit(b.beta0), WithinAbs(0.05, 1e-10));
  CHECK_THAT(oracle::expit(b.beta0 + b.beta1 * 0.6), WithinAbs(0.33, 1e-10));
}

TEST_CASE("betas_from with x_min = 0 has beta0 = F^-1(rho0)", "[model]") {
  for (const auto& link : {LinkFunction::logistic(), LinkFunction::normal(0, 2), LinkFunction::skew_normal(0, 2, 3)}) {
    ModelConfig m;
    m.working_link = link;
    CHECK_THAT(betas_from(0.1, 0.4, m).beta0, WithinAbs(link.quantile(0.1), 1e-12));
  }
}

TEST_CASE("betas_from rejects degenerate parameters", "[model]") {
  CHECK_THROWS_AS(betas_from(0.33, 0.5, paper_model()), ConstraintError);
  CHECK_THROWS_AS(betas_from(0.5, 0.5, paper_model()), ConstraintError);
  CHECK_THROWS_AS(betas_from(0.05, 0.0, paper_model()), DomainError);
  CHECK_THROWS_AS(betas_from(0.0, 0.5, paper_model()), DomainError);
}

TEST_CASE("gamma_from inverts betas_from", "[model]") {
  const auto m = paper_model();
  CHECK_THAT(gamma_from(-2.94444, 3.72709, m), WithinAbs(0.6, 1e-5));
  CHECK_THAT(gamma_from(oracle::logit(0.33), 5.0, m), WithinAbs(0.0, 1e-14));
  double prev = 1e9;
  for (double b1 = 1.0; b1 < 1e4; b1 *= 2) {
    const double g = gamma_from(oracle::logit(0.05), b1, m);
    CHECK(g > 0.0);
    CHECK(g < prev);
    prev = g;
  }
  CHECK(prev < 1e-3);
  CHECK_THROWS_AS(gamma_from(0.0, 0.0, m), DomainError);
  CHECK_THROWS_AS(gamma_from(0.0, -1.0, m), DomainError);
}

TEST_CASE("reparameterization round trip", "[model]") {
  Stream s(11, 0, 0);
  for (const auto& link : {LinkFunction::logistic(), LinkFunction::normal(0, 2), LinkFunction::skew_normal(0, 2, -3)}) {
    ModelConfig m;
    m.working_link = link;
    m.x_min = 0.1;
    m.x_max = 2.0;
    for (int i = 0; i < 2000; ++i) {
      const double rho0 = m.theta * (0.001 + 0.998 * s.uniform());
      const double gamma = m.x_min + (m.x_max - m.x_min) * (0.001 + 0.999 * s.uniform());
      const auto b = betas_from(rho0, gamma, m);
      CHECK(b.beta1 > 0.0);
      CHECK(std::abs(gamma_from(b.beta0, b.beta1, m) - gamma) < 1e-10);
      CHECK(std::abs(rho0_from(b.beta0, b.beta1, m) - rho0) < 1e-10);
    }
  }
}

TEST_CASE("log likelihood examples", "[model]") {
  const auto m = paper_model();
  CHECK(log_likelihood(0.1, 0.5, {}, m) == 0.0);
  const std::vector<ToxicityRecord> at_min{{0.0, 1}};
  for (double g : {0.1, 0.5, 0.9}) CHECK(log_likelihood(0.2, g, at_min, m) == std::log(0.2));
  const std::vector<ToxicityRecord> at_mtd{{0.4, 0}};
  CHECK_THAT(log_likelihood(0.1, 0.4, at_mtd, m), WithinAbs(std::log(0.67), 1e-12));

  // Sum over records against direct evaluation.
  const std::vector<ToxicityRecord> data{{0.0, 0}, {0.25, 0}, {0.5, 1}, {0.3, 0}};
  const double rho0 = 0.08, gamma = 0.45;
  const double b1 = (oracle::logit(0.33) - oracle::logit(rho0)) / gamma;
  double want = 0.0;
  for (const auto& r : data) {
    const double p = oracle::expit(oracle::logit(rho0) + b1 * r.dose);
    want += r.dlt ? std::log(p) : std::log(1 - p);
  }
  CHECK_THAT(log_likelihood(rho0, gamma, data, m), WithinAbs(want, 1e-12));
}

TEST_CASE("log prior examples", "[model]") {
  const auto m = paper_model();
  for (double r : {0.01, 0.1, 0.3})
    for (double g : {0.01, 0.5, 0.99}) CHECK(log_prior(r, g, m) == 0.0);
  ModelConfig m2;
  m2.prior_gamma = {2, 2};
  CHECK_THAT(log_prior(0.1, 0.5, m2), WithinAbs(std::log(1.5), 1e-14));
  CHECK(log_prior(0.1, 0.0, m) == -std::numeric_limits<double>::infinity());
  CHECK(log_prior(0.4, 0.5, m) == -std::numeric_limits<double>::infinity());
}
