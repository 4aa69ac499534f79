#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/distributions/skew_normal.hpp>
#include <boost/math/special_functions/owens_t.hpp>

#include "ewoc/stats.hpp"
#include "oracles.hpp"

using namespace ewoc;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;

TEST_CASE("link cdf at the centre", "[stats]") {
  CHECK(cdf(LinkFunction::logistic(), 0.0) == 0.5);
  CHECK_THAT(cdf(LinkFunction::normal(0, 2), 0.0), WithinAbs(0.5, 1e-15));
  const double expected = 0.5 - std::atan(3.0) / std::numbers::pi;
  CHECK_THAT(cdf(LinkFunction::skew_normal(0, 2, 3), 0.0), WithinAbs(expected, 1e-12));
  CHECK_THAT(expected, WithinAbs(0.10242, 1e-5));
  // density integrated numerically
  const auto sn = LinkFunction::skew_normal(0, 2, 3);
  CHECK_THAT(oracle::simpson([&](double x) { return sn.pdf(x); }, -40.0, 0.0, 40000), WithinAbs(expected, 1e-10));
}

TEST_CASE("link quantiles", "[stats]") {
  CHECK_THAT(quantile(LinkFunction::logistic(), 0.33), WithinAbs(std::log(0.33 / 0.67), 1e-14));
  CHECK_THAT(quantile(LinkFunction::logistic(), 0.33), WithinAbs(-0.70819, 1e-5));
  CHECK(quantile(LinkFunction::logistic(), 0.5) == 0.0);
  const double q = quantile(LinkFunction::normal(0, 2), 0.975);
  CHECK_THAT(q, WithinAbs(2.0 * boost::math::quantile(boost::math::normal(), 0.975), 1e-9));
  CHECK_THAT(q, WithinAbs(3.91993, 1e-5));
  CHECK_THROWS_AS(quantile(LinkFunction::logistic(), 0.0), DomainError);
  CHECK_THROWS_AS(quantile(LinkFunction::normal(), 1.0), DomainError);
  CHECK_THROWS_AS(quantile(LinkFunction::normal(), -0.1), DomainError);
}

TEST_CASE("scale must be positive", "[stats]") {
  CHECK_THROWS_AS(LinkFunction::normal(0, 0), DomainError);
  CHECK_THROWS_AS(LinkFunction::logistic(0, -1), DomainError);
  CHECK_THROWS_AS(LinkFunction::skew_normal(0, 0, 3), DomainError);
}

TEST_CASE("owen's T examples and identities", "[stats]") {
  CHECK_THAT(owen_t(0.0, 1.0), WithinAbs(0.125, 1e-15));
  const double p = normal_cdf(0.5);
  CHECK_THAT(owen_t(0.5, 1.0), WithinAbs(p * (1 - p) / 2, 1e-14));
  CHECK_THAT(owen_t(0.5, 1.0), WithinAbs(0.10667, 1e-5));
  CHECK(owen_t(2.0, 0.0) == 0.0);
  for (double h : {0.0, 0.1, 0.7, 1.5, 3.0, 6.0, 10.0}) {
    for (double a : {0.05, 0.5, 1.0, 2.0, 3.0, 10.0, 100.0}) {
      INFO("h=" << h << " a=" << a);
      const double t = owen_t(h, a);
      CHECK_THAT(owen_t(-h, a), WithinAbs(t, 1e-12));
      CHECK_THAT(owen_t(h, -a), WithinAbs(-t, 1e-12));
      CHECK_THAT(t, WithinAbs(boost::math::owens_t(h, a), 1e-13));
    }
    const double ph = normal_cdf(h);
    CHECK_THAT(owen_t(h, 1.0), WithinAbs(ph * (1 - ph) / 2, 1e-14));
  }
}

TEST_CASE("skew-normal cdf agrees with an independent implementation", "[stats]") {
  for (double shape : {-3.0, -1.0, -0.3, 0.5, 1.0, 3.0, 10.0}) {
    boost::math::skew_normal ref(0.0, 2.0, shape);
    const auto link = LinkFunction::skew_normal(0, 2, shape);
    for (double x = -12.0; x <= 12.0; x += 0.37) {
      INFO("shape=" << shape << " x=" << x);
      const double want = boost::math::cdf(ref, x);
      CHECK_THAT(link.cdf(x), WithinAbs(want, 1e-12));
      // The reference loses relative accuracy in the far tail, so check there
      // against direct integration of the density.
      if (want > 1e-3) CHECK_THAT(link.cdf(x), WithinRel(want, 1e-10));
      CHECK_THAT(link.pdf(x), WithinAbs(boost::math::pdf(ref, x), 1e-14));
    }
  }
}

TEST_CASE("skew-normal tails are accurate in relative terms", "[stats]") {
  for (double shape : {-3.0, 0.5, 1.0, 3.0}) {
    const auto link = LinkFunction::skew_normal(0, 1, shape);
    for (double x : {-6.0, -4.0, -2.5, -1.0, -0.2}) {
      INFO("shape=" << shape << " x=" << x);
      const double tail = oracle::simpson([&](double t) { return link.pdf(t); }, x - 12.0, x, 200000);
      CHECK_THAT(link.cdf(x), WithinRel(tail, 1e-9));
      CHECK_THAT(link.sf(-x), WithinRel(oracle::simpson([&](double t) { return link.pdf(t); }, -x, -x + 12.0, 200000), 1e-9));
    }
  }
}

TEST_CASE("skew-normal with zero shape is normal", "[stats]") {
  const auto sn = LinkFunction::skew_normal(0.3, 1.7, 0.0);
  const auto n = LinkFunction::normal(0.3, 1.7);
  for (double x = -8; x <= 8; x += 0.01) CHECK_THAT(sn.cdf(x), WithinAbs(n.cdf(x), 1e-10));
}

TEST_CASE("cdf is a monotone distribution function", "[stats]") {
  for (const auto& link : {LinkFunction::logistic(), LinkFunction::normal(0, 2), LinkFunction::skew_normal(0, 2, 3),
                           LinkFunction::skew_normal(0, 2, -3), LinkFunction::logistic(1.5, 0.2)}) {
    double prev = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const double x = link.location() + link.scale() * (-40.0 + 80.0 * i / 999.0);
      const double c = link.cdf(x);
      CHECK(c >= prev);
      CHECK(c >= 0.0);
      CHECK(c <= 1.0);
      prev = c;
    }
    CHECK(link.cdf(-1e300) == 0.0);
    CHECK(link.cdf(1e300) == 1.0);
  }
}

TEST_CASE("quantile round trips", "[stats]") {
  for (const auto& link : {LinkFunction::logistic(), LinkFunction::normal(0, 2), LinkFunction::skew_normal(0, 2, 3),
                           LinkFunction::skew_normal(0, 2, -3), LinkFunction::normal(-1, 0.5)}) {
    INFO(link.label());
    for (int k = 1; k <= 99; ++k) {
      const double p = k / 100.0;
      const double x = link.quantile(p);
      CHECK(std::abs(link.cdf(x) - p) < 1e-10);
    }
    for (double x = link.location() - 6 * link.scale(); x <= link.location() + 6 * link.scale(); x += 0.01 * link.scale()) {
      const double c = link.cdf(x);
      if (c < 1e-6 || c > 1 - 1e-6) continue;
      CHECK_THAT(link.quantile(c), WithinAbs(x, 1e-8));
    }
  }
}

TEST_CASE("location-scale equivariance of quantiles", "[stats]") {
  for (int k = 1; k <= 99; ++k) {
    const double p = k / 100.0;
    CHECK_THAT(LinkFunction::logistic(0.7, 2.5).quantile(p),
               WithinAbs(0.7 + 2.5 * LinkFunction::logistic().quantile(p), 1e-10));
    CHECK_THAT(LinkFunction::normal(-1.2, 0.4).quantile(p),
               WithinAbs(-1.2 + 0.4 * LinkFunction::normal().quantile(p), 1e-10));
  }
}

TEST_CASE("normal cdf accuracy", "[stats]") {
  boost::math::normal ref;
  for (double z = -30; z <= 8.5; z += 0.05) {
    const double want = boost::math::cdf(ref, z);
    // Rounding of z/sqrt(2) is amplified by about z^2 in the tail.
    CHECK_THAT(normal_cdf(z), WithinRel(want, 1e-14 * (1 + z * z)));
    CHECK(std::abs(normal_cdf(z) - want) < 1e-14);
  }
}

TEST_CASE("beta quantiles", "[stats]") {
  CHECK_THAT(beta_quantile({1, 1}, 0.25), WithinAbs(0.25, 1e-14));
  CHECK_THAT(beta_quantile({2, 2}, 0.5), WithinAbs(0.5, 1e-14));
  const double q = beta_quantile({2, 5}, 0.9);
  CHECK_THAT(q, WithinAbs(oracle::beta_quantile(2, 5, 0.9), 1e-9));
  CHECK_THAT(q, WithinAbs(0.51032, 1e-5));
  CHECK_THAT(beta_cdf({2, 5}, q), WithinAbs(0.9, 1e-10));
  CHECK_THROWS_AS(beta_quantile({2, 5}, 0.0), DomainError);
  CHECK_THROWS_AS(beta_log_pdf({2, 5}, 1.0), DomainError);
  CHECK_THROWS_AS(beta_log_pdf({2, 5}, 0.0), DomainError);
}

TEST_CASE("beta densities integrate to one", "[stats]") {
  for (BetaParams p : {BetaParams{1, 1}, BetaParams{2, 2}, BetaParams{2, 5}, BetaParams{3.5, 1.2}}) {
    boost::math::quadrature::tanh_sinh<double> ts;
    const double total = ts.integrate([&](double x) { return std::exp(beta_log_pdf(p, x)); }, 0.0, 1.0);
    CHECK_THAT(total, WithinAbs(1.0, 1e-8));
  }
  CHECK_THAT(beta_log_pdf({2, 2}, 0.5), WithinAbs(std::log(1.5), 1e-14));
}
