#pragma once

// The EWOC dose-toxicity model, parameterized by (rho0, gamma): the DLT
// probability at the minimum dose and the MTD.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "ewoc/errors.hpp"
#include "ewoc/stats.hpp"

namespace ewoc {

struct ModelConfig {
  double x_min = 0.0;
  double x_max = 1.0;
  double theta = 0.33;  ///< target DLT probability at the MTD
  BetaParams prior_rho0{1.0, 1.0};   ///< rescaled onto (0, theta)
  BetaParams prior_gamma{1.0, 1.0};  ///< rescaled onto (x_min, x_max)
  LinkFunction working_link = LinkFunction::logistic();

  double range() const noexcept { return x_max - x_min; }
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct ToxicityRecord {
  double dose = 0.0;
  int dlt = 0;  ///< 1 = dose-limiting toxicity

  friend bool operator==(const ToxicityRecord&, const ToxicityRecord&) = default;
};

struct Betas {
  double beta0 = 0.0;
  double beta1 = 0.0;
};

/// Linear predictor beta0 + beta1 x written through (rho0, gamma):
/// F^-1(rho0) + (F^-1(theta) - F^-1(rho0)) (x - x_min) / (gamma - x_min).
/// Algebraically identical to evaluating betas_from; exact at x = x_min.
inline double linear_predictor(double z_rho0, double z_theta, double x, double gamma, double x_min) {
  return z_rho0 + (z_theta - z_rho0) * ((x - x_min) / (gamma - x_min));
}

inline Betas betas_from(double rho0, double gamma, const ModelConfig& cfg) {
  if (!(rho0 > 0.0 && rho0 < 1.0)) throw DomainError("rho0 must lie in (0, 1)");
  if (!(rho0 < cfg.theta)) throw ConstraintError("rho0 >= theta gives a nonpositive slope");
  if (!(gamma > cfg.x_min)) throw DomainError("gamma <= x_min gives a degenerate slope");
  const double z_theta = cfg.working_link.quantile(cfg.theta);
  const double z_rho0 = cfg.working_link.quantile(rho0);
  const double width = gamma - cfg.x_min;
  return {(gamma * z_rho0 - cfg.x_min * z_theta) / width, (z_theta - z_rho0) / width};
}

inline double gamma_from(double beta0, double beta1, const ModelConfig& cfg) {
  if (!(beta1 > 0.0)) throw DomainError("beta1 must be positive");
  return (cfg.working_link.quantile(cfg.theta) - beta0) / beta1;
}

/// DLT probability at x_min implied by (beta0, beta1).
inline double rho0_from(double beta0, double beta1, const ModelConfig& cfg) {
  return cfg.working_link.cdf(beta0 + beta1 * cfg.x_min);
}

inline double log_likelihood(double rho0, double gamma, std::span<const ToxicityRecord> data,
                             const ModelConfig& cfg) {
  if (data.empty()) return 0.0;
  if (!(rho0 > 0.0 && rho0 < cfg.theta)) throw ConstraintError("rho0 must lie in (0, theta)");
  if (!(gamma > cfg.x_min)) throw DomainError("gamma must exceed x_min");
  const auto& link = cfg.working_link;
  const double z_theta = link.quantile(cfg.theta);
  const double z_rho0 = link.quantile(rho0);
  double total = 0.0;
  for (const auto& r : data) {
    // At x_min the predictor is exactly F^-1(rho0); use log rho0 directly there.
    if (r.dose == cfg.x_min) {
      total += r.dlt ? std::log(rho0) : std::log1p(-rho0);
      continue;
    }
    const double eta = linear_predictor(z_rho0, z_theta, r.dose, gamma, cfg.x_min);
    total += r.dlt ? link.log_cdf(eta) : link.log_sf(eta);
  }
  return total;
}

/// Log prior density of (rho0, gamma) with respect to (rho0 / theta, gamma).
///
/// rho0 and gamma are independent a priori; rho0 / theta ~ Beta(a_rho, b_rho)
/// and (gamma - x_min) / (x_max - x_min) ~ Beta(a_gamma, b_gamma). The rho0
/// term is expressed on the rescaled unit interval, so it omits the constant
/// -log(theta); normalization removes it. Outside the support returns -inf.
inline double log_prior(double rho0, double gamma, const ModelConfig& cfg) {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  if (!(rho0 > 0.0 && rho0 < cfg.theta)) return kNegInf;
  if (!(gamma > cfg.x_min && gamma < cfg.x_max)) return kNegInf;
  return beta_log_pdf(cfg.prior_rho0, rho0 / cfg.theta) +
         beta_log_pdf(cfg.prior_gamma, (gamma - cfg.x_min) / cfg.range()) - std::log(cfg.range());
}

}  // namespace ewoc
