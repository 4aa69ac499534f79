#pragma once

// Posterior of (rho0, gamma) given toxicity data, by tensor-product quadrature
// (default) or random-walk Metropolis (cross-check).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "ewoc/errors.hpp"
#include "ewoc/model.hpp"
#include "ewoc/random.hpp"
#include "ewoc/stats.hpp"

namespace ewoc {

enum class Backend { Quadrature, Metropolis };

inline std::string to_string(Backend b) { return b == Backend::Quadrature ? "quadrature" : "metropolis"; }

struct BackendSpec {
  Backend kind = Backend::Quadrature;
  std::size_t resolution = 401;  ///< quadrature: cells per axis
  std::size_t burn_in = 10'000;  ///< metropolis
  std::size_t draws = 100'000;   ///< metropolis: retained draws
  std::uint64_t seed = 20170601;  ///< metropolis: stream key
  double target_acceptance = 0.3;

  friend bool operator==(const BackendSpec&, const BackendSpec&) = default;
};

struct PosteriorDiagnostics {
  std::size_t resolution = 0;
  std::size_t burn_in = 0;
  std::size_t draws = 0;
  double acceptance_rate = 0.0;
  double step_size = 0.0;
  std::string warning;
};

struct DensityPoint {
  double dose = 0.0;
  double density = 0.0;
};

struct PosteriorSummary {
  std::vector<std::pair<double, double>> gamma_quantiles;  ///< (probability, dose), as requested
  double gamma_mean = 0.0;
  double gamma_median = 0.0;
  double rho0_mean = 0.0;
  double log_normalization = std::numeric_limits<double>::quiet_NaN();
  double normalization = std::numeric_limits<double>::quiet_NaN();
  Backend backend = Backend::Quadrature;
  PosteriorDiagnostics diagnostics;
  double support_lo = 0.0;
  double support_hi = 1.0;
  /// Piecewise-linear marginal CDF of gamma: cdf_values[k] = P(gamma <= cdf_doses[k]).
  std::vector<double> cdf_doses;
  std::vector<double> cdf_values;

  /// Inverse of the piecewise-linear marginal CDF.
  double quantile_from_cdf(double p) const {
    if (!(p > 0.0 && p < 1.0)) throw DomainError("quantile requires p in (0, 1)");
    const auto it = std::lower_bound(cdf_values.begin(), cdf_values.end(), p);
    if (it == cdf_values.begin()) return cdf_doses.front();
    if (it == cdf_values.end()) return cdf_doses.back();
    const auto k = static_cast<std::size_t>(it - cdf_values.begin());
    const double c0 = cdf_values[k - 1];
    const double c1 = cdf_values[k];
    const double d0 = cdf_doses[k - 1];
    const double d1 = cdf_doses[k];
    if (c1 <= c0) return d0;
    return std::min(d1, d0 + (p - c0) / (c1 - c0) * (d1 - d0));
  }

  /// Quantile at p: the requested value when p was requested, else interpolated.
  double quantile(double p) const {
    for (const auto& [prob, dose] : gamma_quantiles)
      if (prob == p) return dose;
    return quantile_from_cdf(p);
  }

  /// Marginal posterior CDF of gamma.
  double cdf(double dose) const {
    if (cdf_doses.empty()) return 0.0;
    if (dose <= cdf_doses.front()) return dose < cdf_doses.front() ? 0.0 : cdf_values.front();
    if (dose >= cdf_doses.back()) return 1.0;
    const auto it = std::upper_bound(cdf_doses.begin(), cdf_doses.end(), dose);
    const auto k = static_cast<std::size_t>(it - cdf_doses.begin());
    const double d0 = cdf_doses[k - 1];
    const double d1 = cdf_doses[k];
    const double c0 = cdf_values[k - 1];
    const double c1 = cdf_values[k];
    return c0 + (dose - d0) / (d1 - d0) * (c1 - c0);
  }

  /// Marginal density of gamma sampled at `points` equally spaced doses over the support.
  std::vector<DensityPoint> density_trace(std::size_t points = 201) const {
    std::vector<DensityPoint> out;
    if (points < 2 || cdf_doses.size() < 2) return out;
    out.reserve(points);
    for (std::size_t i = 0; i < points; ++i) {
      const double t = support_lo + (support_hi - support_lo) * static_cast<double>(i) /
                                        static_cast<double>(points - 1);
      double density = 0.0;
      if (t >= cdf_doses.front() && t <= cdf_doses.back()) {
        auto it = std::upper_bound(cdf_doses.begin(), cdf_doses.end(), t);
        if (it == cdf_doses.end()) --it;
        auto k = static_cast<std::size_t>(it - cdf_doses.begin());
        while (k > 0 && cdf_doses[k] - cdf_doses[k - 1] <= 0.0) --k;
        if (k > 0) density = (cdf_values[k] - cdf_values[k - 1]) / (cdf_doses[k] - cdf_doses[k - 1]);
      }
      out.push_back({t, density});
    }
    return out;
  }
};

namespace detail {

inline void check_probs(std::span<const double> probs) {
  for (double p : probs)
    if (!(p > 0.0 && p < 1.0)) throw DomainError("posterior quantile probabilities must lie in (0, 1)");
}

}  // namespace detail

/// Midpoint-rule posterior on a resolution x resolution grid over
/// (rho0 / theta, (gamma - x_min) / range) in the unit square.
///
/// Records are accumulated into a log-likelihood grid one at a time, so a
/// sequential trial pays one grid sweep per patient. Summaries depend only on
/// the records added and their order.
class QuadraturePosterior {
 public:
  QuadraturePosterior(const ModelConfig& cfg, std::size_t resolution)
      : cfg_(cfg), n_(resolution), loglik_(resolution * resolution, 0.0) {
    if (resolution < 2) throw DomainError("quadrature resolution must be at least 2");
    const auto& link = cfg_.working_link;
    z_theta_ = link.quantile(cfg_.theta);
    rho_.resize(n_);
    z_rho_.resize(n_);
    dz_.resize(n_);
    log_rho_.resize(n_);
    log1m_rho_.resize(n_);
    prior_rho_.resize(n_);
    gamma_.resize(n_);
    width_.resize(n_);
    prior_gamma_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) {
      const double u = (static_cast<double>(i) + 0.5) / static_cast<double>(n_);
      rho_[i] = cfg_.theta * u;
      z_rho_[i] = link.quantile(rho_[i]);
      dz_[i] = z_theta_ - z_rho_[i];
      log_rho_[i] = std::log(rho_[i]);
      log1m_rho_[i] = std::log1p(-rho_[i]);
      prior_rho_[i] = beta_log_pdf(cfg_.prior_rho0, u);
      gamma_[i] = cfg_.x_min + cfg_.range() * u;
      width_[i] = gamma_[i] - cfg_.x_min;
      prior_gamma_[i] = beta_log_pdf(cfg_.prior_gamma, u) - std::log(cfg_.range());
    }
  }

  const ModelConfig& config() const noexcept { return cfg_; }
  std::size_t resolution() const noexcept { return n_; }
  std::size_t records() const noexcept { return count_; }

  void add(const ToxicityRecord& r) {
    ++count_;
    if (r.dose == cfg_.x_min) {
      const auto& term = r.dlt ? log_rho_ : log1m_rho_;
      for (std::size_t i = 0; i < n_; ++i) {
        double* row = loglik_.data() + i * n_;
        for (std::size_t j = 0; j < n_; ++j) row[j] += term[i];
      }
      return;
    }
    std::vector<double> s(n_);
    for (std::size_t j = 0; j < n_; ++j) s[j] = (r.dose - cfg_.x_min) / width_[j];
    const auto& link = cfg_.working_link;
    const bool logistic = link.family() == LinkFamily::Logistic && link.location() == 0.0 && link.scale() == 1.0;
    for (std::size_t i = 0; i < n_; ++i) {
      double* row = loglik_.data() + i * n_;
      const double z0 = z_rho_[i];
      const double dz = dz_[i];
      if (logistic) {
        if (r.dlt) {
          for (std::size_t j = 0; j < n_; ++j) row[j] += detail::logistic_log_cdf(z0 + dz * s[j]);
        } else {
          for (std::size_t j = 0; j < n_; ++j) row[j] += detail::logistic_log_cdf(-(z0 + dz * s[j]));
        }
      } else if (r.dlt) {
        for (std::size_t j = 0; j < n_; ++j) row[j] += link.log_cdf(z0 + dz * s[j]);
      } else {
        for (std::size_t j = 0; j < n_; ++j) row[j] += link.log_sf(z0 + dz * s[j]);
      }
    }
  }

  void add(std::span<const ToxicityRecord> data) {
    for (const auto& r : data) add(r);
  }

  PosteriorSummary summarize(std::span<const double> probs) const {
    detail::check_probs(probs);
    const std::size_t n = n_;
    std::vector<double> logpost(n * n);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double v = loglik_[i * n + j] + prior_rho_[i] + prior_gamma_[j];
        logpost[i * n + j] = v;
        top = std::max(top, v);
      }
    }
    if (!std::isfinite(top)) throw UnderflowError("posterior is zero on the whole grid");

    std::vector<double> gamma_mass(n, 0.0);
    double total = 0.0;
    double rho_moment = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double row_sum = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double w = std::exp(logpost[i * n + j] - top);
        gamma_mass[j] += w;
        row_sum += w;
      }
      total += row_sum;
      rho_moment += row_sum * rho_[i];
    }

    PosteriorSummary out;
    out.backend = Backend::Quadrature;
    out.diagnostics.resolution = n;
    out.support_lo = cfg_.x_min;
    out.support_hi = cfg_.x_max;
    const double cell = cfg_.range() / static_cast<double>(n * n);
    out.log_normalization = top + std::log(total) + std::log(cell);
    out.normalization = std::exp(out.log_normalization);
    if (out.log_normalization < std::log(1e-300))
      throw UnderflowError("posterior mass below 1e-300 before normalization");

    double mass_total = 0.0;
    for (double m : gamma_mass) mass_total += m;
    out.cdf_doses.resize(n + 1);
    out.cdf_values.resize(n + 1);
    double running = 0.0;
    double gamma_moment = 0.0;
    out.cdf_doses[0] = cfg_.x_min;
    out.cdf_values[0] = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      running += gamma_mass[j];
      gamma_moment += gamma_mass[j] * gamma_[j];
      out.cdf_doses[j + 1] = cfg_.x_min + cfg_.range() * static_cast<double>(j + 1) / static_cast<double>(n);
      out.cdf_values[j + 1] = std::min(1.0, running / mass_total);
    }
    out.cdf_doses[n] = cfg_.x_max;
    out.cdf_values[n] = 1.0;
    out.gamma_mean = gamma_moment / mass_total;
    out.rho0_mean = rho_moment / total;
    for (double p : probs) out.gamma_quantiles.emplace_back(p, out.quantile_from_cdf(p));
    out.gamma_median = out.quantile_from_cdf(0.5);
    return out;
  }

 private:
  ModelConfig cfg_;
  std::size_t n_;
  std::size_t count_ = 0;
  double z_theta_ = 0.0;
  std::vector<double> rho_, z_rho_, dz_, log_rho_, log1m_rho_, prior_rho_;
  std::vector<double> gamma_, width_, prior_gamma_;
  std::vector<double> loglik_;
};

namespace detail {

/// Type-7 empirical quantile of sorted data.
inline double sorted_quantile(std::span<const double> sorted, double p) {
  const double h = static_cast<double>(sorted.size() - 1) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  if (lo + 1 >= sorted.size()) return sorted.back();
  return sorted[lo] + (h - static_cast<double>(lo)) * (sorted[lo + 1] - sorted[lo]);
}

inline double logistic(double a) { return 1.0 / (1.0 + std::exp(-a)); }

}  // namespace detail

/// Random-walk Metropolis on (logit(rho0 / theta), logit((gamma - x_min) / range)).
///
/// The proposal scale is tuned during burn-in toward spec.target_acceptance and
/// frozen afterwards. The caller owns the stream.
inline PosteriorSummary metropolis_posterior(std::span<const ToxicityRecord> data, const ModelConfig& cfg,
                                             const BackendSpec& spec, std::span<const double> probs,
                                             Stream& stream) {
  detail::check_probs(probs);
  if (spec.draws < 2) throw DomainError("metropolis needs at least two retained draws");

  auto log_target = [&](double a, double b) {
    const double u = detail::logistic(a);
    const double v = detail::logistic(b);
    if (!(u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0)) return -std::numeric_limits<double>::infinity();
    const double rho0 = cfg.theta * u;
    const double gamma = cfg.x_min + cfg.range() * v;
    const double lp = log_prior(rho0, gamma, cfg);
    if (!std::isfinite(lp)) return lp;
    // Jacobian of the logit transforms.
    return log_likelihood(rho0, gamma, data, cfg) + lp + std::log(u) + std::log1p(-u) + std::log(v) +
           std::log1p(-v);
  };

  double a = 0.0;
  double b = 0.0;
  double current = log_target(a, b);
  double step = 1.0;
  const std::size_t batch = 100;
  std::size_t accepted_batch = 0;

  auto propose = [&]() {
    const double na = a + step * stream.normal();
    const double nb = b + step * stream.normal();
    const double cand = log_target(na, nb);
    const double log_u = std::log(stream.uniform_open());
    if (log_u < cand - current) {
      a = na;
      b = nb;
      current = cand;
      return true;
    }
    return false;
  };

  for (std::size_t it = 1; it <= spec.burn_in; ++it) {
    if (propose()) ++accepted_batch;
    if (it % batch == 0) {
      const double rate = static_cast<double>(accepted_batch) / static_cast<double>(batch);
      step *= std::exp(rate - spec.target_acceptance);
      accepted_batch = 0;
    }
  }

  std::vector<double> gammas;
  gammas.reserve(spec.draws);
  double rho_sum = 0.0;
  double gamma_sum = 0.0;
  std::size_t accepted = 0;
  for (std::size_t it = 0; it < spec.draws; ++it) {
    if (propose()) ++accepted;
    const double gamma = cfg.x_min + cfg.range() * detail::logistic(b);
    gammas.push_back(gamma);
    gamma_sum += gamma;
    rho_sum += cfg.theta * detail::logistic(a);
  }
  std::sort(gammas.begin(), gammas.end());

  PosteriorSummary out;
  out.backend = Backend::Metropolis;
  out.support_lo = cfg.x_min;
  out.support_hi = cfg.x_max;
  out.diagnostics.burn_in = spec.burn_in;
  out.diagnostics.draws = spec.draws;
  out.diagnostics.step_size = step;
  out.diagnostics.acceptance_rate = static_cast<double>(accepted) / static_cast<double>(spec.draws);
  if (out.diagnostics.acceptance_rate < 0.1 || out.diagnostics.acceptance_rate > 0.6)
    out.diagnostics.warning = "acceptance rate outside [0.1, 0.6] after adaptation";
  out.gamma_mean = gamma_sum / static_cast<double>(spec.draws);
  out.rho0_mean = rho_sum / static_cast<double>(spec.draws);
  constexpr std::size_t kKnots = 1000;
  out.cdf_doses.resize(kKnots + 1);
  out.cdf_values.resize(kKnots + 1);
  for (std::size_t k = 0; k <= kKnots; ++k) {
    const double p = static_cast<double>(k) / static_cast<double>(kKnots);
    out.cdf_values[k] = p;
    out.cdf_doses[k] = detail::sorted_quantile(gammas, p);
  }
  for (double p : probs) out.gamma_quantiles.emplace_back(p, detail::sorted_quantile(gammas, p));
  out.gamma_median = detail::sorted_quantile(gammas, 0.5);
  return out;
}

/// Posterior summary with the backend's default stream for Metropolis: keyed by
/// spec.seed and the number of records, so equal inputs give equal outputs.
inline PosteriorSummary posterior_summary(std::span<const ToxicityRecord> data, const ModelConfig& cfg,
                                          const BackendSpec& backend, std::span<const double> probs) {
  if (backend.kind == Backend::Quadrature) {
    QuadraturePosterior q(cfg, backend.resolution);
    q.add(data);
    return q.summarize(probs);
  }
  Stream stream(backend.seed, 0x4D434D43u, static_cast<std::uint32_t>(data.size()));
  return metropolis_posterior(data, cfg, backend, probs, stream);
}

}  // namespace ewoc
