#pragma once

// Sequential trial state machine shared by simulation and live conduct.

#include <cmath>
#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ewoc/errors.hpp"
#include "ewoc/model.hpp"
#include "ewoc/policy.hpp"
#include "ewoc/posterior.hpp"

namespace ewoc {

enum class MtdEstimator { PosteriorMedian, AlphaQuantile };

inline std::string to_string(MtdEstimator e) {
  return e == MtdEstimator::PosteriorMedian ? "median" : "alpha";
}

struct TrialConfig {
  ModelConfig model;
  DoseScheme scheme;
  FeasibilitySchedule feasibility = FeasibilitySchedule::conditional(0.25, 0.05);
  int sample_size = 20;
  int cohort_size = 1;
  double starting_dose = 0.0;
  BackendSpec backend;
  MtdEstimator mtd_estimator = MtdEstimator::PosteriorMedian;

  friend bool operator==(const TrialConfig&, const TrialConfig&) = default;
};

/// Every violated invariant, keyed by the dotted field path.
inline std::vector<FieldError> validation_errors(const TrialConfig& c) {
  std::vector<FieldError> errs;
  auto fail = [&](std::string field, std::string msg) { errs.push_back({std::move(field), std::move(msg)}); };
  const auto& m = c.model;
  if (!std::isfinite(m.x_min) || !std::isfinite(m.x_max) || !(m.x_min < m.x_max))
    fail("model.x_max", "x_min must be below x_max");
  if (!(m.theta > 0.0 && m.theta < 1.0)) fail("model.theta", "theta must lie in (0, 1)");
  if (!m.prior_rho0.valid()) fail("model.prior_rho0", "Beta parameters must be positive");
  if (!m.prior_gamma.valid()) fail("model.prior_gamma", "Beta parameters must be positive");

  const auto& f = c.feasibility;
  if (!(f.alpha0 > 0.0)) fail("feasibility.alpha0", "alpha0 must be positive");
  if (!(f.alpha0 <= f.cap)) fail("feasibility.cap", "cap must be at least alpha0");
  if (!(f.cap <= 0.5)) fail("feasibility.cap", "cap must not exceed 0.5");
  if (!(f.step >= 0.0)) fail("feasibility.step", "step must be nonnegative");

  if (c.cohort_size < 1) fail("cohort_size", "cohort_size must be at least 1");
  if (c.sample_size < c.cohort_size) fail("sample_size", "sample_size must be at least cohort_size");

  const bool range_ok = m.x_min < m.x_max;
  if (!(c.starting_dose >= m.x_min && c.starting_dose <= m.x_max))
    fail("starting_dose", "starting_dose must lie in [x_min, x_max]");

  if (c.scheme.is_discrete()) {
    const auto& g = c.scheme.grid;
    if (g.size() < 2) fail("scheme.grid", "grid needs at least two doses");
    bool increasing = true;
    for (std::size_t i = 1; i < g.size(); ++i)
      if (!(g[i] > g[i - 1])) increasing = false;
    if (!increasing) fail("scheme.grid", "grid doses must be strictly increasing (no duplicates)");
    if (range_ok && !g.empty() && (g.front() < m.x_min - kDoseTolerance || g.back() > m.x_max + kDoseTolerance))
      fail("scheme.grid", "grid doses must lie in [x_min, x_max]");
    if (!c.scheme.index_of(c.starting_dose)) fail("starting_dose", "starting_dose must be a grid dose");
  }

  const auto& b = c.backend;
  if (b.kind == Backend::Quadrature && b.resolution < 2) fail("backend.resolution", "resolution must be at least 2");
  if (b.kind == Backend::Metropolis && b.draws < 2) fail("backend.draws", "draws must be at least 2");
  return errs;
}

inline void validate(const TrialConfig& c) {
  auto errs = validation_errors(c);
  if (!errs.empty()) throw ValidationError(std::move(errs));
}

enum class TrialStatus { AwaitingOutcome, ReadyToDose, Complete };

inline std::string to_string(TrialStatus s) {
  switch (s) {
    case TrialStatus::AwaitingOutcome: return "AwaitingOutcome";
    case TrialStatus::ReadyToDose: return "ReadyToDose";
    case TrialStatus::Complete: return "Complete";
  }
  return "unknown";
}

struct DoseRecommendation {
  double continuous_dose = 0.0;
  double administered_dose = 0.0;
  double alpha_used = 0.0;
  std::size_t cohort_start = 0;  ///< number of records the recommendation was computed from
  PosteriorSummary posterior;
};

/// Immutable trial value: configuration plus the ordered outcome history.
///
/// Status is derived: Complete once sample_size outcomes are recorded,
/// AwaitingOutcome while a cohort is partially observed, else ReadyToDose.
class TrialState {
 public:
  const TrialConfig& config() const noexcept { return *config_; }
  std::span<const ToxicityRecord> records() const noexcept { return records_; }
  std::size_t size() const noexcept { return records_.size(); }

  TrialStatus status() const noexcept {
    const auto n = records_.size();
    if (n >= static_cast<std::size_t>(config_->sample_size)) return TrialStatus::Complete;
    if (n % static_cast<std::size_t>(config_->cohort_size) != 0) return TrialStatus::AwaitingOutcome;
    return TrialStatus::ReadyToDose;
  }

  /// Index of the first record of the current (possibly partial) cohort.
  std::size_t cohort_start() const noexcept {
    const auto c = static_cast<std::size_t>(config_->cohort_size);
    return records_.size() / c * c;
  }

  friend bool operator==(const TrialState& a, const TrialState& b) {
    return a.config() == b.config() && a.records_ == b.records_;
  }

 private:
  friend TrialState new_trial(TrialConfig config);
  friend TrialState append_record(const TrialState& state, ToxicityRecord r);

  std::shared_ptr<const TrialConfig> config_;
  std::vector<ToxicityRecord> records_;
};

inline TrialState new_trial(TrialConfig config) {
  validate(config);
  TrialState s;
  s.config_ = std::make_shared<const TrialConfig>(std::move(config));
  return s;
}

inline TrialState append_record(const TrialState& state, ToxicityRecord r) {
  TrialState next = state;
  next.records_.push_back(r);
  return next;
}

/// Probabilities every recommendation reports, besides alpha.
inline constexpr double kReportedProbs[] = {0.05, 0.25, 0.5, 0.75, 0.95};

/// Incremental recommender: holds the posterior accumulator for a growing
/// record sequence. Results are bit-identical to recomputing from scratch.
class Recommender {
 public:
  explicit Recommender(const TrialConfig& config) : config_(config) {
    if (config_.backend.kind == Backend::Quadrature) quad_.emplace(config_.model, config_.backend.resolution);
  }

  void add(const ToxicityRecord& r) {
    records_.push_back(r);
    if (quad_) quad_->add(r);
  }

  std::span<const ToxicityRecord> records() const noexcept { return records_; }

  PosteriorSummary posterior(double alpha) const {
    std::vector<double> probs{alpha};
    for (double p : kReportedProbs)
      if (p != alpha) probs.push_back(p);
    if (quad_) return quad_->summarize(probs);
    return posterior_summary(records_, config_.model, config_.backend, probs);
  }

  /// Recommendation for the cohort starting after the records added so far.
  DoseRecommendation recommend() const {
    DoseRecommendation rec;
    rec.cohort_start = records_.size();
    rec.alpha_used = feasibility_alpha(config_.feasibility, records_);
    rec.posterior = posterior(rec.alpha_used);
    if (records_.empty()) {
      rec.continuous_dose = config_.starting_dose;
      rec.administered_dose = config_.starting_dose;
    } else {
      rec.continuous_dose = rec.posterior.quantile(rec.alpha_used);
      rec.administered_dose = apply_dose_policy(rec.continuous_dose, config_.scheme, records_);
    }
    return rec;
  }

 private:
  TrialConfig config_;
  std::vector<ToxicityRecord> records_;
  std::optional<QuadraturePosterior> quad_;
};

inline DoseRecommendation recommend_next(const TrialState& state) {
  switch (state.status()) {
    case TrialStatus::Complete: throw SequencingError("trial is complete");
    case TrialStatus::AwaitingOutcome: throw SequencingError("cohort outcomes are still pending");
    case TrialStatus::ReadyToDose: break;
  }
  Recommender r(state.config());
  for (const auto& rec : state.records()) r.add(rec);
  return r.recommend();
}

/// Dose assigned to the current cohort (also valid while the cohort is partially observed).
inline double current_cohort_dose(const TrialState& state) {
  if (state.status() == TrialStatus::Complete) throw SequencingError("trial is complete");
  Recommender r(state.config());
  const auto records = state.records();
  for (std::size_t i = 0; i < state.cohort_start(); ++i) r.add(records[i]);
  return r.recommend().administered_dose;
}

/// Append an outcome for a recommendation previously issued for this state.
inline TrialState record_outcome(const TrialState& state, const DoseRecommendation& issued, int dlt) {
  if (state.status() == TrialStatus::Complete) throw SequencingError("trial is complete");
  if (issued.cohort_start != state.cohort_start())
    throw IntegrityError("recommendation was issued for a different point in the trial");
  if (dlt != 0 && dlt != 1) throw DomainError("dlt must be 0 or 1");
  return append_record(state, {issued.administered_dose, dlt});
}

/// Append an outcome reported at `dose`; the dose must match the cohort's
/// recommended dose (within 1e-9) and the recommended value is what is stored.
inline TrialState record_outcome(const TrialState& state, double dose, int dlt) {
  if (state.status() == TrialStatus::Complete) throw SequencingError("trial is complete");
  if (dlt != 0 && dlt != 1) throw DomainError("dlt must be 0 or 1");
  const double expected = current_cohort_dose(state);
  if (!(std::abs(dose - expected) <= kDoseTolerance))
    throw IntegrityError("dose " + std::to_string(dose) + " does not match the recommended dose " +
                         std::to_string(expected));
  return append_record(state, {expected, dlt});
}

struct MtdEstimate {
  double estimate = 0.0;
  bool interim = false;
  double alpha = 0.0;  ///< terminal feasibility bound
  PosteriorSummary posterior;
};

namespace detail {

inline MtdEstimate estimate_from(const TrialConfig& config, std::span<const ToxicityRecord> records,
                                 const PosteriorSummary& post) {
  MtdEstimate out;
  out.alpha = feasibility_alpha(config.feasibility, records);
  out.interim = records.size() < static_cast<std::size_t>(config.sample_size);
  out.estimate = config.mtd_estimator == MtdEstimator::PosteriorMedian ? post.quantile(0.5) : post.quantile(out.alpha);
  out.posterior = post;
  return out;
}

}  // namespace detail

/// End-of-trial MTD estimate on the continuous dose scale. Callable mid-trial,
/// in which case the result is flagged interim.
inline MtdEstimate estimate_mtd(const TrialState& state) {
  Recommender r(state.config());
  for (const auto& rec : state.records()) r.add(rec);
  const double alpha = feasibility_alpha(state.config().feasibility, state.records());
  return detail::estimate_from(state.config(), state.records(), r.posterior(alpha));
}

/// Rebuild a state from stored records, checking each cohort was dosed as the
/// design prescribes. Returns the state and the recommendation that produced
/// each cohort's dose.
inline TrialState replay(const TrialConfig& config, std::span<const ToxicityRecord> records,
                         std::vector<DoseRecommendation>* recommendations = nullptr) {
  TrialState state = new_trial(config);
  if (records.size() > static_cast<std::size_t>(config.sample_size))
    throw IntegrityError("more records than the sample size");
  Recommender r(config);
  std::optional<DoseRecommendation> issued;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (state.cohort_start() == state.size()) {
      issued = r.recommend();
      if (recommendations) recommendations->push_back(*issued);
    }
    const auto& rec = records[i];
    if (rec.dlt != 0 && rec.dlt != 1) throw IntegrityError("record " + std::to_string(i) + ": dlt must be 0 or 1");
    if (rec.dose != issued->administered_dose)
      throw IntegrityError("record " + std::to_string(i) + ": dose " + std::to_string(rec.dose) +
                           " differs from the prescribed " + std::to_string(issued->administered_dose));
    state = record_outcome(state, *issued, rec.dlt);
    r.add(rec);
  }
  return state;
}

}  // namespace ewoc
