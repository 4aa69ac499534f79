#pragma once

// Monte Carlo operating characteristics of EWOC dose schemes.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <mutex>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "ewoc/errors.hpp"
#include "ewoc/model.hpp"
#include "ewoc/policy.hpp"
#include "ewoc/random.hpp"
#include "ewoc/stats.hpp"
#include "ewoc/trial.hpp"

namespace ewoc {

/// The data-generating dose-toxicity curve, pinned through (x_min, rho0) and (MTD, theta).
///
/// Location and scale of the link are absorbed by (beta0, beta1) once those two
/// points are fixed, so Normal(0, 2) and Normal(0, 1) give the same curve. Only
/// the family and the skew-normal shape change its form.
struct TrueModel {
  LinkFunction link;
  double true_mtd = 0.4;
  double true_rho0 = 0.05;
  double theta = 0.33;
  double x_min = 0.0;
  double beta0 = 0.0;
  double beta1 = 0.0;

  static TrueModel make(const LinkFunction& link, double true_mtd, double true_rho0, double theta, double x_min) {
    ModelConfig m;
    m.x_min = x_min;
    m.x_max = std::max(true_mtd, x_min + 1.0);
    m.theta = theta;
    m.working_link = link;
    const auto b = betas_from(true_rho0, true_mtd, m);
    return {link, true_mtd, true_rho0, theta, x_min, b.beta0, b.beta1};
  }

  double prob(double dose) const { return link.cdf(beta0 + beta1 * dose); }

  std::string label() const { return link.label(); }
};

inline double true_prob(const TrueModel& model, double dose) { return model.prob(dose); }

struct OcParams {
  double mtd_halfwidth_factor = 0.15;  ///< optimal MTD interval: MTD +- factor * MTD
  double tox_halfwidth = 0.10;         ///< optimal toxicity interval: theta +- halfwidth
  double dlt_halfwidth = 0.10;         ///< target interval for the observed DLT proportion
};

inline constexpr double kIntervalTolerance = 1e-12;

inline bool in_mtd_interval(double dose, double true_mtd, double factor) {
  return std::abs(dose - true_mtd) <= factor * true_mtd + kIntervalTolerance;
}

inline bool in_tox_interval(double dose, const TrueModel& model, double halfwidth) {
  return std::abs(model.prob(dose) - model.theta) <= halfwidth + kIntervalTolerance;
}

/// One simulated trial.
struct TrialRecord {
  std::vector<double> doses;             ///< administered, per patient
  std::vector<double> continuous_doses;  ///< EWOC continuous dose behind each administered dose
  std::vector<int> outcomes;
  double mtd_estimate = 0.0;       ///< continuous scale
  double mtd_estimate_grid = 0.0;  ///< rounded onto the scheme grid (equals mtd_estimate when continuous)
  std::vector<char> optimal_mtd;   ///< per patient: dose in the optimal MTD interval
  std::vector<char> optimal_tox;   ///< per patient: dose in the optimal toxicity interval
  double dlt_proportion = 0.0;
};

/// Simulate one trial against an arbitrary truth (dose -> P(DLT)). Each
/// patient's outcome is a Bernoulli draw from `stream`; the trajectory follows
/// the trial-runtime transitions exactly.
template <class Truth>
TrialRecord simulate_trajectory(const Truth& truth, const TrialConfig& config, Stream& stream) {
  TrialState state = new_trial(config);
  Recommender recommender(config);
  TrialRecord out;
  const auto n = static_cast<std::size_t>(config.sample_size);
  out.doses.reserve(n);
  out.outcomes.reserve(n);
  while (state.status() != TrialStatus::Complete) {
    const DoseRecommendation rec = recommender.recommend();
    for (int member = 0; member < config.cohort_size && state.status() != TrialStatus::Complete; ++member) {
      const int dlt = stream.bernoulli(truth(rec.administered_dose)) ? 1 : 0;
      state = record_outcome(state, rec, dlt);
      recommender.add(state.records().back());
      out.doses.push_back(rec.administered_dose);
      out.continuous_doses.push_back(rec.continuous_dose);
      out.outcomes.push_back(dlt);
    }
  }
  const double alpha = feasibility_alpha(config.feasibility, state.records());
  const auto est = detail::estimate_from(config, state.records(), recommender.posterior(alpha));
  out.mtd_estimate = est.estimate;
  out.mtd_estimate_grid = config.scheme.is_discrete() ? round_to_grid(est.estimate, config.scheme) : est.estimate;
  int dlts = 0;
  for (int y : out.outcomes) dlts += y;
  out.dlt_proportion = static_cast<double>(dlts) / static_cast<double>(out.outcomes.size());
  return out;
}

inline void flag_patients(TrialRecord& record, const TrueModel& model, const OcParams& params) {
  record.optimal_mtd.clear();
  record.optimal_tox.clear();
  for (double d : record.doses) {
    record.optimal_mtd.push_back(in_mtd_interval(d, model.true_mtd, params.mtd_halfwidth_factor) ? 1 : 0);
    record.optimal_tox.push_back(in_tox_interval(d, model, params.tox_halfwidth) ? 1 : 0);
  }
}

inline TrialRecord simulate_trial(const TrueModel& model, const TrialConfig& config, Stream& stream,
                                  const OcParams& params = {}) {
  auto record = simulate_trajectory([&model](double d) { return model.prob(d); }, config, stream);
  flag_patients(record, model, params);
  return record;
}

// ---------------------------------------------------------------------------
// Operating characteristics

struct OCSet {
  double bias = 0.0;
  double mse = 0.0;
  double avg_dlt_rate = 0.0;
  double pct_trials_dlt_outside = 0.0;
  double pct_trials_mtd_in_mtd_interval = 0.0;
  double pct_trials_mtd_in_tox_interval = 0.0;
  double avg_pct_patients_optimal_mtd = 0.0;
  double avg_pct_patients_optimal_tox = 0.0;
};

/// (name, value) for every OCSet field, in declaration order.
inline std::vector<std::pair<std::string, double>> oc_fields(const OCSet& oc) {
  return {{"bias", oc.bias},
          {"mse", oc.mse},
          {"avg_dlt_rate", oc.avg_dlt_rate},
          {"pct_trials_dlt_outside", oc.pct_trials_dlt_outside},
          {"pct_trials_mtd_in_mtd_interval", oc.pct_trials_mtd_in_mtd_interval},
          {"pct_trials_mtd_in_tox_interval", oc.pct_trials_mtd_in_tox_interval},
          {"avg_pct_patients_optimal_mtd", oc.avg_pct_patients_optimal_mtd},
          {"avg_pct_patients_optimal_tox", oc.avg_pct_patients_optimal_tox}};
}

/// Which MTD estimate the bias/MSE/interval characteristics are computed from.
enum class MtdScale { Continuous, Grid };

inline std::string to_string(MtdScale s) { return s == MtdScale::Continuous ? "continuous" : "grid"; }

/// Per-patient flags are taken from the records (see flag_patients).
inline OCSet operating_characteristics(std::span<const TrialRecord> records, const TrueModel& model,
                                       const OcParams& params = {}, MtdScale scale = MtdScale::Continuous) {
  if (records.empty()) throw DomainError("operating_characteristics needs at least one trial");
  OCSet oc;
  const double count = static_cast<double>(records.size());
  double sum_est = 0.0;
  double sum_sq = 0.0;
  for (const auto& r : records) {
    const double est = scale == MtdScale::Grid ? r.mtd_estimate_grid : r.mtd_estimate;
    const double err = est - model.true_mtd;
    sum_est += est;
    sum_sq += err * err;
    oc.avg_dlt_rate += r.dlt_proportion;
    if (std::abs(r.dlt_proportion - model.theta) > params.dlt_halfwidth + kIntervalTolerance)
      oc.pct_trials_dlt_outside += 1.0;
    if (in_mtd_interval(est, model.true_mtd, params.mtd_halfwidth_factor)) oc.pct_trials_mtd_in_mtd_interval += 1.0;
    if (in_tox_interval(est, model, params.tox_halfwidth)) oc.pct_trials_mtd_in_tox_interval += 1.0;
    double opt_mtd = 0.0;
    double opt_tox = 0.0;
    for (char f : r.optimal_mtd) opt_mtd += f;
    for (char f : r.optimal_tox) opt_tox += f;
    if (!r.optimal_mtd.empty()) oc.avg_pct_patients_optimal_mtd += opt_mtd / static_cast<double>(r.optimal_mtd.size());
    if (!r.optimal_tox.empty()) oc.avg_pct_patients_optimal_tox += opt_tox / static_cast<double>(r.optimal_tox.size());
  }
  oc.bias = sum_est / count - model.true_mtd;
  oc.mse = sum_sq / count;
  oc.avg_dlt_rate /= count;
  oc.pct_trials_dlt_outside *= 100.0 / count;
  oc.pct_trials_mtd_in_mtd_interval *= 100.0 / count;
  oc.pct_trials_mtd_in_tox_interval *= 100.0 / count;
  oc.avg_pct_patients_optimal_mtd *= 100.0 / count;
  oc.avg_pct_patients_optimal_tox *= 100.0 / count;
  return oc;
}

// ---------------------------------------------------------------------------
// Relative loss and its summaries

inline constexpr double kRelativeLossEpsilon = 1e-9;

struct RelativeLoss {
  std::string characteristic;
  double value = 0.0;
  bool unstable = false;  ///< continuous value below epsilon in magnitude
};

/// (discrete - continuous) / max(|continuous|, eps), per characteristic.
inline std::vector<RelativeLoss> relative_loss(const OCSet& discrete, const OCSet& continuous,
                                               double eps = kRelativeLossEpsilon) {
  const auto d = oc_fields(discrete);
  const auto c = oc_fields(continuous);
  std::vector<RelativeLoss> out;
  for (std::size_t i = 0; i < d.size(); ++i) {
    const double denom = std::max(std::abs(c[i].second), eps);
    out.push_back({d[i].first, (d[i].second - c[i].second) / denom, std::abs(c[i].second) < eps});
  }
  return out;
}

struct Quartiles {
  double q25 = 0.0;
  double median = 0.0;
  double q75 = 0.0;
};

/// Empirical quantile with linear interpolation between order statistics.
inline double empirical_quantile(std::vector<double> values, double p) {
  if (values.empty()) throw DomainError("empirical_quantile of an empty group");
  std::sort(values.begin(), values.end());
  return detail::sorted_quantile(values, p);
}

inline Quartiles summarize_cells(std::vector<double> values) {
  if (values.empty()) throw DomainError("summarize_cells needs a nonempty group");
  std::sort(values.begin(), values.end());
  return {detail::sorted_quantile(values, 0.25), detail::sorted_quantile(values, 0.5),
          detail::sorted_quantile(values, 0.75)};
}

// ---------------------------------------------------------------------------
// Optimal-dose census of a grid

enum class CensusKind { MtdInterval, ToxInterval };

struct CensusCell {
  std::size_t count = 0;
  std::size_t grid_size = 0;
  double percentage = 0.0;  ///< 100 * count / grid_size, unrounded
};

/// One decimal, half away from zero.
inline std::string format_percentage(double pct) {
  const double rounded = std::copysign(std::floor(std::abs(pct) * 10.0 + 0.5 + 1e-9) / 10.0, pct);
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", rounded);
  return buf;
}

inline CensusCell optimal_dose_census(const DoseScheme& scheme, const TrueModel& model, CensusKind kind,
                                      const OcParams& params = {}) {
  if (!scheme.is_discrete()) throw DomainError("census needs a discrete grid");
  CensusCell cell;
  cell.grid_size = scheme.grid.size();
  for (double d : scheme.grid) {
    const bool inside = kind == CensusKind::MtdInterval ? in_mtd_interval(d, model.true_mtd, params.mtd_halfwidth_factor)
                                                        : in_tox_interval(d, model, params.tox_halfwidth);
    if (inside) ++cell.count;
  }
  cell.percentage = 100.0 * static_cast<double>(cell.count) / static_cast<double>(cell.grid_size);
  return cell;
}

// ---------------------------------------------------------------------------
// Full factorial study

struct StudyConfig {
  TrialConfig trial;  ///< template: scheme and sample_size are overridden per cell
  std::vector<TrueModel> true_models;
  std::vector<DoseScheme> schemes;
  std::vector<int> sample_sizes;
  int replicates = 1000;
  std::uint64_t seed = 1;
  double optimal_mtd_halfwidth_factor = 0.15;
  double optimal_tox_halfwidth = 0.10;
  double dlt_target_halfwidth = 0.10;
  MtdScale mtd_scale = MtdScale::Continuous;

  OcParams oc_params() const { return {optimal_mtd_halfwidth_factor, optimal_tox_halfwidth, dlt_target_halfwidth}; }
};

inline std::vector<FieldError> validation_errors(const StudyConfig& s) {
  auto errs = validation_errors(s.trial);
  for (auto& e : errs) e.field = "trial." + e.field;
  if (s.replicates < 1) errs.push_back({"replicates", "replicates must be at least 1"});
  if (!(s.optimal_mtd_halfwidth_factor > 0.0))
    errs.push_back({"optimal_mtd_halfwidth_factor", "halfwidth factor must be positive"});
  if (!(s.optimal_tox_halfwidth > 0.0)) errs.push_back({"optimal_tox_halfwidth", "halfwidth must be positive"});
  if (!(s.dlt_target_halfwidth > 0.0)) errs.push_back({"dlt_target_halfwidth", "halfwidth must be positive"});
  if (s.true_models.empty()) errs.push_back({"true_models", "at least one true model is required"});
  if (s.schemes.empty()) errs.push_back({"schemes", "at least one scheme is required"});
  if (s.sample_sizes.empty()) errs.push_back({"sample_sizes", "at least one sample size is required"});
  for (std::size_t k = 0; k < s.sample_sizes.size(); ++k)
    if (s.sample_sizes[k] < s.trial.cohort_size)
      errs.push_back({"sample_sizes[" + std::to_string(k) + "]", "sample size below cohort size"});
  for (std::size_t k = 0; k < s.true_models.size(); ++k) {
    const auto& m = s.true_models[k];
    if (!(m.true_mtd > s.trial.model.x_min && m.true_mtd <= s.trial.model.x_max))
      errs.push_back({"true_models[" + std::to_string(k) + "].true_mtd", "true MTD must lie in (x_min, x_max]"});
  }
  for (std::size_t k = 0; k < s.schemes.size(); ++k) {
    TrialConfig t = s.trial;
    t.scheme = s.schemes[k];
    if (t.scheme.is_discrete() && !t.scheme.index_of(t.starting_dose) && !t.scheme.grid.empty())
      t.starting_dose = t.scheme.grid.front();
    for (auto e : validation_errors(t)) {
      if (e.field.rfind("scheme", 0) == 0) errs.push_back({"schemes[" + std::to_string(k) + "]" + e.field.substr(6), e.message});
    }
  }
  return errs;
}

struct Cell {
  std::size_t index = 0;
  std::size_t model_index = 0;
  std::size_t scheme_index = 0;
  TrueModel model;
  int sample_size = 0;
  DoseScheme scheme;
};

/// Cells in canonical order: true model, then sample size, then scheme.
inline std::vector<Cell> enumerate_cells(const StudyConfig& s) {
  std::vector<Cell> cells;
  for (std::size_t m = 0; m < s.true_models.size(); ++m)
    for (int n : s.sample_sizes)
      for (std::size_t k = 0; k < s.schemes.size(); ++k)
        cells.push_back({cells.size(), m, k, s.true_models[m], n, s.schemes[k]});
  return cells;
}

/// Trial configuration for one cell. For discrete schemes whose grid lacks the
/// template starting dose, the lowest grid dose is used.
inline TrialConfig cell_trial_config(const StudyConfig& s, const Cell& cell) {
  TrialConfig t = s.trial;
  t.scheme = cell.scheme;
  t.sample_size = cell.sample_size;
  if (t.scheme.is_discrete() && !t.scheme.index_of(t.starting_dose)) t.starting_dose = t.scheme.grid.front();
  return t;
}

struct CellResult {
  Cell cell;
  OCSet oc;
  int completed = 0;
  int failures = 0;
  std::string first_failure;
  std::vector<TrialRecord> records;  ///< kept only when requested
};

struct RunOptions {
  unsigned threads = 1;
  bool keep_records = false;
  std::function<void(const CellResult&)> on_cell;
};

/// Simulate one cell's replicates in parallel; replicate r uses stream (seed, cell, r).
inline CellResult run_cell(const StudyConfig& s, const Cell& cell, const RunOptions& opts) {
  const TrialConfig config = cell_trial_config(s, cell);
  const auto reps = static_cast<std::size_t>(s.replicates);
  std::vector<TrialRecord> records(reps);
  std::vector<std::string> errors(reps);
  std::vector<char> ok(reps, 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t r = next++; r < reps; r = next++) {
      try {
        Stream stream(s.seed, static_cast<std::uint32_t>(cell.index), static_cast<std::uint32_t>(r));
        records[r] = simulate_trial(cell.model, config, stream, s.oc_params());
        ok[r] = 1;
      } catch (const std::exception& e) {
        errors[r] = e.what();
      }
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(opts.threads, static_cast<unsigned>(reps)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  CellResult result;
  result.cell = cell;
  std::vector<TrialRecord> good;
  good.reserve(reps);
  for (std::size_t r = 0; r < reps; ++r) {
    if (ok[r]) {
      good.push_back(std::move(records[r]));
    } else {
      ++result.failures;
      if (result.first_failure.empty()) result.first_failure = errors[r];
    }
  }
  result.completed = static_cast<int>(good.size());
  if (!good.empty()) result.oc = operating_characteristics(good, cell.model, s.oc_params(), s.mtd_scale);
  if (opts.keep_records) result.records = std::move(good);
  return result;
}

struct StudyResult {
  std::vector<CellResult> cells;

  int total_failures() const {
    int n = 0;
    for (const auto& c : cells) n += c.failures;
    return n;
  }
};

inline StudyResult run_study(const StudyConfig& s, const RunOptions& opts = {}) {
  auto errs = validation_errors(s);
  if (!errs.empty()) throw ValidationError(std::move(errs));
  StudyResult out;
  for (const auto& cell : enumerate_cells(s)) {
    out.cells.push_back(run_cell(s, cell, opts));
    if (opts.on_cell) opts.on_cell(out.cells.back());
  }
  return out;
}

struct CellRelativeLoss {
  std::size_t cell_index = 0;           ///< discrete cell
  std::size_t continuous_cell_index = 0;
  std::vector<RelativeLoss> losses;
};

/// Relative loss of each discrete cell against the continuous cell of the same
/// (true model, sample size). Empty when the study has no continuous scheme.
inline std::vector<CellRelativeLoss> relative_losses(const StudyResult& r) {
  std::vector<CellRelativeLoss> out;
  for (const auto& d : r.cells) {
    if (!d.cell.scheme.is_discrete() || d.completed == 0) continue;
    for (const auto& c : r.cells) {
      if (c.cell.scheme.is_discrete() || c.completed == 0) continue;
      if (c.cell.model_index != d.cell.model_index || c.cell.sample_size != d.cell.sample_size) continue;
      out.push_back({d.cell.index, c.cell.index, relative_loss(d.oc, c.oc)});
      break;
    }
  }
  return out;
}

struct LossSummaryRow {
  std::string scheme;
  std::string true_link;
  std::string characteristic;
  Quartiles quartiles;
  std::size_t cells = 0;
  std::size_t unstable = 0;
};

/// Median and quartiles of relative loss across the (MTD x n) cells of each
/// (scheme, true link) group.
inline std::vector<LossSummaryRow> summarize_relative_losses(const StudyResult& r) {
  const auto losses = relative_losses(r);
  std::vector<LossSummaryRow> rows;
  std::vector<std::vector<double>> values;
  for (const auto& cl : losses) {
    const auto& cell = r.cells[cl.cell_index].cell;
    const std::string scheme = cell.scheme.label();
    const std::string link = cell.model.label();
    for (const auto& loss : cl.losses) {
      std::size_t k = 0;
      for (; k < rows.size(); ++k)
        if (rows[k].scheme == scheme && rows[k].true_link == link && rows[k].characteristic == loss.characteristic)
          break;
      if (k == rows.size()) {
        rows.push_back({scheme, link, loss.characteristic, {}, 0, 0});
        values.emplace_back();
      }
      values[k].push_back(loss.value);
      ++rows[k].cells;
      if (loss.unstable) ++rows[k].unstable;
    }
  }
  for (std::size_t k = 0; k < rows.size(); ++k) rows[k].quartiles = summarize_cells(values[k]);
  return rows;
}

}  // namespace ewoc
