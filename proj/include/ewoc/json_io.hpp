#pragma once

// JSON forms of configurations, trial snapshots, and posterior summaries.
// Parsing collects every field problem before failing.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "ewoc/errors.hpp"
#include "ewoc/policy.hpp"
#include "ewoc/posterior.hpp"
#include "ewoc/simulation.hpp"
#include "ewoc/stats.hpp"
#include "ewoc/trial.hpp"

namespace ewoc {

using json = nlohmann::json;

inline constexpr const char* kSnapshotFormat = "ewoc-trial-snapshot/1";
inline constexpr const char* kSoftwareVersion = "1.0.0";

namespace detail {

/// Reads fields of one JSON object, recording type errors and unknown keys.
class FieldReader {
 public:
  FieldReader(const json& j, std::string prefix, std::vector<FieldError>& errs)
      : j_(j), prefix_(std::move(prefix)), errs_(errs) {
    if (!j_.is_object()) fail("", "expected an object");
  }

  ~FieldReader() = default;
  FieldReader(const FieldReader&) = delete;
  FieldReader& operator=(const FieldReader&) = delete;

  std::string path(const std::string& key) const { return prefix_.empty() ? key : key.empty() ? prefix_ : prefix_ + "." + key; }

  void fail(const std::string& key, std::string msg) { errs_.push_back({path(key), std::move(msg)}); }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.is_object() && j_.contains(key) && !j_.at(key).is_null();
  }

  const json& at(const std::string& key) const { return j_.at(key); }

  void number(const std::string& key, double& out) {
    if (!has(key)) return;
    if (!at(key).is_number()) return fail(key, "expected a number");
    out = at(key).get<double>();
  }

  void integer(const std::string& key, int& out) {
    if (!has(key)) return;
    if (!at(key).is_number_integer()) return fail(key, "expected an integer");
    out = at(key).get<int>();
  }

  void size(const std::string& key, std::size_t& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      return fail(key, "expected a nonnegative integer");
    out = v.get<std::size_t>();
  }

  void u64(const std::string& key, std::uint64_t& out) {
    if (!has(key)) return;
    const auto& v = at(key);
    if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
      return fail(key, "expected a nonnegative integer");
    out = v.get<std::uint64_t>();
  }

  void boolean(const std::string& key, bool& out) {
    if (!has(key)) return;
    if (!at(key).is_boolean()) return fail(key, "expected true or false");
    out = at(key).get<bool>();
  }

  std::optional<std::string> string(const std::string& key) {
    if (!has(key)) return std::nullopt;
    if (!at(key).is_string()) {
      fail(key, "expected a string");
      return std::nullopt;
    }
    return at(key).get<std::string>();
  }

  /// Report keys that no reader asked for.
  void finish() {
    if (!j_.is_object()) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key)) fail(key, "unknown field");
  }

 private:
  const json& j_;
  std::string prefix_;
  std::vector<FieldError>& errs_;
  std::set<std::string> seen_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// to_json

inline json to_json(const LinkFunction& l) {
  json j{{"family", to_string(l.family())}, {"location", l.location()}, {"scale", l.scale()}};
  if (l.family() == LinkFamily::SkewNormal) j["shape"] = l.shape();
  return j;
}

inline json to_json(const BetaParams& b) { return {{"a", b.a}, {"b", b.b}}; }

inline json to_json(const ModelConfig& m) {
  return {{"x_min", m.x_min},
          {"x_max", m.x_max},
          {"theta", m.theta},
          {"prior_rho0", to_json(m.prior_rho0)},
          {"prior_gamma", to_json(m.prior_gamma)},
          {"working_link", to_json(m.working_link)}};
}

inline json to_json(const DoseScheme& s) {
  if (!s.is_discrete()) return {{"kind", "continuous"}};
  return {{"kind", "discrete"}, {"grid", s.grid}, {"rounding", to_string(s.rounding)}, {"no_skip", s.no_skip}};
}

inline json to_json(const FeasibilitySchedule& f) {
  return {{"kind", to_string(f.kind)}, {"alpha0", f.alpha0}, {"step", f.step}, {"cap", f.cap}};
}

inline json to_json(const BackendSpec& b) {
  return {{"kind", to_string(b.kind)}, {"resolution", b.resolution}, {"burn_in", b.burn_in},
          {"draws", b.draws},          {"seed", b.seed},             {"target_acceptance", b.target_acceptance}};
}

inline json to_json(const TrialConfig& c) {
  return {{"model", to_json(c.model)},
          {"scheme", to_json(c.scheme)},
          {"feasibility", to_json(c.feasibility)},
          {"sample_size", c.sample_size},
          {"cohort_size", c.cohort_size},
          {"starting_dose", c.starting_dose},
          {"backend", to_json(c.backend)},
          {"mtd_estimator", to_string(c.mtd_estimator)}};
}

inline json to_json(const ToxicityRecord& r) { return {{"dose", r.dose}, {"dlt", r.dlt}}; }

inline json records_to_json(std::span<const ToxicityRecord> records) {
  json arr = json::array();
  for (const auto& r : records) arr.push_back(to_json(r));
  return arr;
}

inline json to_json(const TrialState& s) {
  return {{"format", kSnapshotFormat},
          {"config", to_json(s.config())},
          {"records", records_to_json(s.records())},
          {"status", to_string(s.status())}};
}

inline json to_json(const PosteriorSummary& p) {
  json q = json::array();
  for (const auto& [prob, dose] : p.gamma_quantiles) q.push_back({{"p", prob}, {"dose", dose}});
  json diag;
  if (p.backend == Backend::Quadrature) {
    diag = {{"resolution", p.diagnostics.resolution}};
  } else {
    diag = {{"burn_in", p.diagnostics.burn_in},
            {"draws", p.diagnostics.draws},
            {"acceptance_rate", p.diagnostics.acceptance_rate},
            {"step_size", p.diagnostics.step_size}};
    if (!p.diagnostics.warning.empty()) diag["warning"] = p.diagnostics.warning;
  }
  json j{{"backend", to_string(p.backend)},  {"gamma_quantiles", q},   {"gamma_mean", p.gamma_mean},
         {"gamma_median", p.gamma_median}, {"rho0_mean", p.rho0_mean}, {"diagnostics", diag}};
  if (std::isfinite(p.log_normalization)) {
    j["normalization"] = p.normalization;
    j["log_normalization"] = p.log_normalization;
  }
  return j;
}

inline json to_json(const DoseRecommendation& r) {
  return {{"continuous_dose", r.continuous_dose},
          {"administered_dose", r.administered_dose},
          {"alpha", r.alpha_used},
          {"cohort_start", r.cohort_start}};
}

inline json to_json(const MtdEstimate& e) {
  return {{"estimate", e.estimate},
          {"interim", e.interim},
          {"alpha", e.alpha},
          {"interval", {e.posterior.quantile(0.05), e.posterior.quantile(0.95)}}};
}

inline json density_trace_json(const PosteriorSummary& p, std::size_t points = 201) {
  json dose = json::array();
  json density = json::array();
  for (const auto& pt : p.density_trace(points)) {
    dose.push_back(pt.dose);
    density.push_back(pt.density);
  }
  return {{"dose", dose}, {"density", density}};
}

inline json to_json(const TrueModel& m) {
  return {{"link", to_json(m.link)}, {"true_mtd", m.true_mtd}, {"true_rho0", m.true_rho0}};
}

inline json to_json(const StudyConfig& s) {
  json models = json::array();
  for (const auto& m : s.true_models) models.push_back(to_json(m));
  json schemes = json::array();
  for (const auto& sc : s.schemes) schemes.push_back(to_json(sc));
  return {{"trial", to_json(s.trial)},
          {"true_models", models},
          {"schemes", schemes},
          {"sample_sizes", s.sample_sizes},
          {"replicates", s.replicates},
          {"seed", s.seed},
          {"optimal_mtd_halfwidth_factor", s.optimal_mtd_halfwidth_factor},
          {"optimal_tox_halfwidth", s.optimal_tox_halfwidth},
          {"dlt_target_halfwidth", s.dlt_target_halfwidth},
          {"mtd_scale", to_string(s.mtd_scale)}};
}

// ---------------------------------------------------------------------------
// parsing

namespace detail {

inline LinkFunction parse_link(const json& j, const std::string& prefix, std::vector<FieldError>& errs) {
  FieldReader r(j, prefix, errs);
  LinkFamily family = LinkFamily::Logistic;
  if (auto f = r.string("family")) {
    if (*f == "logistic") family = LinkFamily::Logistic;
    else if (*f == "normal") family = LinkFamily::Normal;
    else if (*f == "skewnormal" || *f == "skew-normal" || *f == "skew_normal") family = LinkFamily::SkewNormal;
    else r.fail("family", "expected logistic, normal or skewnormal");
  }
  double location = 0.0, scale = 1.0, shape = 0.0;
  r.number("location", location);
  r.number("scale", scale);
  r.number("shape", shape);
  r.finish();
  try {
    return LinkFunction(family, location, scale, shape);
  } catch (const DomainError& e) {
    r.fail("scale", e.what());
    return {};
  }
}

inline BetaParams parse_beta(const json& j, const std::string& prefix, std::vector<FieldError>& errs) {
  FieldReader r(j, prefix, errs);
  BetaParams b;
  r.number("a", b.a);
  r.number("b", b.b);
  r.finish();
  return b;
}

inline ModelConfig parse_model(const json& j, const std::string& prefix, std::vector<FieldError>& errs) {
  FieldReader r(j, prefix, errs);
  ModelConfig m;
  r.number("x_min", m.x_min);
  r.number("x_max", m.x_max);
  r.number("theta", m.theta);
  if (r.has("prior_rho0")) m.prior_rho0 = parse_beta(r.at("prior_rho0"), r.path("prior_rho0"), errs);
  if (r.has("prior_gamma")) m.prior_gamma = parse_beta(r.at("prior_gamma"), r.path("prior_gamma"), errs);
  if (r.has("working_link")) m.working_link = parse_link(r.at("working_link"), r.path("working_link"), errs);
  r.finish();
  return m;
}

inline DoseScheme parse_scheme(const json& j, const std::string& prefix, std::vector<FieldError>& errs,
                               double x_min, double x_max) {
  FieldReader r(j, prefix, errs);
  DoseScheme s;
  const auto kind = r.string("kind").value_or("continuous");
  if (kind == "continuous") {
    s.kind = SchemeKind::Continuous;
  } else if (kind == "discrete") {
    s.kind = SchemeKind::Discrete;
  } else {
    r.fail("kind", "expected continuous or discrete");
  }
  if (auto rounding = r.string("rounding")) {
    if (*rounding == "down") s.rounding = Rounding::Down;
    else if (*rounding == "nearest") s.rounding = Rounding::Nearest;
    else r.fail("rounding", "expected down or nearest");
  }
  r.boolean("no_skip", s.no_skip);
  double spacing = 0.0;
  r.number("spacing", spacing);
  if (r.has("grid")) {
    const auto& g = r.at("grid");
    if (!g.is_array()) {
      r.fail("grid", "expected an array of doses");
    } else {
      for (const auto& d : g) {
        if (!d.is_number()) {
          r.fail("grid", "grid entries must be numbers");
          break;
        }
        s.grid.push_back(d.get<double>());
      }
    }
  } else if (spacing > 0.0 && s.kind == SchemeKind::Discrete) {
    try {
      s.grid = DoseScheme::equally_spaced(x_min, x_max, spacing).grid;
    } catch (const DomainError& e) {
      r.fail("spacing", e.what());
    }
  } else if (s.kind == SchemeKind::Discrete) {
    r.fail("grid", "discrete schemes need a grid or a spacing");
  }
  if (s.kind == SchemeKind::Continuous) s.grid.clear();
  r.finish();
  return s;
}

inline FeasibilitySchedule parse_feasibility(const json& j, const std::string& prefix, std::vector<FieldError>& errs) {
  FieldReader r(j, prefix, errs);
  FeasibilitySchedule f;
  if (auto k = r.string("kind")) {
    if (*k == "fixed") f.kind = ScheduleKind::Fixed;
    else if (*k == "increasing") f.kind = ScheduleKind::Increasing;
    else if (*k == "conditional") f.kind = ScheduleKind::Conditional;
    else r.fail("kind", "expected fixed, increasing or conditional");
  }
  r.number("alpha0", f.alpha0);
  r.number("step", f.step);
  r.number("cap", f.cap);
  if (f.kind == ScheduleKind::Fixed && !r.has("step")) f.step = 0.0;
  r.finish();
  return f;
}

inline BackendSpec parse_backend(const json& j, const std::string& prefix, std::vector<FieldError>& errs) {
  FieldReader r(j, prefix, errs);
  BackendSpec b;
  if (auto k = r.string("kind")) {
    if (*k == "quadrature") b.kind = Backend::Quadrature;
    else if (*k == "metropolis") b.kind = Backend::Metropolis;
    else r.fail("kind", "expected quadrature or metropolis");
  }
  r.size("resolution", b.resolution);
  r.size("burn_in", b.burn_in);
  r.size("draws", b.draws);
  r.u64("seed", b.seed);
  r.number("target_acceptance", b.target_acceptance);
  r.finish();
  return b;
}

inline TrialConfig parse_trial_config_fields(const json& j, const std::string& prefix, std::vector<FieldError>& errs) {
  FieldReader r(j, prefix, errs);
  TrialConfig c;
  if (r.has("model")) c.model = parse_model(r.at("model"), r.path("model"), errs);
  if (r.has("scheme")) c.scheme = parse_scheme(r.at("scheme"), r.path("scheme"), errs, c.model.x_min, c.model.x_max);
  if (r.has("feasibility")) c.feasibility = parse_feasibility(r.at("feasibility"), r.path("feasibility"), errs);
  r.integer("sample_size", c.sample_size);
  r.integer("cohort_size", c.cohort_size);
  r.number("starting_dose", c.starting_dose);
  if (!r.has("starting_dose")) c.starting_dose = c.scheme.is_discrete() && !c.scheme.grid.empty() ? c.scheme.grid.front() : c.model.x_min;
  if (r.has("backend")) c.backend = parse_backend(r.at("backend"), r.path("backend"), errs);
  if (auto e = r.string("mtd_estimator")) {
    if (*e == "median" || *e == "posterior_median") c.mtd_estimator = MtdEstimator::PosteriorMedian;
    else if (*e == "alpha" || *e == "alpha_quantile") c.mtd_estimator = MtdEstimator::AlphaQuantile;
    else r.fail("mtd_estimator", "expected median or alpha");
  }
  r.finish();
  return c;
}

inline void prefix_errors(std::vector<FieldError>& errs, const std::string& prefix, std::size_t from) {
  if (prefix.empty()) return;
  for (std::size_t i = from; i < errs.size(); ++i) errs[i].field = prefix + "." + errs[i].field;
}

}  // namespace detail

/// Parse and validate a trial configuration. Missing fields take the defaults
/// of TrialConfig. Throws ValidationError listing every problem.
inline TrialConfig trial_config_from_json(const json& j) {
  std::vector<FieldError> errs;
  TrialConfig c = detail::parse_trial_config_fields(j, "", errs);
  if (errs.empty()) errs = validation_errors(c);
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return c;
}

inline std::vector<ToxicityRecord> records_from_json(const json& j) {
  if (!j.is_array()) throw IntegrityError("records must be an array");
  std::vector<ToxicityRecord> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto& e = j[i];
    if (!e.is_object() || !e.contains("dose") || !e.contains("dlt") || !e["dose"].is_number() ||
        !e["dlt"].is_number_integer())
      throw IntegrityError("record " + std::to_string(i) + " must have numeric dose and integer dlt");
    out.push_back({e["dose"].get<double>(), e["dlt"].get<int>()});
  }
  return out;
}

/// Load a snapshot, replaying its records through the design. Throws
/// IntegrityError when the snapshot is inconsistent.
inline TrialState trial_from_json(const json& j) {
  if (!j.is_object() || !j.contains("config") || !j.contains("records"))
    throw IntegrityError("snapshot must contain config and records");
  TrialConfig config;
  try {
    config = trial_config_from_json(j.at("config"));
  } catch (const ValidationError& e) {
    throw IntegrityError(std::string("snapshot config: ") + e.what());
  }
  const auto records = records_from_json(j.at("records"));
  TrialState state = replay(config, records);
  if (j.contains("status") && j.at("status").is_string() && j.at("status").get<std::string>() != to_string(state.status()))
    throw IntegrityError("snapshot status does not match its records");
  return state;
}

inline StudyConfig study_config_from_json(const json& j) {
  std::vector<FieldError> errs;
  detail::FieldReader r(j, "", errs);
  StudyConfig s;
  if (r.has("trial")) {
    const auto from = errs.size();
    s.trial = detail::parse_trial_config_fields(r.at("trial"), "", errs);
    detail::prefix_errors(errs, "trial", from);
  }
  if (r.has("true_models")) {
    const auto& arr = r.at("true_models");
    if (!arr.is_array()) {
      r.fail("true_models", "expected an array");
    } else {
      for (std::size_t k = 0; k < arr.size(); ++k) {
        const std::string path = "true_models[" + std::to_string(k) + "]";
        detail::FieldReader m(arr[k], path, errs);
        LinkFunction link;
        if (m.has("link")) link = detail::parse_link(m.at("link"), m.path("link"), errs);
        double mtd = 0.0, rho0 = 0.05;
        m.number("true_mtd", mtd);
        m.number("true_rho0", rho0);
        m.finish();
        if (!(rho0 > 0.0 && rho0 < s.trial.model.theta)) {
          m.fail("true_rho0", "true_rho0 must lie in (0, theta)");
          continue;
        }
        if (!(s.trial.model.theta > 0.0 && s.trial.model.theta < 1.0)) continue;  // reported by trial validation
        if (!(mtd > s.trial.model.x_min)) {
          m.fail("true_mtd", "true MTD must exceed x_min");
          continue;
        }
        s.true_models.push_back(TrueModel::make(link, mtd, rho0, s.trial.model.theta, s.trial.model.x_min));
      }
    }
  }
  if (r.has("schemes")) {
    const auto& arr = r.at("schemes");
    if (!arr.is_array()) {
      r.fail("schemes", "expected an array");
    } else {
      for (std::size_t k = 0; k < arr.size(); ++k)
        s.schemes.push_back(detail::parse_scheme(arr[k], "schemes[" + std::to_string(k) + "]", errs,
                                                 s.trial.model.x_min, s.trial.model.x_max));
    }
  }
  if (r.has("sample_sizes")) {
    const auto& arr = r.at("sample_sizes");
    if (!arr.is_array()) {
      r.fail("sample_sizes", "expected an array");
    } else {
      for (const auto& n : arr) {
        if (!n.is_number_integer()) {
          r.fail("sample_sizes", "expected integers");
          break;
        }
        s.sample_sizes.push_back(n.get<int>());
      }
    }
  }
  r.integer("replicates", s.replicates);
  r.u64("seed", s.seed);
  r.number("optimal_mtd_halfwidth_factor", s.optimal_mtd_halfwidth_factor);
  r.number("optimal_tox_halfwidth", s.optimal_tox_halfwidth);
  r.number("dlt_target_halfwidth", s.dlt_target_halfwidth);
  if (auto scale = r.string("mtd_scale")) {
    if (*scale == "continuous") s.mtd_scale = MtdScale::Continuous;
    else if (*scale == "grid") s.mtd_scale = MtdScale::Grid;
    else r.fail("mtd_scale", "expected continuous or grid");
  }
  r.finish();
  if (errs.empty()) errs = validation_errors(s);
  if (!errs.empty()) throw ValidationError(std::move(errs));
  return s;
}

inline json field_errors_json(const std::vector<FieldError>& errs) {
  json arr = json::array();
  for (const auto& e : errs) arr.push_back({{"field", e.field}, {"message", e.message}});
  return arr;
}

}  // namespace ewoc
