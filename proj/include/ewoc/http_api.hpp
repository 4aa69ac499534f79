#pragma once

// HTTP/JSON routes over a TrialStore.

#include <filesystem>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "ewoc/json_io.hpp"
#include "ewoc/store.hpp"

namespace ewoc {

namespace detail {

inline void send_json(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json");
}

inline void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                       json extra = json::object()) {
  extra["error"] = code;
  extra["message"] = message;
  send_json(res, status, extra);
}

inline json audit_json(const std::vector<AuditEntry>& audit) {
  json arr = json::array();
  for (const auto& a : audit) arr.push_back({{"ts", a.timestamp}, {"action", a.action}, {"digest", a.digest}});
  return arr;
}

inline json stored_trial_json(const StoredTrial& t) {
  return {{"id", t.id}, {"revision", t.revision}, {"snapshot", to_json(t.state)}, {"audit", audit_json(t.audit)}};
}

inline json recommendation_json(const std::string& id, const RecommendationView& v) {
  json body{{"id", id}, {"revision", v.revision}, {"status", to_string(v.status)}};
  const auto& post = v.estimate.posterior;
  if (v.recommendation) body["recommendation"] = to_json(*v.recommendation);
  if (v.pending_dose) body["pending_dose"] = *v.pending_dose;
  body[v.status == TrialStatus::Complete ? "final_estimate" : "interim_estimate"] = to_json(v.estimate);
  body["posterior"] = to_json(post);
  body["density"] = density_trace_json(post, 201);
  return body;
}

}  // namespace detail

/// Register the trial endpoints. When `ui_dir` exists its files are served at "/".
inline void register_routes(httplib::Server& server, TrialStore& store, const std::filesystem::path& ui_dir = {}) {
  using detail::send_error;
  using detail::send_json;

  server.Post("/trials", [&store](const httplib::Request& req, httplib::Response& res) {
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return send_error(res, 400, "bad_json", e.what());
    }
    try {
      const TrialConfig config = trial_config_from_json(body);
      const auto id = store.create(config);
      send_json(res, 201, {{"id", id}, {"revision", 0}, {"config", to_json(config)}});
    } catch (const ValidationError& e) {
      send_error(res, 422, "validation", e.what(), {{"fields", field_errors_json(e.errors())}});
    }
  });

  server.Get("/trials", [&store](const httplib::Request&, httplib::Response& res) {
    json arr = json::array();
    for (const auto& t : store.list())
      arr.push_back({{"id", t.id},
                     {"patients", t.patients},
                     {"status", to_string(t.status)},
                     {"revision", t.revision},
                     {"updated", t.updated}});
    send_json(res, 200, arr);
  });

  server.Get(R"(/trials/([0-9a-f]+))", [&store](const httplib::Request& req, httplib::Response& res) {
    try {
      send_json(res, 200, detail::stored_trial_json(store.get(req.matches[1])));
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    }
  });

  server.Get(R"(/trials/([0-9a-f]+)/recommendation)", [&store](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    try {
      const auto view = store.recommendation(id);
      auto body = detail::recommendation_json(id, view);
      if (view.status == TrialStatus::Complete) {
        body["error"] = "trial_complete";
        body["message"] = "trial is complete";
        return send_json(res, 409, body);
      }
      if (view.status == TrialStatus::AwaitingOutcome) {
        body["error"] = "outcomes_pending";
        body["message"] = "cohort outcomes are still pending";
        return send_json(res, 409, body);
      }
      send_json(res, 200, body);
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    }
  });

  server.Post(R"(/trials/([0-9a-f]+)/outcomes)", [&store](const httplib::Request& req, httplib::Response& res) {
    const std::string id = req.matches[1];
    json body;
    try {
      body = json::parse(req.body);
    } catch (const json::parse_error& e) {
      return send_error(res, 400, "bad_json", e.what());
    }
    std::vector<FieldError> errs;
    if (!body.is_object()) errs.push_back({"", "expected an object"});
    else {
      if (!body.contains("dose") || !body["dose"].is_number()) errs.push_back({"dose", "expected a number"});
      if (!body.contains("dlt") || !body["dlt"].is_number_integer() || (body["dlt"] != 0 && body["dlt"] != 1))
        errs.push_back({"dlt", "expected 0 or 1"});
      if (!body.contains("expected_revision") || !body["expected_revision"].is_number_unsigned())
        errs.push_back({"expected_revision", "expected a nonnegative integer"});
    }
    if (!errs.empty())
      return send_error(res, 422, "validation", "invalid outcome", {{"fields", field_errors_json(errs)}});
    try {
      const auto revision = store.post_outcome(id, body["dose"].get<double>(), body["dlt"].get<int>(),
                                               body["expected_revision"].get<std::size_t>());
      const auto t = store.get(id);
      send_json(res, 200, {{"id", id}, {"revision", revision}, {"status", to_string(t.state.status())}});
    } catch (const NotFoundError& e) {
      send_error(res, 404, "not_found", e.what());
    } catch (const RevisionConflict& e) {
      send_error(res, 409, "revision_conflict", e.what(), {{"current_revision", e.current()}});
    } catch (const SequencingError& e) {
      send_error(res, 422, "trial_complete", e.what());
    } catch (const IntegrityError& e) {
      send_error(res, 422, "dose_mismatch", e.what());
    }
  });

  server.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
    try {
      std::rethrow_exception(ep);
    } catch (const std::exception& e) {
      send_error(res, 500, "internal", e.what());
    } catch (...) {
      send_error(res, 500, "internal", "unknown error");
    }
  });

  if (!ui_dir.empty() && std::filesystem::is_directory(ui_dir)) server.set_mount_point("/", ui_dir.string());
}

}  // namespace ewoc
